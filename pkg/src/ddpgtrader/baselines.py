"""Comparison strategies: long-only min-variance allocation and a
price-weighted buy-and-hold index proxy.

The min-variance solver minimizes w'(S + ridge*I)w over the probability
simplex by projected gradient descent. The closed form S^-1 1 / (1' S^-1 1)
can go short, so the long-only constraint forces an iterative method;
Euclidean simplex projection keeps every iterate feasible. Baselines trade
fractional shares and hold no cash, so each rebalance is exactly
self-financing.
"""

from __future__ import annotations

import csv
import datetime as dt

import numpy as np

from . import metrics
from .errors import DataError, NumericError
from .marketdata import PriceSeries, daily_returns

DEFAULT_LOOKBACK = 252
DEFAULT_REBALANCE_EVERY = 21
DEFAULT_RIDGE = 1e-8


def sample_covariance(returns: np.ndarray, window: int) -> np.ndarray:
    """Unbiased covariance (divisor window-1) of the trailing `window` rows."""
    rets = np.asarray(returns, dtype=np.float64)
    if rets.ndim != 2:
        raise ValueError(f"returns must be 2-D (days x assets), got shape {rets.shape}")
    if window < 2:
        raise ValueError(f"window must be >= 2, got {window}")
    if len(rets) < window:
        raise ValueError(f"need {window} return rows, have {len(rets)}")
    tail = rets[-window:]
    centered = tail - tail.mean(axis=0)
    return centered.T @ centered / (window - 1)


def simplex_projection(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto {w : w >= 0, sum w = 1} (sort-based)."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or len(v) == 0:
        raise ValueError("can only project a non-empty 1-D vector")
    u = np.sort(v)[::-1]
    cumulative = np.cumsum(u) - 1.0
    ranks = np.arange(1, len(v) + 1)
    rho = np.nonzero(u - cumulative / ranks > 0.0)[0][-1]
    theta = cumulative[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def min_variance_weights(sigma: np.ndarray, ridge: float = DEFAULT_RIDGE, max_iters: int = 10_000) -> np.ndarray:
    """Long-only weights approximately minimizing w'(sigma + ridge*I)w.

    Projected gradient descent from the uniform point with fixed step 1/L,
    L = 2*lambda_max (the objective's gradient Lipschitz constant), which
    makes the objective non-increasing; stops once an iteration moves the
    weights by less than 1e-11 in sup norm.
    """
    a = np.asarray(sigma, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"covariance must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NumericError("covariance contains non-finite entries")
    scale = 1.0 + np.abs(a).max()
    if np.abs(a - a.T).max() > 1e-12 * scale:
        raise ValueError("covariance must be symmetric")
    if ridge < 0.0:
        raise ValueError(f"ridge must be >= 0, got {ridge}")
    d = a.shape[0]
    a = a + ridge * np.eye(d)
    lipschitz = 2.0 * max(float(np.linalg.eigvalsh(a)[-1]), np.finfo(float).tiny)
    w = np.full(d, 1.0 / d)
    for _ in range(max_iters):
        w_next = simplex_projection(w - (1.0 / lipschitz) * (2.0 * (a @ w)))
        moved = float(np.abs(w_next - w).max())
        w = w_next
        if moved < 1e-11:
            break
    return w


def run_min_variance(
    series: PriceSeries,
    initial_balance: float,
    lookback: int = DEFAULT_LOOKBACK,
    rebalance_every: int = DEFAULT_REBALANCE_EVERY,
    ridge: float = DEFAULT_RIDGE,
) -> metrics.BacktestReport:
    """Walk the series fully invested, re-solving weights on a fixed cadence.

    Starts uniform on day 0 (no return history exists yet); the first
    covariance-based rebalance happens on day `lookback`, then every
    `rebalance_every` days. Positions are fractional shares, so portfolio
    value is conserved through every rebalance.
    """
    if lookback < 2 or rebalance_every < 1:
        raise ValueError("need lookback >= 2 and rebalance_every >= 1")
    if initial_balance <= 0.0:
        raise ValueError(f"initial_balance must be positive, got {initial_balance}")
    if series.num_days <= lookback + 1:
        raise ValueError(f"series spans {series.num_days} days; need more than lookback + 1 = {lookback + 1}")
    rets = daily_returns(series).returns
    prices = series.prices
    weights = np.full(series.num_assets, 1.0 / series.num_assets)
    holdings = initial_balance * weights / prices[0]
    curve = np.empty(series.num_days)
    curve[0] = initial_balance  # day 0 is worth exactly the cash spent on it
    for t in range(1, series.num_days):
        value = float(prices[t] @ holdings)
        if t >= lookback and (t - lookback) % rebalance_every == 0:
            sigma = sample_covariance(rets[:t], lookback)
            weights = min_variance_weights(sigma, ridge)
            holdings = value * weights / prices[t]
        curve[t] = value
    return metrics.build_report("min-variance", series.dates, curve)


def load_external_index(path) -> dict[dt.date, float]:
    """Read a `date,value` CSV into a date-keyed mapping."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataError(f"cannot read index file {path}: {exc}") from exc
    if not rows or [c.strip().lower() for c in rows[0]] != ["date", "value"]:
        raise DataError(f"{path}: expected header 'date,value'")
    out: dict[dt.date, float] = {}
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != 2:
            raise DataError(f"{path} line {i}: expected 2 fields, got {len(row)}")
        try:
            date = dt.date.fromisoformat(row[0].strip())
            value = float(row[1])
        except ValueError as exc:
            raise DataError(f"{path} line {i}: {exc}") from exc
        if not np.isfinite(value) or value <= 0.0:
            raise DataError(f"{path} line {i}: index value must be positive, got {row[1]}")
        if date in out:
            raise DataError(f"{path} line {i}: duplicate date {date}")
        out[date] = value
    if not out:
        raise DataError(f"{path}: no index rows")
    return out


def run_index(
    series: PriceSeries,
    initial_balance: float,
    external_index: dict[dt.date, float] | None = None,
) -> metrics.BacktestReport:
    """Buy-and-hold index curve over the series dates.

    With an external index, the curve replays it: initial * v_t / v_0.
    Without one, a price-weighted proxy is used: initial * sum(p_t) / sum(p_0).
    """
    if initial_balance <= 0.0:
        raise ValueError(f"initial_balance must be positive, got {initial_balance}")
    if external_index is not None:
        missing = [d for d in series.dates if d not in external_index]
        if missing:
            raise DataError(f"external index missing {len(missing)} series dates, first: {missing[0]}")
        levels = np.array([external_index[d] for d in series.dates])
    else:
        levels = series.prices.sum(axis=1)
    # divide first: levels[0]/levels[0] is exactly 1, so the curve starts
    # at exactly the initial balance
    curve = initial_balance * (levels / levels[0])
    return metrics.build_report("index", series.dates, curve)
