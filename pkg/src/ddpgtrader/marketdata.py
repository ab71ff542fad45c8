"""Daily price-table ingestion, period splitting, and synthetic generators.

Two CSV layouts are accepted:

* wide  -- header ``date,<ticker1>,...,<tickerD>``, one row per date
* long  -- header ``date,ticker,close``, one row per (date, ticker) quote

Dates are ISO-8601. The wide layout is the canonical output format and
round-trips prices at full float64 precision. Supply split/dividend-adjusted
closes; corporate actions are not modelled downstream.
"""

from __future__ import annotations

import csv
import datetime as dt
import logging
from dataclasses import dataclass

import numpy as np

from .errors import DataError

log = logging.getLogger(__name__)

_LONG_HEADER = ("date", "ticker", "close")


@dataclass(frozen=True)
class PriceSeries:
    """Dense, aligned matrix of daily closing prices (dates x tickers)."""

    dates: tuple[dt.date, ...]
    tickers: tuple[str, ...]
    prices: np.ndarray  # shape (T, D), float64, strictly positive

    def __post_init__(self):
        prices = np.asarray(self.prices, dtype=np.float64)
        if prices.ndim != 2:
            raise ValueError(f"prices must be 2-D, got shape {prices.shape}")
        if prices.shape != (len(self.dates), len(self.tickers)):
            raise ValueError(
                f"prices shape {prices.shape} does not match "
                f"{len(self.dates)} dates x {len(self.tickers)} tickers"
            )
        if not np.all(np.isfinite(prices)) or np.any(prices <= 0.0):
            raise ValueError("prices must be strictly positive and finite")
        for a, b in zip(self.dates, self.dates[1:]):
            if a >= b:
                raise ValueError(f"dates must be strictly increasing ({a} >= {b})")
        prices = prices.copy()
        prices.flags.writeable = False
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "tickers", tuple(self.tickers))
        object.__setattr__(self, "prices", prices)

    @property
    def num_days(self) -> int:
        return len(self.dates)

    @property
    def num_assets(self) -> int:
        return len(self.tickers)

    def slice_days(self, start: int, stop: int) -> "PriceSeries":
        """Sub-series covering date rows ``start:stop``."""
        return PriceSeries(self.dates[start:stop], self.tickers, self.prices[start:stop])

    def to_wide_csv(self, path) -> None:
        """Write the canonical wide layout; floats keep full precision."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["date", *self.tickers])
            for date, row in zip(self.dates, self.prices):
                writer.writerow([date.isoformat(), *(repr(float(x)) for x in row)])


@dataclass(frozen=True)
class PeriodSplit:
    """Contiguous train < validation < trade partition of one PriceSeries."""

    train: PriceSeries
    validation: PriceSeries
    trade: PriceSeries


@dataclass(frozen=True)
class ReturnMatrix:
    """Simple daily returns: returns[t][d] = prices[t+1][d]/prices[t][d] - 1."""

    returns: np.ndarray  # shape (T-1, D)

    def __post_init__(self):
        returns = np.asarray(self.returns, dtype=np.float64)
        if returns.ndim != 2:
            raise ValueError("returns must be 2-D")
        if not np.all(np.isfinite(returns)) or np.any(returns <= -1.0):
            raise ValueError("returns must be finite and > -1")
        returns = returns.copy()
        returns.flags.writeable = False
        object.__setattr__(self, "returns", returns)


def _parse_date(text: str, where: str) -> dt.date:
    try:
        return dt.date.fromisoformat(text.strip())
    except ValueError as exc:
        raise DataError(f"{where}: bad date {text!r}") from exc


def _parse_price(text: str, where: str) -> float:
    try:
        value = float(text)
    except ValueError as exc:
        raise DataError(f"{where}: bad price {text!r}") from exc
    if not np.isfinite(value) or value <= 0.0:
        raise DataError(f"{where}: non-positive price {text!r}")
    return value


def load_price_table(path, universe: list[str] | None = None) -> PriceSeries:
    """Load a wide or long CSV into a dense, aligned PriceSeries.

    The layout is detected from the header row. Dates lacking a quote for any
    ticker of the universe are dropped (and the count logged) so the result
    has a price for every (date, ticker) cell.
    """
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataError(f"cannot read price table {path}: {exc}") from exc
    rows = [row for row in rows if row and any(cell.strip() for cell in row)]
    if not rows:
        raise DataError(f"{path}: empty file")
    header = [cell.strip() for cell in rows[0]]
    if tuple(h.lower() for h in header) == _LONG_HEADER:
        quotes = _read_long(rows[1:], path)
    elif header and header[0].lower() == "date" and len(header) >= 2:
        quotes = _read_wide(header[1:], rows[1:], path)
    else:
        raise DataError(f"{path}: unrecognized header {header!r}")

    tickers = list(universe) if universe is not None else sorted({t for q in quotes.values() for t in q})
    if not tickers:
        raise DataError(f"{path}: no tickers found")
    seen = {t for q in quotes.values() for t in q}
    missing = [t for t in tickers if t not in seen]
    if missing:
        raise DataError(f"{path}: tickers absent from data: {missing}")

    dates, matrix, dropped = [], [], 0
    for date in sorted(quotes):
        row = quotes[date]
        if all(t in row for t in tickers):
            dates.append(date)
            matrix.append([row[t] for t in tickers])
        else:
            dropped += 1
    if dropped:
        log.warning("%s: dropped %d date(s) with incomplete quotes", path, dropped)
    if len(dates) < 2:
        raise DataError(f"{path}: fewer than 2 usable dates after alignment")
    return PriceSeries(tuple(dates), tuple(tickers), np.array(matrix, dtype=np.float64))


def _read_long(rows, path) -> dict[dt.date, dict[str, float]]:
    quotes: dict[dt.date, dict[str, float]] = {}
    for i, row in enumerate(rows, start=2):
        if len(row) != 3:
            raise DataError(f"{path}:{i}: expected 3 columns, got {len(row)}")
        date = _parse_date(row[0], f"{path}:{i}")
        ticker = row[1].strip()
        if not ticker:
            raise DataError(f"{path}:{i}: empty ticker")
        if ticker in quotes.get(date, ()):
            raise DataError(f"{path}:{i}: duplicate quote for ({date}, {ticker})")
        quotes.setdefault(date, {})[ticker] = _parse_price(row[2], f"{path}:{i}")
    return quotes


def _read_wide(tickers, rows, path) -> dict[dt.date, dict[str, float]]:
    tickers = [t.strip() for t in tickers]
    if len(set(tickers)) != len(tickers):
        raise DataError(f"{path}: duplicate ticker column")
    quotes: dict[dt.date, dict[str, float]] = {}
    for i, row in enumerate(rows, start=2):
        if len(row) != len(tickers) + 1:
            raise DataError(f"{path}:{i}: expected {len(tickers) + 1} columns, got {len(row)}")
        date = _parse_date(row[0], f"{path}:{i}")
        if date in quotes:
            raise DataError(f"{path}:{i}: duplicate date {date}")
        quotes[date] = {
            t: _parse_price(cell, f"{path}:{i}")
            for t, cell in zip(tickers, row[1:])
            if cell.strip() != ""
        }
    return quotes


def split_periods(series: PriceSeries, train_end: dt.date, validation_end: dt.date) -> PeriodSplit:
    """Split into train/validation/trade; a boundary date belongs to the earlier period."""
    if train_end >= validation_end:
        raise ValueError(f"train_end {train_end} must precede validation_end {validation_end}")
    first, last = series.dates[0], series.dates[-1]
    if not (first <= train_end <= last) or not (first <= validation_end <= last):
        raise ValueError(
            f"split boundaries ({train_end}, {validation_end}) outside series range"
            f" [{first}, {last}]"
        )
    i = sum(1 for d in series.dates if d <= train_end)
    j = sum(1 for d in series.dates if d <= validation_end)
    split = PeriodSplit(
        train=_nonempty(series, 0, i, "train"),
        validation=_nonempty(series, i, j, "validation"),
        trade=_nonempty(series, j, series.num_days, "trade"),
    )
    return split


def _nonempty(series: PriceSeries, start: int, stop: int, name: str) -> PriceSeries:
    if stop - start < 2:
        raise ValueError(f"{name} period has {stop - start} date(s); need at least 2")
    return series.slice_days(start, stop)


def _per_ticker(value, num_assets: int, name: str) -> np.ndarray:
    arr = np.broadcast_to(np.asarray(value, dtype=np.float64), (num_assets,)).copy()
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr


def synthetic_series(
    kind: str,
    days: int,
    tickers: int,
    *,
    drift=0.0,
    volatility=0.0,
    start_price=100.0,
    seed: int,
    start_date: dt.date = dt.date(2020, 1, 1),
) -> PriceSeries:
    """Generate a deterministic test series.

    ``trend``: price[t] = p0 * (1 + drift)^t, ignoring volatility.
    ``geometric-random-walk`` (alias ``gbm``):
    price[t+1] = price[t] * (1 + drift) * exp(volatility * z_t) with z_t
    standard normal, reproducible for a fixed seed.

    drift/volatility/start_price are scalars or per-ticker sequences.
    """
    if days < 2:
        raise ValueError(f"days must be >= 2, got {days}")
    if tickers < 1:
        raise ValueError(f"tickers must be >= 1, got {tickers}")
    mu = _per_ticker(drift, tickers, "drift")
    sigma = _per_ticker(volatility, tickers, "volatility")
    p0 = _per_ticker(start_price, tickers, "start_price")
    if np.any(p0 <= 0.0):
        raise ValueError("start_price must be positive")
    if np.any(mu <= -1.0):
        raise ValueError("drift must be > -1")
    if np.any(sigma < 0.0):
        raise ValueError("volatility must be >= 0")

    if kind == "trend":
        steps = np.arange(days, dtype=np.float64)[:, None]
        prices = p0[None, :] * (1.0 + mu[None, :]) ** steps
    elif kind in ("geometric-random-walk", "gbm"):
        rng = np.random.default_rng(seed)
        shocks = rng.standard_normal((days - 1, tickers))
        factors = (1.0 + mu[None, :]) * np.exp(sigma[None, :] * shocks)
        prices = np.vstack([np.ones((1, tickers)), np.cumprod(factors, axis=0)]) * p0[None, :]
    else:
        raise ValueError(f"unknown generator kind {kind!r}")

    dates = tuple(start_date + dt.timedelta(days=t) for t in range(days))
    names = tuple(f"S{i}" for i in range(tickers))
    return PriceSeries(dates, names, prices)


def daily_returns(series: PriceSeries) -> ReturnMatrix:
    """Simple day-over-day returns of every ticker."""
    if series.num_days < 2:
        raise ValueError("need at least 2 dates to compute returns")
    prices = series.prices
    return ReturnMatrix(prices[1:] / prices[:-1] - 1.0)


def concat_series(first: PriceSeries, second: PriceSeries) -> PriceSeries:
    """Concatenate two contiguous series over the same tickers."""
    if first.tickers != second.tickers:
        raise ValueError("cannot concatenate series with different tickers")
    if first.dates[-1] >= second.dates[0]:
        raise ValueError("series to concatenate must be in strictly increasing date order")
    return PriceSeries(
        first.dates + second.dates,
        first.tickers,
        np.vstack([first.prices, second.prices]),
    )
