"""Backtest performance metrics over a dated portfolio-value curve.

Conventions: geometric compounding over 252 trading days per year,
risk-free rate 0 by default. A zero-dispersion curve has no defined Sharpe
ratio; it is reported as None (JSON null), never as +/-infinity.
"""

from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass

import numpy as np

TRADING_DAYS_PER_YEAR = 252


@dataclass(frozen=True)
class BacktestReport:
    """One strategy's daily value curve plus its summary metrics."""

    strategy: str
    dates: tuple[dt.date, ...]
    values: np.ndarray  # (T,) portfolio value in currency
    initial_value: float
    final_value: float
    annualized_return: float
    annualized_std: float
    sharpe_ratio: float | None


def _as_curve(values, minimum: int) -> np.ndarray:
    curve = np.asarray(values, dtype=np.float64)
    if curve.ndim != 1 or len(curve) < minimum:
        raise ValueError(f"need a 1-D curve of >= {minimum} values, got shape {curve.shape}")
    if not np.all(np.isfinite(curve)):
        raise ValueError("curve contains non-finite values")
    return curve


def annualized_return(values, periods_per_year: int = TRADING_DAYS_PER_YEAR) -> float:
    """Geometric annual growth rate: (V_T/V_0)^(periods/(T-1)) - 1."""
    curve = _as_curve(values, 2)
    if np.any(curve <= 0.0):
        raise ValueError("curve values must be positive")
    growth = curve[-1] / curve[0]
    return float(growth ** (periods_per_year / (len(curve) - 1)) - 1.0)


def annualized_std(values, periods_per_year: int = TRADING_DAYS_PER_YEAR) -> float:
    """Sample standard deviation of simple daily returns, scaled to a year."""
    curve = _as_curve(values, 3)
    if np.any(curve[:-1] == 0.0):
        raise ValueError("curve values must be nonzero to form returns")
    rets = curve[1:] / curve[:-1] - 1.0
    return float(np.std(rets, ddof=1) * np.sqrt(periods_per_year))


def sharpe(annualized_return: float, annualized_std: float, risk_free: float = 0.0) -> float | None:
    """Excess return per unit risk; None when the curve had zero dispersion."""
    if annualized_std < 0.0:
        raise ValueError(f"annualized_std must be >= 0, got {annualized_std}")
    if annualized_std == 0.0:
        return None
    return (annualized_return - risk_free) / annualized_std


def build_report(
    strategy: str,
    dates,
    values,
    periods_per_year: int = TRADING_DAYS_PER_YEAR,
    risk_free: float = 0.0,
) -> BacktestReport:
    curve = _as_curve(values, 3)
    dates = tuple(dates)
    if len(dates) != len(curve):
        raise ValueError(f"{len(dates)} dates vs {len(curve)} values")
    ret = annualized_return(curve, periods_per_year)
    std = annualized_std(curve, periods_per_year)
    return BacktestReport(
        strategy=strategy,
        dates=dates,
        values=curve,
        initial_value=float(curve[0]),
        final_value=float(curve[-1]),
        annualized_return=ret,
        annualized_std=std,
        sharpe_ratio=sharpe(ret, std, risk_free),
    )


def report_to_dict(report: BacktestReport) -> dict:
    """Summary row ready for JSON; sharpe is null when undefined."""
    return {
        "strategy": report.strategy,
        "initial_value": report.initial_value,
        "final_value": report.final_value,
        "annualized_return": report.annualized_return,
        "annualized_std": report.annualized_std,
        "sharpe": report.sharpe_ratio,
    }


def curve_to_csv(report: BacktestReport, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", "value"])
        for date, value in zip(report.dates, report.values):
            writer.writerow([date.isoformat(), repr(float(value))])
