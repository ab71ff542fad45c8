"""Stock-trading agent with an actor-critic learner, classic baselines,
backtest metrics, and a reproducible CLI pipeline."""

from .baselines import min_variance_weights, run_index, run_min_variance, sample_covariance, simplex_projection
from .ddpg import Agent, DdpgConfig, evaluate, load_checkpoint, map_action, save_checkpoint, train
from .env import ObservationScaler, PortfolioState, TradeAction, Transition, clip_to_feasible, observe, portfolio_value, reset, step
from .errors import ConfigError, DataError, NumericError, TraderError
from .marketdata import PeriodSplit, PriceSeries, daily_returns, load_price_table, split_periods, synthetic_series
from .metrics import BacktestReport, annualized_return, annualized_std, build_report, sharpe

__version__ = "0.1.0"

__all__ = [
    "Agent",
    "BacktestReport",
    "ConfigError",
    "DataError",
    "DdpgConfig",
    "NumericError",
    "ObservationScaler",
    "PeriodSplit",
    "PortfolioState",
    "PriceSeries",
    "TradeAction",
    "TraderError",
    "Transition",
    "annualized_return",
    "annualized_std",
    "build_report",
    "clip_to_feasible",
    "daily_returns",
    "evaluate",
    "load_checkpoint",
    "load_price_table",
    "map_action",
    "min_variance_weights",
    "observe",
    "portfolio_value",
    "reset",
    "run_index",
    "run_min_variance",
    "sample_covariance",
    "save_checkpoint",
    "sharpe",
    "simplex_projection",
    "split_periods",
    "step",
    "synthetic_series",
    "train",
]
