"""Stock-trading decision process: states, integer trades, cash accounting.

Sign convention (used consistently across the whole package): a positive
action entry SELLS that many shares, a negative entry BUYS. The balance
update is ``b' = b + p . a``, so selling increases cash and buying decreases
it. Holdings update as ``h' = h - a``. Short positions and negative balances
are never representable: requested trades are clipped to feasibility, never
rejected.

Reward of a step is the change of total portfolio value (holdings marked to
market plus cash) between consecutive days.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .marketdata import PriceSeries


def _frozen_array(obj, field: str, value: np.ndarray) -> None:
    value = value.copy()
    value.flags.writeable = False
    object.__setattr__(obj, field, value)


@dataclass(frozen=True)
class PortfolioState:
    """Market snapshot the agent acts on: prices, integer holdings, cash."""

    t: int
    p: np.ndarray  # (D,) prices, > 0
    h: np.ndarray  # (D,) share counts, >= 0, integer
    b: float  # cash balance, >= 0

    def __post_init__(self):
        p = np.asarray(self.p, dtype=np.float64)
        h = np.asarray(self.h)
        if p.ndim != 1 or h.shape != p.shape:
            raise ValueError(f"p and h must be 1-D with equal length, got {p.shape} and {h.shape}")
        if not np.all(np.isfinite(p)) or np.any(p <= 0.0):
            raise ValueError("prices must be strictly positive and finite")
        if not np.issubdtype(h.dtype, np.integer):
            if not np.all(h == np.floor(h)):
                raise ValueError("holdings must be integral")
        h = h.astype(np.int64)
        if np.any(h < 0):
            raise ValueError("holdings must be non-negative")
        if not np.isfinite(self.b) or self.b < 0.0:
            raise ValueError(f"balance must be finite and >= 0, got {self.b}")
        _frozen_array(self, "p", p)
        _frozen_array(self, "h", h)

    @property
    def num_assets(self) -> int:
        return len(self.p)


@dataclass(frozen=True)
class TradeAction:
    """Integer share vector; entry > 0 sells, < 0 buys, 0 holds."""

    a: np.ndarray  # (D,) int64

    def __post_init__(self):
        a = np.asarray(self.a)
        if a.ndim != 1:
            raise ValueError("action must be a 1-D vector")
        if not np.issubdtype(a.dtype, np.integer):
            if not np.all(np.isfinite(a)) or not np.all(a == np.floor(a)):
                raise ValueError("action entries must be integral")
        _frozen_array(self, "a", a.astype(np.int64))


@dataclass(frozen=True)
class Transition:
    """One stored step: observation, continuous agent action, reward, successor."""

    s: np.ndarray
    a: np.ndarray  # continuous action in [-1, 1]^D that produced the trade
    r: float
    s_next: np.ndarray
    terminal: bool

    def __post_init__(self):
        s = np.asarray(self.s, dtype=np.float64)
        s_next = np.asarray(self.s_next, dtype=np.float64)
        if s.shape != s_next.shape:
            raise ValueError(f"observation shapes differ: {s.shape} vs {s_next.shape}")
        if not np.isfinite(self.r):
            raise ValueError(f"reward must be finite, got {self.r}")
        _frozen_array(self, "s", s)
        _frozen_array(self, "a", np.asarray(self.a, dtype=np.float64))
        _frozen_array(self, "s_next", s_next)


@dataclass(frozen=True)
class ObservationScaler:
    """Fixed per-component scaling applied before observations reach a network."""

    price_scale: np.ndarray  # (D,) divisor per price entry
    holdings_scale: float
    balance_scale: float

    def __post_init__(self):
        scale = np.asarray(self.price_scale, dtype=np.float64)
        if scale.ndim != 1 or np.any(scale <= 0.0) or not np.all(np.isfinite(scale)):
            raise ValueError("price_scale must be a 1-D positive vector")
        if self.holdings_scale <= 0.0 or self.balance_scale <= 0.0:
            raise ValueError("holdings_scale and balance_scale must be positive")
        _frozen_array(self, "price_scale", scale)

    @classmethod
    def identity(cls, num_assets: int) -> "ObservationScaler":
        return cls(np.ones(num_assets), 1.0, 1.0)

    @classmethod
    def from_training(cls, series: PriceSeries, initial_balance: float, h_max: int) -> "ObservationScaler":
        """Scale prices by their first training value, holdings by the trade cap,
        and balance by the initial fund (falling back to 1 for a zero fund)."""
        balance_scale = float(initial_balance) if initial_balance > 0.0 else 1.0
        return cls(series.prices[0], float(h_max), balance_scale)

    @property
    def num_assets(self) -> int:
        return len(self.price_scale)


def reset(series: PriceSeries, initial_balance: float) -> PortfolioState:
    """Initial state: first-day prices, empty holdings, the starting fund."""
    if initial_balance < 0.0:
        raise ValueError(f"initial balance must be >= 0, got {initial_balance}")
    d = series.num_assets
    return PortfolioState(t=0, p=series.prices[0], h=np.zeros(d, dtype=np.int64), b=float(initial_balance))


def portfolio_value(state: PortfolioState) -> float:
    """Holdings marked to market plus cash: p.h + b."""
    return float(state.p @ state.h) + state.b


def clip_to_feasible(state: PortfolioState, requested: TradeAction) -> TradeAction:
    """Project a requested trade onto the feasible set.

    Sells are clamped to current holdings. Buys are then processed in
    ascending stock index against the cash available after all sells, each
    reduced to the largest affordable share count. Total function: infeasible
    requests are shrunk, never rejected, and the result always satisfies
    ``h - a >= 0`` and ``b + p . a >= 0``.
    """
    a = requested.a.copy()
    if a.shape != state.h.shape:
        raise ValueError(f"action length {a.shape} does not match {state.h.shape} assets")
    p, h = state.p, state.h

    selling = a > 0
    a[selling] = np.minimum(a[selling], h[selling])
    cash = state.b + float(p[selling] @ a[selling])

    for d in np.flatnonzero(a < 0):
        price = float(p[d])
        k = min(int(-a[d]), int(cash // price))
        # float floor-division can overshoot by one ulp; tighten to the ledger
        while k > 0 and k * price > cash:
            k -= 1
        a[d] = -k
        cash -= k * price

    # The aggregate balance update b + p.a may round differently from the
    # per-trade ledger above; shave marginal buys until both agree.
    while state.b + float(p @ a) < 0.0:
        buys = np.flatnonzero(a < 0)
        a[buys[-1]] += 1

    return TradeAction(a)


def step(state: PortfolioState, action: TradeAction, next_prices: np.ndarray) -> tuple[PortfolioState, float]:
    """Execute a feasible action, roll prices forward, return (state', reward).

    Accounting: h' = h - a and b' = b + p.a, both at today's prices; the new
    state carries tomorrow's prices. Reward is the resulting change of
    portfolio value. Infeasible actions indicate a caller bug and raise.
    """
    a = action.a
    next_prices = np.asarray(next_prices, dtype=np.float64)
    if a.shape != state.h.shape:
        raise ValueError("action length does not match state")
    if next_prices.shape != state.p.shape or np.any(next_prices <= 0.0) or not np.all(np.isfinite(next_prices)):
        raise ValueError("next_prices must be strictly positive, finite, and of matching length")

    new_h = state.h - a
    new_b = state.b + float(state.p @ a)
    if np.any(new_h < 0):
        raise ValueError("infeasible action: sells exceed holdings (run clip_to_feasible first)")
    if new_b < 0.0:
        raise ValueError("infeasible action: buys exceed available cash (run clip_to_feasible first)")

    new_state = PortfolioState(t=state.t + 1, p=next_prices, h=new_h, b=new_b)
    reward = portfolio_value(new_state) - portfolio_value(state)
    return new_state, reward


def observe(state: PortfolioState, scaler: ObservationScaler) -> np.ndarray:
    """Flatten a state into the 2D+1 network input: scaled [p, h, b]."""
    if scaler.num_assets != state.num_assets:
        raise ValueError(
            f"scaler is for {scaler.num_assets} assets but state has {state.num_assets}"
        )
    return np.concatenate([
        state.p / scaler.price_scale,
        state.h / scaler.holdings_scale,
        [state.b / scaler.balance_scale],
    ])
