import datetime as dt

import numpy as np
import pytest

from ddpgtrader import nn
from ddpgtrader.marketdata import PriceSeries


def make_series(prices, start=dt.date(2021, 1, 4), tickers=None) -> PriceSeries:
    """Build a PriceSeries from a (T, D) array with consecutive dates."""
    prices = np.atleast_2d(np.asarray(prices, dtype=np.float64))
    dates = tuple(start + dt.timedelta(days=t) for t in range(prices.shape[0]))
    if tickers is None:
        tickers = tuple(f"S{i}" for i in range(prices.shape[1]))
    return PriceSeries(dates, tuple(tickers), prices)


def fd_probe(arrays, analytic, evaluate, h=1e-5, tol=1e-4):
    """Central finite differences against analytic gradients, entry by entry.

    ``evaluate`` returns (scalar, relu-mask tuple); probes whose +/-h window
    flips a relu unit are skipped because the scalar is not differentiable
    across that interval. Returns the worst relative error checked.
    """
    worst = 0.0
    checked = 0
    for arr, grad in zip(arrays, analytic):
        flat, gflat = arr.reshape(-1), grad.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up, up_mask = evaluate()
            flat[i] = orig - h
            down, down_mask = evaluate()
            flat[i] = orig
            if any(not np.array_equal(a, b) for a, b in zip(up_mask, down_mask)):
                continue
            numeric = (up - down) / (2.0 * h)
            worst = max(worst, abs(gflat[i] - numeric) / max(abs(gflat[i]), abs(numeric), 1e-8))
            checked += 1
    assert checked > 0
    assert worst < tol, f"finite differences disagree: {worst}"
    return worst


def relu_masks(net, x):
    """Sign pattern of every hidden pre-activation for the given input."""
    _, tape = nn.forward(net, x)
    return tuple(z > 0.0 for z in tape.zs[:-1])


@pytest.fixture
def two_asset_series():
    """4 days, 2 assets with easy round-number prices."""
    return make_series([[10.0, 20.0], [11.0, 19.0], [12.0, 21.0], [10.0, 22.0]])
