import numpy as np
import pytest

from ddpgtrader.env import (
    ObservationScaler,
    PortfolioState,
    TradeAction,
    clip_to_feasible,
    observe,
    portfolio_value,
    reset,
    step,
)

from conftest import make_series


def state(p, h, b, t=0):
    return PortfolioState(t=t, p=np.asarray(p, dtype=float), h=np.asarray(h, dtype=np.int64), b=float(b))


class TestStateBasics:
    def test_reset(self, two_asset_series):
        s = reset(two_asset_series, 1000.0)
        assert s.t == 0
        assert np.array_equal(s.p, [10.0, 20.0])
        assert np.array_equal(s.h, [0, 0])
        assert s.b == 1000.0
        assert portfolio_value(s) == 1000.0

    def test_portfolio_value_hand(self):
        # 3*10 + 5*20 + 20 cash = 150
        assert portfolio_value(state([10, 20], [3, 5], 20)) == 150.0

    def test_invalid_states_rejected(self):
        with pytest.raises(ValueError):
            state([10.0, -1.0], [0, 0], 10)
        with pytest.raises(ValueError):
            state([10.0], [-1], 10)
        with pytest.raises(ValueError):
            state([10.0], [0], -5)

    def test_state_arrays_read_only(self):
        s = state([10.0], [1], 5)
        with pytest.raises(ValueError):
            s.p[0] = 3.0
        with pytest.raises(ValueError):
            s.h[0] = 3

    def test_action_must_be_integral(self):
        assert np.array_equal(TradeAction(np.array([2.0, -3.0])).a, [2, -3])
        with pytest.raises(ValueError):
            TradeAction(np.array([0.5]))


class TestClipToFeasible:
    def test_sell_clamped_to_holdings_then_buy_from_proceeds(self):
        # sell 5 of A but own 3 -> sell 3; cash 20+30=50 covers the 2x20 buy
        s = state([10.0, 20.0], [3, 5], 20.0)
        out = clip_to_feasible(s, TradeAction(np.array([5, -2])))
        assert np.array_equal(out.a, [3, -2])

    def test_buy_clamped_by_cash(self):
        # want 5 of B at 20 with 50 cash -> floor(50/20) = 2
        s = state([10.0, 20.0], [0, 0], 50.0)
        out = clip_to_feasible(s, TradeAction(np.array([0, -5])))
        assert np.array_equal(out.a, [0, -2])

    def test_buys_fill_in_ascending_index_order(self):
        # 35 cash: 2 of A (20) leaves 15, not enough for B at 20
        s = state([10.0, 20.0], [0, 0], 35.0)
        out = clip_to_feasible(s, TradeAction(np.array([-2, -1])))
        assert np.array_equal(out.a, [-2, 0])

    def test_feasible_action_unchanged(self):
        s = state([10.0, 20.0], [3, 5], 100.0)
        req = TradeAction(np.array([1, -2]))
        assert np.array_equal(clip_to_feasible(s, req).a, [1, -2])

    def test_fuzz_feasibility_and_idempotence(self):
        rng = np.random.default_rng(11)
        for _ in range(300):
            d = int(rng.integers(1, 6))
            s = state(
                rng.uniform(0.5, 300.0, size=d),
                rng.integers(0, 50, size=d),
                float(rng.uniform(0.0, 5000.0)),
            )
            req = TradeAction(rng.integers(-40, 40, size=d))
            out = clip_to_feasible(s, req)
            # sells never exceed holdings, never flip sign, never grow
            assert np.all(out.a <= np.maximum(req.a, 0))
            assert np.all(out.a >= np.minimum(req.a, 0))
            assert np.all(s.h - out.a >= 0)
            assert s.b + float(s.p @ out.a) >= 0.0
            again = clip_to_feasible(s, out)
            assert np.array_equal(again.a, out.a)


class TestStep:
    def test_hand_example_reward_is_price_move_on_new_holdings(self):
        # sell 2 A, buy 1 B: h'=[1,6], b'=20+(20-20)=20
        # value 150 -> 11*1 + 19*6 + 20 = 145, reward -5
        s = state([10.0, 20.0], [3, 5], 20.0)
        nxt, reward = step(s, TradeAction(np.array([2, -1])), np.array([11.0, 19.0]))
        assert np.array_equal(nxt.h, [1, 6])
        assert nxt.b == 20.0
        assert nxt.t == 1
        assert reward == -5.0

    def test_reward_equals_value_delta_bitwise(self):
        rng = np.random.default_rng(23)
        for _ in range(200):
            d = int(rng.integers(1, 5))
            s = state(rng.uniform(1, 200, size=d), rng.integers(0, 30, size=d), float(rng.uniform(0, 2000)))
            req = TradeAction(rng.integers(-20, 20, size=d))
            act = clip_to_feasible(s, req)
            before = portfolio_value(s)
            nxt, reward = step(s, act, s.p * rng.uniform(0.9, 1.1, size=d))
            assert reward == portfolio_value(nxt) - before

    def test_trading_at_constant_prices_is_value_neutral(self):
        s = state([10.0, 20.0], [3, 5], 20.0)
        nxt, reward = step(s, TradeAction(np.array([2, -1])), np.array([10.0, 20.0]))
        assert reward == 0.0
        assert portfolio_value(nxt) == portfolio_value(s)

    def test_infeasible_action_raises(self):
        s = state([10.0], [1], 5.0)
        with pytest.raises(ValueError):
            step(s, TradeAction(np.array([2])), np.array([10.0]))  # oversell
        with pytest.raises(ValueError):
            step(s, TradeAction(np.array([-1])), np.array([10.0]))  # can't afford

    def test_next_prices_validated(self):
        s = state([10.0], [1], 5.0)
        with pytest.raises(ValueError):
            step(s, TradeAction(np.array([0])), np.array([-1.0]))
        with pytest.raises(ValueError):
            step(s, TradeAction(np.array([0])), np.array([1.0, 2.0]))

    def test_episode_rewards_telescope(self):
        rng = np.random.default_rng(5)
        prices = np.exp(rng.normal(0.001, 0.02, size=(40, 3)).cumsum(axis=0)) * 80
        series = make_series(prices)
        s = reset(series, 3000.0)
        total = 0.0
        for t in range(series.num_days - 1):
            act = clip_to_feasible(s, TradeAction(rng.integers(-15, 15, size=3)))
            s, reward = step(s, act, series.prices[t + 1])
            total += reward
        final = portfolio_value(s)
        assert abs(total - (final - 3000.0)) <= 1e-9 * max(1.0, abs(final))


class TestObserve:
    def test_identity_scaler_concatenates_state(self):
        s = state([10.0, 20.0], [3, 5], 20.0)
        obs = observe(s, ObservationScaler.identity(2))
        assert np.array_equal(obs, [10.0, 20.0, 3.0, 5.0, 20.0])

    def test_scaling_arithmetic(self):
        s = state([10.0, 20.0], [3, 5], 20.0)
        scaler = ObservationScaler(np.array([10.0, 10.0]), 10.0, 100.0)
        obs = observe(s, scaler)
        assert np.allclose(obs, [1.0, 2.0, 0.3, 0.5, 0.2], rtol=0, atol=1e-15)

    def test_from_training_uses_first_prices(self, two_asset_series):
        scaler = ObservationScaler.from_training(two_asset_series, 500.0, 100)
        assert np.array_equal(scaler.price_scale, [10.0, 20.0])
        assert scaler.holdings_scale == 100.0
        assert scaler.balance_scale == 500.0

    def test_dimension_mismatch(self):
        s = state([10.0], [1], 5.0)
        with pytest.raises(ValueError):
            observe(s, ObservationScaler.identity(2))
