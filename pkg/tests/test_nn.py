import json

import numpy as np
import pytest

from ddpgtrader import nn
from ddpgtrader.errors import NumericError


def linear_net(w=2.0, b=1.0):
    """One input, one identity output: f(x) = w*x + b."""
    return nn.Mlp((1, 1), [np.array([[w]])], [np.array([b])], "relu", "identity")


class TestInit:
    def test_glorot_bounds_and_zero_biases(self):
        net = nn.init_mlp((7, 5, 3), "relu", "tanh", rng=0)
        for w, fan_in, fan_out in zip(net.weights, (7, 5), (5, 3)):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            assert w.shape == (fan_out, fan_in)
            assert np.all(np.abs(w) <= limit)
        assert all(np.all(b == 0.0) for b in net.biases)

    def test_deterministic_per_seed(self):
        a = nn.init_mlp((4, 3), rng=5)
        b = nn.init_mlp((4, 3), rng=5)
        c = nn.init_mlp((4, 3), rng=6)
        assert np.array_equal(a.weights[0], b.weights[0])
        assert not np.array_equal(a.weights[0], c.weights[0])

    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            nn.init_mlp((4,))
        with pytest.raises(ValueError):
            nn.init_mlp((4, 0))
        with pytest.raises(ValueError):
            nn.init_mlp((4, 3), hidden_activation="swish")
        with pytest.raises(ValueError):
            nn.init_mlp((4, 3), output_activation="relu")


class TestForward:
    def test_linear_hand_example(self):
        out, _ = nn.forward(linear_net(), np.array([3.0]))
        assert out.shape == (1,)
        assert out[0] == 7.0

    def test_batch_rows_match_single_calls(self):
        net = nn.init_mlp((3, 6, 2), "tanh", "tanh", rng=1)
        x = np.random.default_rng(2).normal(size=(5, 3))
        batch, _ = nn.forward(net, x)
        for i in range(5):
            single, _ = nn.forward(net, x[i])
            assert np.allclose(batch[i], single, rtol=0, atol=1e-15)

    def test_relu_and_tanh_ranges(self):
        net = nn.init_mlp((4, 16, 3), "relu", "tanh", rng=3)
        out, tape = nn.forward(net, np.random.default_rng(4).normal(size=(10, 4)) * 5)
        assert np.all(np.abs(out) <= 1.0)
        assert np.all(tape.acts[1] >= 0.0)  # relu layer output

    def test_width_mismatch(self):
        with pytest.raises(ValueError):
            nn.forward(linear_net(), np.array([1.0, 2.0]))


class TestBackward:
    def test_linear_hand_gradients(self):
        # d/dw (w*x+b) = x = 3, d/db = 1, d/dx = w = 2
        net = linear_net()
        out, tape = nn.forward(net, np.array([3.0]))
        g = nn.backward(net, tape, np.array([1.0]))
        assert g.d_weights[0][0, 0] == 3.0
        assert g.d_biases[0][0] == 1.0
        assert g.d_input[0] == 2.0

    def test_batch_gradient_is_sum_of_singles(self):
        net = nn.init_mlp((2, 4, 1), "tanh", "identity", rng=7)
        xs = np.array([[0.3, -1.2], [2.0, 0.5]])
        _, tape = nn.forward(net, xs)
        batch = nn.backward(net, tape, np.array([[1.0], [1.0]]))
        singles = []
        for x in xs:
            _, t = nn.forward(net, x)
            singles.append(nn.backward(net, t, np.array([1.0])))
        for layer in range(2):
            summed = singles[0].d_weights[layer] + singles[1].d_weights[layer]
            assert np.allclose(batch.d_weights[layer], summed, rtol=1e-12, atol=1e-15)

    def test_tape_mismatch_rejected(self):
        net = nn.init_mlp((2, 3), rng=0)
        _, tape = nn.forward(net, np.array([1.0, 2.0]))
        with pytest.raises(ValueError):
            nn.backward(net, tape, np.array([1.0, 2.0, 3.0, 4.0]))


class TestGradCheck:
    def test_random_architectures_pass(self):
        # analytic vs central finite differences at h=1e-5, tol 1e-4
        rng = np.random.default_rng(13)
        for _ in range(15):
            depth = int(rng.integers(0, 4))
            sizes = [int(rng.integers(1, 9)) for _ in range(depth + 2)]
            hidden = ("relu", "tanh")[int(rng.integers(0, 2))]
            out_act = ("identity", "tanh")[int(rng.integers(0, 2))]
            net = nn.init_mlp(sizes, hidden, out_act, rng=int(rng.integers(0, 2**31)))
            x = rng.normal(size=sizes[0])
            g = rng.normal(size=sizes[-1])
            report = nn.grad_check(net, x, g)
            assert report.passed, f"max_rel_err {report.max_rel_err} on {sizes}"

    def test_batched_input_supported(self):
        net = nn.init_mlp((3, 5, 2), "relu", "identity", rng=21)
        rng = np.random.default_rng(22)
        report = nn.grad_check(net, rng.normal(size=(4, 3)), rng.normal(size=(4, 2)))
        assert report.passed

    def test_detects_broken_gradients(self):
        # corrupt one weight gradient; the finite-difference route must disagree
        net = nn.init_mlp((3, 4, 2), "tanh", "identity", rng=9)
        x = np.random.default_rng(10).normal(size=3)
        g = np.ones(2)
        _, tape = nn.forward(net, x)
        grads = nn.backward(net, tape, g)
        grads.d_weights[0][0, 0] += 0.5
        report = nn.grad_check(net, x, g, grads=grads)
        assert not report.passed


class TestAdam:
    def test_first_step_magnitude(self):
        # bias-corrected first step is lr * g / (|g| + eps), essentially lr*sign(g)
        net = linear_net(w=0.0, b=0.0)
        opt = nn.adam_init(net, lr=0.01)
        grads = nn.GradientSet([np.array([[2.0]])], [np.array([-0.5])], np.zeros(1))
        nn.optimizer_step(net, grads, opt)
        assert abs(net.weights[0][0, 0] + 0.01) < 1e-9
        assert abs(net.biases[0][0] - 0.01) < 1e-9

    def test_minimizes_a_quadratic(self):
        # descend f(w) = (w-3)^2 through the optimizer interface
        net = linear_net(w=0.0, b=0.0)
        opt = nn.adam_init(net, lr=0.05)
        for _ in range(600):
            w = net.weights[0][0, 0]
            grads = nn.GradientSet([np.array([[2.0 * (w - 3.0)]])], [np.zeros(1)], np.zeros(1))
            nn.optimizer_step(net, grads, opt)
        assert abs(net.weights[0][0, 0] - 3.0) < 1e-3

    def test_zero_lr_freezes_parameters(self):
        net = nn.init_mlp((2, 3), rng=1)
        before = [w.copy() for w in net.weights]
        opt = nn.adam_init(net, lr=0.0)
        grads = nn.GradientSet([np.ones_like(w) for w in net.weights], [np.ones_like(b) for b in net.biases], np.zeros(2))
        nn.optimizer_step(net, grads, opt)
        assert all(np.array_equal(a, b) for a, b in zip(before, net.weights))

    def test_rejects_non_finite_gradients(self):
        net = linear_net()
        opt = nn.adam_init(net, lr=0.01)
        grads = nn.GradientSet([np.array([[np.nan]])], [np.zeros(1)], np.zeros(1))
        with pytest.raises(NumericError):
            nn.optimizer_step(net, grads, opt)


class TestSoftUpdate:
    def test_hand_blend(self):
        # 0 + 0.1 * (10 - 0) = 1
        dst = linear_net(w=0.0, b=0.0)
        src = linear_net(w=10.0, b=10.0)
        nn.soft_update(dst, src, 0.1)
        assert dst.weights[0][0, 0] == 1.0
        assert dst.biases[0][0] == 1.0

    def test_tau_one_copies_exactly(self):
        dst, src = nn.init_mlp((3, 4), rng=1), nn.init_mlp((3, 4), rng=2)
        nn.soft_update(dst, src, 1.0)
        assert np.array_equal(dst.weights[0], src.weights[0])

    def test_tau_zero_is_identity(self):
        dst, src = nn.init_mlp((3, 4), rng=1), nn.init_mlp((3, 4), rng=2)
        before = dst.weights[0].copy()
        nn.soft_update(dst, src, 0.0)
        assert np.array_equal(dst.weights[0], before)

    def test_equal_networks_are_a_bit_exact_fixed_point(self):
        src = nn.init_mlp((4, 6, 2), rng=3)
        dst = src.copy()
        for _ in range(200):
            nn.soft_update(dst, src, 0.001)
        assert all(np.array_equal(d, s) for d, s in zip(dst.weights, src.weights))
        assert all(np.array_equal(d, s) for d, s in zip(dst.biases, src.biases))

    def test_repeated_updates_contract_geometrically(self):
        src = nn.init_mlp((5, 4, 3), "relu", "tanh", rng=8)
        dst = src.copy()
        for w in (*dst.weights, *dst.biases):
            w += 10.0
        gaps = [s - d for s, d in zip((*src.weights, *src.biases), (*dst.weights, *dst.biases))]
        for _ in range(50):
            nn.soft_update(dst, src, 0.05)
        shrink = 0.95**50
        for g0, s, d in zip(gaps, (*src.weights, *src.biases), (*dst.weights, *dst.biases)):
            expected = g0 * shrink
            assert np.all(np.abs((s - d) - expected) <= 1e-12 * np.abs(expected))

    def test_architecture_mismatch(self):
        with pytest.raises(ValueError):
            nn.soft_update(nn.init_mlp((2, 2), rng=0), nn.init_mlp((2, 3), rng=0), 0.5)
        with pytest.raises(ValueError):
            nn.soft_update(nn.init_mlp((2, 2), rng=0), nn.init_mlp((2, 2), rng=0), 1.5)


class TestSerialization:
    def test_network_round_trip_is_bit_exact(self):
        net = nn.init_mlp((4, 7, 2), "tanh", "tanh", rng=17)
        blob = json.dumps(nn.mlp_to_dict(net))
        back = nn.mlp_from_dict(json.loads(blob))
        assert back.layer_sizes == net.layer_sizes
        assert back.hidden_activation == net.hidden_activation
        assert back.output_activation == net.output_activation
        assert all(np.array_equal(a, b) for a, b in zip(back.weights, net.weights))

    def test_optimizer_round_trip(self):
        net = nn.init_mlp((2, 3), rng=1)
        opt = nn.adam_init(net, lr=0.01)
        grads = nn.GradientSet([np.ones_like(w) for w in net.weights], [np.ones_like(b) for b in net.biases], np.zeros(2))
        nn.optimizer_step(net, grads, opt)
        back = nn.optimizer_from_dict(json.loads(json.dumps(nn.optimizer_to_dict(opt))))
        assert back.step == opt.step
        assert all(np.array_equal(a, b) for a, b in zip(back.m_weights, opt.m_weights))
        assert all(np.array_equal(a, b) for a, b in zip(back.v_weights, opt.v_weights))

    def test_malformed_checkpoints_rejected(self):
        net = nn.init_mlp((3, 2), rng=0)
        data = nn.mlp_to_dict(net)
        data["version"] = 99
        with pytest.raises(ValueError):
            nn.mlp_from_dict(data)
        data = nn.mlp_to_dict(net)
        data["layer_sizes"] = [3, 5]
        with pytest.raises(ValueError):
            nn.mlp_from_dict(data)
