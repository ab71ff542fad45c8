"""Dense multilayer perceptrons with hand-rolled analytic backpropagation.

Everything is float64. ``forward`` accepts a single observation (1-D input)
or a batch (2-D, one row per sample). ``backward`` returns exact gradients of
``sum_i g_i . f(x_i)`` for caller-supplied output cotangents ``g`` -- with
respect to every weight, every bias, and the input itself. The input
gradient is what lets a policy network be trained through a frozen value
network.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError

HIDDEN_ACTIVATIONS = ("relu", "tanh")
OUTPUT_ACTIVATIONS = ("identity", "tanh")


@dataclass
class Mlp:
    layer_sizes: tuple[int, ...]
    weights: list[np.ndarray]  # per layer, shape (fan_out, fan_in)
    biases: list[np.ndarray]  # per layer, shape (fan_out,)
    hidden_activation: str
    output_activation: str

    def copy(self) -> "Mlp":
        return Mlp(
            self.layer_sizes,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.hidden_activation,
            self.output_activation,
        )

    @property
    def in_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def out_dim(self) -> int:
        return self.layer_sizes[-1]


@dataclass
class Tape:
    """Per-layer activations cached by forward() for the backward pass."""

    acts: list[np.ndarray]  # acts[0] is the input batch; acts[l+1] = layer l output
    zs: list[np.ndarray]  # pre-activation of each layer
    squeeze: bool  # True when forward() was called with a 1-D input


@dataclass
class GradientSet:
    d_weights: list[np.ndarray]
    d_biases: list[np.ndarray]
    d_input: np.ndarray


@dataclass
class OptimizerState:
    """Adaptive-moment (Adam) accumulators for one network."""

    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m_weights: list[np.ndarray] = field(default_factory=list)
    v_weights: list[np.ndarray] = field(default_factory=list)
    m_biases: list[np.ndarray] = field(default_factory=list)
    v_biases: list[np.ndarray] = field(default_factory=list)


def init_mlp(
    layer_sizes,
    hidden_activation: str = "relu",
    output_activation: str = "identity",
    rng: int | np.random.Generator = 0,
) -> Mlp:
    """Glorot-uniform weights, zero biases, deterministic per seed."""
    sizes = tuple(int(s) for s in layer_sizes)
    if len(sizes) < 2 or any(s < 1 for s in sizes):
        raise ValueError(f"need >= 2 layer sizes, all >= 1, got {sizes}")
    if hidden_activation not in HIDDEN_ACTIVATIONS:
        raise ValueError(f"hidden_activation must be one of {HIDDEN_ACTIVATIONS}")
    if output_activation not in OUTPUT_ACTIVATIONS:
        raise ValueError(f"output_activation must be one of {OUTPUT_ACTIVATIONS}")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes, sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return Mlp(sizes, weights, biases, hidden_activation, output_activation)


def _activate(name: str, z: np.ndarray) -> np.ndarray:
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "tanh":
        return np.tanh(z)
    return z  # identity


def _activate_grad(name: str, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    if name == "relu":
        return (z > 0.0).astype(np.float64)
    if name == "tanh":
        return 1.0 - a * a
    return np.ones_like(z)


def forward(net: Mlp, x: np.ndarray) -> tuple[np.ndarray, Tape]:
    """Evaluate the network; the returned tape feeds backward()."""
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    batch = np.atleast_2d(x)
    if batch.shape[1] != net.in_dim:
        raise ValueError(f"input width {batch.shape[1]} != first layer width {net.in_dim}")
    acts, zs = [batch], []
    last = len(net.weights) - 1
    for l, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = acts[-1] @ w.T + b
        name = net.output_activation if l == last else net.hidden_activation
        zs.append(z)
        acts.append(_activate(name, z))
    out = acts[-1]
    return (out[0] if squeeze else out), Tape(acts, zs, squeeze)


def backward(net: Mlp, tape: Tape, output_grad: np.ndarray) -> GradientSet:
    """Exact gradients of sum_i output_grad[i] . output[i] from a forward tape."""
    g = np.atleast_2d(np.asarray(output_grad, dtype=np.float64))
    if len(tape.acts) != len(net.weights) + 1 or g.shape != tape.acts[-1].shape:
        raise ValueError("tape/output_grad do not match this network's forward pass")
    last = len(net.weights) - 1
    d_weights = [None] * len(net.weights)
    d_biases = [None] * len(net.weights)
    delta = g
    for l in range(last, -1, -1):
        name = net.output_activation if l == last else net.hidden_activation
        delta = delta * _activate_grad(name, tape.zs[l], tape.acts[l + 1])
        d_weights[l] = delta.T @ tape.acts[l]
        d_biases[l] = delta.sum(axis=0)
        delta = delta @ net.weights[l]
    d_input = delta[0] if tape.squeeze else delta
    return GradientSet(d_weights, d_biases, d_input)


def adam_init(net: Mlp, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> OptimizerState:
    return OptimizerState(
        lr=lr,
        beta1=beta1,
        beta2=beta2,
        eps=eps,
        m_weights=[np.zeros_like(w) for w in net.weights],
        v_weights=[np.zeros_like(w) for w in net.weights],
        m_biases=[np.zeros_like(b) for b in net.biases],
        v_biases=[np.zeros_like(b) for b in net.biases],
    )


def optimizer_step(net: Mlp, grads: GradientSet, opt: OptimizerState) -> tuple[Mlp, OptimizerState]:
    """One in-place adaptive-moment descent step; rejects non-finite gradients."""
    for g in (*grads.d_weights, *grads.d_biases):
        if not np.all(np.isfinite(g)):
            raise NumericError("non-finite gradient entries")
    opt.step += 1
    bc1 = 1.0 - opt.beta1**opt.step
    bc2 = 1.0 - opt.beta2**opt.step

    def update(param, grad, m, v):
        m *= opt.beta1
        m += (1.0 - opt.beta1) * grad
        v *= opt.beta2
        v += (1.0 - opt.beta2) * grad * grad
        param -= opt.lr * (m / bc1) / (np.sqrt(v / bc2) + opt.eps)

    for w, gw, m, v in zip(net.weights, grads.d_weights, opt.m_weights, opt.v_weights):
        update(w, gw, m, v)
    for b, gb, m, v in zip(net.biases, grads.d_biases, opt.m_biases, opt.v_biases):
        update(b, gb, m, v)
    return net, opt


def soft_update(target: Mlp, source: Mlp, tau: float) -> Mlp:
    """Blend target parameters toward source: target <- tau*source + (1-tau)*target.

    Implemented as target += tau*(source - target), which makes
    target == source a bit-exact fixed point for any tau.
    """
    if target.layer_sizes != source.layer_sizes:
        raise ValueError("target and source architectures differ")
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must lie in [0, 1], got {tau}")
    if tau == 0.0:
        return target
    for dst, src in zip((*target.weights, *target.biases), (*source.weights, *source.biases)):
        if tau == 1.0:
            dst[...] = src
        else:
            dst += tau * (src - dst)
    return target


@dataclass
class GradCheckReport:
    max_rel_err: float
    passed: bool
    probes: int = 0
    skipped: int = 0  # probes whose +/-h window crossed a relu kink


def grad_check(
    net: Mlp,
    x: np.ndarray,
    output_grad: np.ndarray,
    h: float = 1e-5,
    tol: float = 1e-4,
    grads: GradientSet | None = None,
) -> GradCheckReport:
    """Compare analytic gradients against central finite differences.

    Checks every weight, every bias, and every input entry of the scalar
    g(theta, x) = sum(output_grad * f(x)). Relative error uses
    |a - n| / max(|a|, |n|, 1e-8). ``grads`` defaults to backward()'s output.

    A probe whose +/-h window flips a relu unit's sign is skipped: the
    objective is not differentiable on that interval, so the central
    difference there estimates nothing.
    """
    if h <= 0.0:
        raise ValueError("finite-difference step h must be positive")
    x = np.asarray(x, dtype=np.float64)
    g = np.asarray(output_grad, dtype=np.float64)
    if grads is None:
        out, tape = forward(net, x)
        grads = backward(net, tape, g)
    relu = net.hidden_activation == "relu"

    def objective() -> tuple[float, list[np.ndarray] | None]:
        out, tape = forward(net, x)
        mask = [z > 0.0 for z in tape.zs[:-1]] if relu else None
        return float(np.sum(g * out)), mask

    max_rel = 0.0
    probes = 0
    skipped = 0

    def probe(array, analytic):
        nonlocal max_rel, probes, skipped
        flat, aflat = array.reshape(-1), np.asarray(analytic, dtype=np.float64).reshape(-1)
        for i in range(flat.size):
            probes += 1
            orig = flat[i]
            flat[i] = orig + h
            up, up_mask = objective()
            flat[i] = orig - h
            down, down_mask = objective()
            flat[i] = orig
            if relu and any(not np.array_equal(a, b) for a, b in zip(up_mask, down_mask)):
                skipped += 1
                continue
            numeric = (up - down) / (2.0 * h)
            rel = abs(aflat[i] - numeric) / max(abs(aflat[i]), abs(numeric), 1e-8)
            max_rel = max(max_rel, rel)

    for w, gw in zip(net.weights, grads.d_weights):
        probe(w, gw)
    for b, gb in zip(net.biases, grads.d_biases):
        probe(b, gb)
    probe(x, grads.d_input)
    return GradCheckReport(max_rel_err=max_rel, passed=max_rel < tol, probes=probes, skipped=skipped)


CHECKPOINT_VERSION = 1


def mlp_to_dict(net: Mlp) -> dict:
    """JSON-ready snapshot; float repr round-trips bit-exactly."""
    return {
        "version": CHECKPOINT_VERSION,
        "layer_sizes": list(net.layer_sizes),
        "hidden_activation": net.hidden_activation,
        "output_activation": net.output_activation,
        "weights": [w.tolist() for w in net.weights],
        "biases": [b.tolist() for b in net.biases],
    }


def mlp_from_dict(data: dict) -> Mlp:
    if data.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported network checkpoint version {data.get('version')!r}")
    net = Mlp(
        layer_sizes=tuple(data["layer_sizes"]),
        weights=[np.array(w, dtype=np.float64) for w in data["weights"]],
        biases=[np.array(b, dtype=np.float64) for b in data["biases"]],
        hidden_activation=data["hidden_activation"],
        output_activation=data["output_activation"],
    )
    for w, b, fan_in, fan_out in zip(net.weights, net.biases, net.layer_sizes, net.layer_sizes[1:]):
        if w.shape != (fan_out, fan_in) or b.shape != (fan_out,):
            raise ValueError("checkpoint parameter shapes do not match layer_sizes")
    return net


def optimizer_to_dict(opt: OptimizerState) -> dict:
    return {
        "lr": opt.lr,
        "beta1": opt.beta1,
        "beta2": opt.beta2,
        "eps": opt.eps,
        "step": opt.step,
        "m_weights": [m.tolist() for m in opt.m_weights],
        "v_weights": [v.tolist() for v in opt.v_weights],
        "m_biases": [m.tolist() for m in opt.m_biases],
        "v_biases": [v.tolist() for v in opt.v_biases],
    }


def optimizer_from_dict(data: dict) -> OptimizerState:
    return OptimizerState(
        lr=data["lr"],
        beta1=data["beta1"],
        beta2=data["beta2"],
        eps=data["eps"],
        step=data["step"],
        m_weights=[np.array(m, dtype=np.float64) for m in data["m_weights"]],
        v_weights=[np.array(v, dtype=np.float64) for v in data["v_weights"]],
        m_biases=[np.array(m, dtype=np.float64) for m in data["m_biases"]],
        v_biases=[np.array(v, dtype=np.float64) for v in data["v_biases"]],
    )


def copy_mlp(net: Mlp) -> Mlp:
    return copy.deepcopy(net)
