"""Fully connected Q-network with hand-rolled backprop and Adam.

Five rectified hidden layers (512, 512, 512, 256, 128 for the production
agents) and a linear output head sized to the action space. All math is
64-bit so gradient checks against central finite differences are sharp
and repeated runs are bit-identical. The loss is mean squared error over
the taken-action outputs only; the other outputs receive zero gradient.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

HIDDEN_DIMS_DEFAULT = (512, 512, 512, 256, 128)

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class NetworkSpec:
    """Layer widths: input, hidden stack, output."""

    input_dim: int
    output_dim: int
    hidden_dims: tuple[int, ...] = HIDDEN_DIMS_DEFAULT

    def __post_init__(self) -> None:
        dims = (self.input_dim, *self.hidden_dims, self.output_dim)
        if any(int(d) != d or d <= 0 for d in dims):
            raise ValueError(f"all layer widths must be positive integers: {dims}")

    @property
    def dims(self) -> tuple[int, ...]:
        return (self.input_dim, *self.hidden_dims, self.output_dim)

    @classmethod
    def for_agent(cls, kind: str) -> "NetworkSpec":
        """Production geometry: 192->4 for turn control, 48->20 for
        duration control (four approach encodings vs one, and one output
        per selectable approach vs per duration offset)."""
        if kind == "turn":
            return cls(192, 4)
        if kind == "time":
            return cls(48, 20)
        raise ValueError(f"unknown agent kind {kind!r}")


@dataclass
class NetworkParams:
    spec: NetworkSpec
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def copy(self) -> "NetworkParams":
        return NetworkParams(self.spec, [w.copy() for w in self.weights],
                             [b.copy() for b in self.biases])

    def flat_size(self) -> int:
        return sum(w.size for w in self.weights) + sum(b.size for b in self.biases)


def init_params(spec: NetworkSpec, rng: np.random.Generator) -> NetworkParams:
    """Fan-in-scaled zero-mean uniform weights, zero biases."""
    weights, biases = [], []
    dims = spec.dims
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        limit = np.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return NetworkParams(spec, weights, biases)


def zero_params(spec: NetworkSpec) -> NetworkParams:
    dims = spec.dims
    weights = [np.zeros((i, o)) for i, o in zip(dims[:-1], dims[1:])]
    biases = [np.zeros(o) for o in dims[1:]]
    return NetworkParams(spec, weights, biases)


def forward(params: NetworkParams, x: np.ndarray) -> np.ndarray:
    """Q-values for one input vector or a batch (rows)."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    h = x[None, :] if single else x
    if h.shape[1] != params.spec.input_dim:
        raise ValueError(f"input width {h.shape[1]} != {params.spec.input_dim}")
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        h = h @ w + b
        if i < last:
            np.maximum(h, 0.0, out=h)
    return h[0] if single else h


@dataclass
class Gradients:
    weights: list[np.ndarray]
    biases: list[np.ndarray]


def loss_and_grad(params: NetworkParams, inputs: np.ndarray,
                  actions: np.ndarray, targets: np.ndarray) -> tuple[float, Gradients]:
    """MSE over taken-action outputs and its exact parameter gradients."""
    X = np.asarray(inputs, dtype=np.float64)
    acts = np.asarray(actions, dtype=np.int64)
    y = np.asarray(targets, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != acts.shape[0] or acts.shape != y.shape:
        raise ValueError("batch shapes disagree")
    if acts.size and (acts.min() < 0 or acts.max() >= params.spec.output_dim):
        raise ValueError("action index out of range")

    last = len(params.weights) - 1
    hs = [X]
    pres = []
    h = X
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        p = h @ w + b
        if i < last:
            h = np.maximum(p, 0.0)
            pres.append(p)
            hs.append(h)
        else:
            q = p
    batch = X.shape[0]
    rows = np.arange(batch)
    err = q[rows, acts] - y
    loss = float(np.mean(err * err))

    dq = np.zeros_like(q)
    dq[rows, acts] = 2.0 * err / batch
    g_w: list[np.ndarray] = [np.empty(0)] * len(params.weights)
    g_b: list[np.ndarray] = [np.empty(0)] * len(params.biases)
    delta = dq
    for i in range(last, -1, -1):
        g_w[i] = hs[i].T @ delta
        g_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ params.weights[i].T) * (pres[i - 1] > 0.0)
    return loss, Gradients(g_w, g_b)


def batch_loss(params: NetworkParams, inputs: np.ndarray,
               actions: np.ndarray, targets: np.ndarray) -> float:
    """Loss only (used by the finite-difference oracle)."""
    q = forward(params, np.asarray(inputs, dtype=np.float64))
    rows = np.arange(q.shape[0])
    err = q[rows, np.asarray(actions, dtype=np.int64)] - np.asarray(targets, dtype=np.float64)
    return float(np.mean(err * err))


def _loss_and_pattern(params: NetworkParams, X: np.ndarray, acts: np.ndarray,
                      y: np.ndarray) -> tuple[float, tuple[bytes, ...]]:
    """Loss plus the rectifier on/off pattern (kink detection)."""
    h = X
    last = len(params.weights) - 1
    pattern = []
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        p = h @ w + b
        if i < last:
            pattern.append((p > 0.0).tobytes())
            h = np.maximum(p, 0.0)
        else:
            q = p
    rows = np.arange(X.shape[0])
    err = q[rows, acts] - y
    return float(np.mean(err * err)), tuple(pattern)


@dataclass
class AdamState:
    """Per-parameter first/second moment accumulators and step count."""

    m_w: list[np.ndarray]
    v_w: list[np.ndarray]
    m_b: list[np.ndarray]
    v_b: list[np.ndarray]
    step: int = 0
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    eps: float = ADAM_EPS

    @classmethod
    def for_params(cls, params: NetworkParams) -> "AdamState":
        return cls([np.zeros_like(w) for w in params.weights],
                   [np.zeros_like(w) for w in params.weights],
                   [np.zeros_like(b) for b in params.biases],
                   [np.zeros_like(b) for b in params.biases])


def adam_step(params: NetworkParams, grads: Gradients, state: AdamState,
              lr: float) -> tuple[NetworkParams, AdamState]:
    """One bias-corrected Adam update. Mutates ``params`` and ``state`` in
    place (single-owner training loop) and returns them."""
    state.step += 1
    b1, b2, eps = state.beta1, state.beta2, state.eps
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for tensors, gs, ms, vs in ((params.weights, grads.weights, state.m_w, state.v_w),
                                (params.biases, grads.biases, state.m_b, state.v_b)):
        for t, g, m, v in zip(tensors, gs, ms, vs):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * (g * g)
            t -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return params, state


def relative_error(a: float, n: float, floor: float = 1e-8) -> float:
    """|a - n| / max(|a|, |n|, floor); 0 when both sides are below the floor."""
    return abs(a - n) / max(abs(a), abs(n), floor)


def gradient_check(params: NetworkParams, inputs: np.ndarray, actions: np.ndarray,
                   targets: np.ndarray, perturbation: float = 1e-5,
                   max_checks_per_array: int | None = None,
                   rng: np.random.Generator | None = None,
                   analytic: Gradients | None = None) -> float:
    """Worst relative error between analytic and central-difference grads.

    The deviation of each checked entry is normalized by the largest
    analytic-gradient magnitude of its tensor (1e-8 floor): within one
    rectifier region the loss is quadratic per parameter, so the central
    difference is exact up to forward-pass rounding, and that rounding
    must be compared against the gradient's scale rather than against
    individual near-zero entries.

    Checks every parameter unless ``max_checks_per_array`` caps the number
    of sampled entries per tensor (for production-size networks). A
    parameter whose perturbation flips a rectifier on/off is skipped: the
    loss is not differentiable across the kink, so a central difference
    says nothing there. ``analytic`` overrides the computed gradients,
    which lets tests verify the harness flags corrupted values.
    """
    if perturbation <= 0:
        raise ValueError("perturbation must be positive")
    X = np.asarray(inputs, dtype=np.float64)
    acts = np.asarray(actions, dtype=np.int64)
    y = np.asarray(targets, dtype=np.float64)
    if analytic is None:
        _, analytic = loss_and_grad(params, X, acts, y)
    worst = 0.0
    for tensors, grads in ((params.weights, analytic.weights),
                           (params.biases, analytic.biases)):
        for t, g in zip(tensors, grads):
            flat_t = t.reshape(-1)
            flat_g = g.reshape(-1)
            scale = max(float(np.abs(flat_g).max(initial=0.0)), 1e-8)
            idx = np.arange(flat_t.size)
            if max_checks_per_array is not None and flat_t.size > max_checks_per_array:
                gen = rng if rng is not None else np.random.default_rng(0)
                idx = gen.choice(flat_t.size, size=max_checks_per_array, replace=False)
            for k in idx:
                orig = flat_t[k]
                flat_t[k] = orig + perturbation
                up, pat_up = _loss_and_pattern(params, X, acts, y)
                flat_t[k] = orig - perturbation
                down, pat_down = _loss_and_pattern(params, X, acts, y)
                flat_t[k] = orig
                if pat_up != pat_down:
                    continue
                numeric = (up - down) / (2.0 * perturbation)
                err = abs(float(flat_g[k]) - numeric) / scale
                if err > worst:
                    worst = err
    return worst
