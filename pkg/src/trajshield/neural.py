"""Small float64 neural substrate with hand-written backward passes.

Only the pieces the trajectory GAN and the TUL classifier need: dense
layers, a masked LSTM, three loss primitives, Adam and a finite-difference
gradient checker. Every layer caches what its backward pass needs on the
last ``forward`` call, so one forward must precede each backward.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

PROB_CLAMP = 1e-7
ACTIVATIONS = ("none", "relu", "tanh", "sigmoid", "softmax")


class ShapeError(ValueError):
    """Raised when tensor shapes do not conform."""


class TrainingError(RuntimeError):
    """Raised when optimisation hits a non-finite value."""


@dataclass
class Parameter:
    """A trainable tensor with its gradient and Adam moments."""

    name: str
    value: np.ndarray
    grad: np.ndarray = field(init=False)
    adam_m: np.ndarray = field(init=False)
    adam_v: np.ndarray = field(init=False)
    step_count: int = 0

    def __post_init__(self):
        self.value = np.asarray(self.value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)
        self.adam_m = np.zeros_like(self.value)
        self.adam_v = np.zeros_like(self.value)

    @property
    def shape(self):
        return self.value.shape

    def zero_grad(self):
        self.grad.fill(0.0)


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int, shape=None) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape or (fan_in, fan_out))


# ---------------------------------------------------------------- activations

def sigmoid(z):
    # tanh form is overflow-free and avoids boolean indexing
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def softmax(z, axis=-1):
    shifted = z - z.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def activate(z, activation: str):
    if activation == "none":
        return z
    if activation == "relu":
        return np.maximum(z, 0.0)
    if activation == "tanh":
        return np.tanh(z)
    if activation == "sigmoid":
        return sigmoid(z)
    if activation == "softmax":
        return softmax(z)
    raise ValueError(f"unknown activation {activation!r}; expected one of {ACTIVATIONS}")


def activation_backward(dy, y, z, activation: str):
    """Gradient w.r.t. pre-activation ``z`` given output ``y`` and ``dL/dy``."""
    if activation == "none":
        return dy
    if activation == "relu":
        return dy * (z > 0)
    if activation == "tanh":
        return dy * (1.0 - y * y)
    if activation == "sigmoid":
        return dy * y * (1.0 - y)
    if activation == "softmax":
        return y * (dy - np.sum(dy * y, axis=-1, keepdims=True))
    raise ValueError(f"unknown activation {activation!r}")


# ---------------------------------------------------------------------- dense

def dense_forward(x, w: Parameter, b: Parameter, activation: str = "none"):
    """``act(x @ w + b)`` for a 2-D batch ``x``."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or w.value.ndim != 2 or x.shape[1] != w.shape[0] or b.shape != (w.shape[1],):
        raise ShapeError(f"dense: x{x.shape} w{w.shape} b{b.shape} do not conform")
    return activate(x @ w.value + b.value, activation)


class Dense:
    """Fully connected layer acting on the last axis of its input."""

    def __init__(self, name: str, n_in: int, n_out: int, activation: str = "none",
                 rng: np.random.Generator | None = None):
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}; expected one of {ACTIVATIONS}")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.activation = activation
        self.w = Parameter(f"{name}.w", glorot_uniform(rng, n_in, n_out))
        self.b = Parameter(f"{name}.b", np.zeros(n_out))
        self._cache = None

    @property
    def n_in(self):
        return self.w.shape[0]

    @property
    def n_out(self):
        return self.w.shape[1]

    def parameters(self):
        return [self.w, self.b]

    def forward(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.n_in:
            raise ShapeError(f"{self.w.name}: expected last axis {self.n_in}, got {x.shape}")
        lead = x.shape[:-1]
        x2 = x.reshape(-1, self.n_in)
        z = x2 @ self.w.value + self.b.value
        y = activate(z, self.activation)
        self._cache = (x2, z, y, lead)
        return y.reshape(*lead, self.n_out)

    def backward(self, dy):
        x2, z, y, lead = self._cache
        dz = activation_backward(np.asarray(dy).reshape(-1, self.n_out), y, z, self.activation)
        self.w.grad += x2.T @ dz
        self.b.grad += dz.sum(axis=0)
        return (dz @ self.w.value.T).reshape(*lead, self.n_in)


# ----------------------------------------------------------------------- LSTM

@dataclass
class LstmState:
    hidden: np.ndarray
    cell: np.ndarray

    @classmethod
    def zeros(cls, batch: int, units: int):
        return cls(np.zeros((batch, units)), np.zeros((batch, units)))


class LSTM:
    """Standard LSTM (gate order i, f, o, g) with per-step masking.

    Where ``mask[b, t] == 0`` the step is skipped: the state is carried
    through unchanged and the many-to-many output is zero.
    """

    def __init__(self, name: str, n_in: int, units: int = 100,
                 rng: np.random.Generator | None = None):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.units = units
        self.n_in = n_in
        self.w_x = Parameter(f"{name}.w_x", glorot_uniform(rng, n_in, 4 * units))
        self.w_h = Parameter(f"{name}.w_h", glorot_uniform(rng, units, 4 * units))
        bias = np.zeros(4 * units)
        bias[units:2 * units] = 1.0  # forget gate
        self.b = Parameter(f"{name}.b", bias)
        self._cache = None

    def parameters(self):
        return [self.w_x, self.w_h, self.b]

    def _cell(self, a, state: LstmState, m_t):
        u = self.units
        gates = sigmoid(a[:, :3 * u])
        i, f, o = gates[:, :u], gates[:, u:2 * u], gates[:, 2 * u:]
        g = np.tanh(a[:, 3 * u:])
        c_new = f * state.cell + i * g
        tc = np.tanh(c_new)
        out = m_t * (o * tc)
        h = out + (1.0 - m_t) * state.hidden
        c = m_t * c_new + (1.0 - m_t) * state.cell
        return out, LstmState(h, c), (i, f, o, g, tc)

    def step(self, x_t, state: LstmState, m_t=None):
        """One recurrence step; returns (output, new_state)."""
        x_t = np.asarray(x_t, dtype=np.float64)
        if x_t.ndim != 2 or x_t.shape[1] != self.n_in or state.hidden.shape != (x_t.shape[0], self.units):
            raise ShapeError(f"lstm step: x{x_t.shape} h{state.hidden.shape} vs in={self.n_in} units={self.units}")
        if m_t is None:
            m_t = np.ones((x_t.shape[0], 1))
        a = x_t @ self.w_x.value + state.hidden @ self.w_h.value + self.b.value
        out, new_state, _ = self._cell(a, state, m_t)
        return out, new_state

    def forward(self, seq, mask, mode: str = "many_to_many", initial: LstmState | None = None):
        seq = np.asarray(seq, dtype=np.float64)
        if seq.ndim != 3 or seq.shape[2] != self.n_in:
            raise ShapeError(f"lstm: expected batch x T x {self.n_in}, got {seq.shape}")
        mask = np.asarray(mask, dtype=np.float64)
        if mask.shape != seq.shape[:2]:
            raise ShapeError(f"lstm: mask {mask.shape} does not match sequence {seq.shape[:2]}")
        if np.any(mask.sum(axis=1) == 0):
            raise ValueError("lstm: a sequence has an all-zero mask (empty trajectory)")
        if mode not in ("many_to_many", "many_to_one"):
            raise ValueError(f"unknown LSTM mode {mode!r}")
        batch, steps, _ = seq.shape
        u = self.units
        state = initial or LstmState.zeros(batch, u)
        # input projections for every step at once
        xw = (seq.reshape(-1, self.n_in) @ self.w_x.value).reshape(batch, steps, 4 * u) + self.b.value
        outs = np.zeros((batch, steps, u))
        h_prev = np.zeros((steps, batch, u))
        c_prev = np.zeros((steps, batch, u))
        acts = []
        wh = self.w_h.value
        for t in range(steps):
            h_prev[t], c_prev[t] = state.hidden, state.cell
            a = xw[:, t, :] + state.hidden @ wh
            out, state, act = self._cell(a, state, mask[:, t:t + 1])
            outs[:, t, :] = out
            acts.append(act)
        self._cache = (seq, mask, h_prev, c_prev, acts, mode)
        if mode == "many_to_one":
            return state.hidden
        return outs

    def backward(self, dout):
        seq, mask, h_prev, c_prev, acts, mode = self._cache
        batch, steps, _ = seq.shape
        u = self.units
        da_all = np.zeros((steps, batch, 4 * u))
        dh = np.array(dout, dtype=np.float64) if mode == "many_to_one" else np.zeros((batch, u))
        dc = np.zeros((batch, u))
        wh_t = self.w_h.value.T
        for t in range(steps - 1, -1, -1):
            i, f, o, g, tc = acts[t]
            m = mask[:, t:t + 1]
            dh_t = dh + dout[:, t, :] if mode == "many_to_many" else dh
            # masked steps pass gradients straight to the previous state
            dh_new = m * dh_t
            dc_new = m * dc + dh_new * o * (1.0 - tc * tc)
            da = da_all[t]
            da[:, :u] = dc_new * g * i * (1.0 - i)
            da[:, u:2 * u] = dc_new * c_prev[t] * f * (1.0 - f)
            da[:, 2 * u:3 * u] = dh_new * tc * o * (1.0 - o)
            da[:, 3 * u:] = dc_new * i * (1.0 - g * g)
            dh = da @ wh_t + (1.0 - m) * dh_t
            dc = dc_new * f + (1.0 - m) * dc
        flat_da = da_all.transpose(1, 0, 2).reshape(-1, 4 * u)
        self.w_x.grad += seq.reshape(-1, self.n_in).T @ flat_da
        self.w_h.grad += h_prev.transpose(1, 0, 2).reshape(-1, u).T @ flat_da
        self.b.grad += flat_da.sum(axis=0)
        return (flat_da @ self.w_x.value.T).reshape(batch, steps, self.n_in)


def lstm_step(x_t, state: LstmState, params: LSTM):
    return params.step(x_t, state)


def lstm_sequence(seq, mask, params: LSTM, mode: str = "many_to_many"):
    return params.forward(seq, mask, mode)


# --------------------------------------------------------------------- losses

def _clamp(p):
    return np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)


def _in_range(p):
    return (p >= PROB_CLAMP) & (p <= 1.0 - PROB_CLAMP)


def loss_bce(y_true, y_pred) -> float:
    y = np.asarray(y_true, dtype=np.float64).ravel()
    p = _clamp(np.asarray(y_pred, dtype=np.float64).ravel())
    return float(np.mean(-(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))))


def loss_bce_grad(y_true, y_pred):
    y_pred = np.asarray(y_pred, dtype=np.float64)
    y = np.asarray(y_true, dtype=np.float64).reshape(y_pred.shape)
    p = _clamp(y_pred)
    g = (-(y / p) + (1.0 - y) / (1.0 - p)) / y_pred.size
    return g * _in_range(y_pred)


def _mask_denominator(mask):
    n = float(np.sum(mask))
    if n == 0:
        raise ValueError("loss over an all-zero mask")
    return n


def loss_sce(true_onehot, pred_probs, mask) -> float:
    """Masked mean over real slots of ``-sum_k y_k log p_k``."""
    y = np.asarray(true_onehot, dtype=np.float64)
    p = _clamp(np.asarray(pred_probs, dtype=np.float64))
    m = np.asarray(mask, dtype=np.float64)
    per_slot = -np.sum(y * np.log(p), axis=-1)
    return float(np.sum(per_slot * m) / _mask_denominator(m))


def loss_sce_grad(true_onehot, pred_probs, mask):
    y = np.asarray(true_onehot, dtype=np.float64)
    pred = np.asarray(pred_probs, dtype=np.float64)
    m = np.asarray(mask, dtype=np.float64)
    g = -y / _clamp(pred) * _in_range(pred)
    return g * m[..., None] / _mask_denominator(m)


def loss_l2_spatial(true_dev, pred_dev, mask) -> float:
    """Masked mean of squared Euclidean error per slot."""
    d = np.asarray(pred_dev, dtype=np.float64) - np.asarray(true_dev, dtype=np.float64)
    m = np.asarray(mask, dtype=np.float64)
    return float(np.sum(np.sum(d * d, axis=-1) * m) / _mask_denominator(m))


def loss_l2_spatial_grad(true_dev, pred_dev, mask):
    d = np.asarray(pred_dev, dtype=np.float64) - np.asarray(true_dev, dtype=np.float64)
    m = np.asarray(mask, dtype=np.float64)
    return 2.0 * d * m[..., None] / _mask_denominator(m)


# ---------------------------------------------------------------- optimiser

def adam_update(p: Parameter, lr: float, beta1: float = 0.9, beta2: float = 0.999,
                eps: float = 1e-8) -> Parameter:
    if not np.all(np.isfinite(p.grad)):
        raise TrainingError(f"non-finite gradient in parameter {p.name}")
    p.step_count += 1
    t = p.step_count
    p.adam_m = beta1 * p.adam_m + (1.0 - beta1) * p.grad
    p.adam_v = beta2 * p.adam_v + (1.0 - beta2) * p.grad * p.grad
    m_hat = p.adam_m / (1.0 - beta1 ** t)
    v_hat = p.adam_v / (1.0 - beta2 ** t)
    p.value = p.value - lr * m_hat / (np.sqrt(v_hat) + eps)
    p.zero_grad()
    return p


class Adam:
    def __init__(self, params: Iterable[Parameter], lr: float = 0.001,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()

    def step(self):
        for p in self.params:
            adam_update(p, self.lr, self.beta1, self.beta2, self.eps)


# ------------------------------------------------------------ gradient check

def finite_difference_check(loss_fn: Callable[[], float], params: Sequence[Parameter],
                            epsilon: float = 1e-5, max_coords: int | None = None,
                            rng: np.random.Generator | None = None) -> float:
    """Max relative error between ``p.grad`` and central differences.

    ``loss_fn`` takes no arguments and reads parameter values in place;
    analytic gradients must already sit in ``p.grad``. With ``max_coords``
    set, a random subsample of that many coordinates is checked.
    """
    coords = [(p, idx) for p in params for idx in np.ndindex(p.shape)]
    if max_coords is not None and len(coords) > max_coords:
        rng = rng if rng is not None else np.random.default_rng(0)
        pick = rng.choice(len(coords), size=max_coords, replace=False)
        coords = [coords[i] for i in sorted(pick)]
    worst = 0.0
    for p, idx in coords:
        orig = p.value[idx]
        p.value[idx] = orig + epsilon
        up = loss_fn()
        p.value[idx] = orig - epsilon
        down = loss_fn()
        p.value[idx] = orig
        numeric = (up - down) / (2.0 * epsilon)
        analytic = p.grad[idx]
        rel = abs(analytic - numeric) / max(1e-8, abs(analytic) + abs(numeric))
        worst = max(worst, rel)
    return worst
