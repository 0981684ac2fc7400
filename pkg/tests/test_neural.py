import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trajshield.neural import (LSTM, Dense, LstmState, Parameter, ShapeError, TrainingError,
                               adam_update, dense_forward, finite_difference_check, loss_bce,
                               loss_bce_grad, loss_l2_spatial, loss_l2_spatial_grad, loss_sce,
                               loss_sce_grad, lstm_sequence, lstm_step, softmax)


def _param(name, value):
    return Parameter(name, np.array(value, dtype=np.float64))


# ----------------------------------------------------------------------- dense

def test_dense_identity():
    x = np.random.default_rng(0).normal(size=(4, 3))
    y = dense_forward(x, _param("w", np.eye(3)), _param("b", np.zeros(3)), "none")
    assert np.array_equal(y, x)


def test_softmax_equal_logits():
    y = dense_forward(np.ones((1, 3)), _param("w", np.eye(3)), _param("b", np.zeros(3)), "softmax")
    assert np.allclose(y, 1 / 3, atol=1e-15)


def test_dense_matches_triple_loop():
    rng = np.random.default_rng(1)
    x, w, b = rng.normal(size=(3, 4)), rng.normal(size=(4, 5)), rng.normal(size=5)
    expected = np.zeros((3, 5))
    for i in range(3):
        for j in range(5):
            acc = b[j]
            for k in range(4):
                acc += x[i, k] * w[k, j]
            expected[i, j] = acc
    got = dense_forward(x, _param("w", w), _param("b", b), "none")
    assert np.max(np.abs(got - expected)) < 1e-12


def test_dense_shape_mismatch():
    with pytest.raises(ShapeError):
        dense_forward(np.ones((2, 3)), _param("w", np.ones((4, 2))), _param("b", np.zeros(2)))


@given(st.lists(st.floats(-50, 50), min_size=2, max_size=12))
def test_softmax_rows_sum_to_one(logits):
    p = softmax(np.array([logits]))
    assert abs(p.sum() - 1.0) < 1e-12
    assert np.all(p >= 0) and np.all(p <= 1)


def test_softmax_entries_strictly_inside_unit_interval():
    p = softmax(np.random.default_rng(2).normal(size=(50, 8)))
    assert np.all(p > 0) and np.all(p < 1)


# ------------------------------------------------------------------------ LSTM

def test_lstm_zero_weights_zero_state_stays_zero():
    lstm = LSTM("l", 3, 4)
    for p in lstm.parameters():
        p.value[...] = 0.0
    out, state = lstm_step(np.ones((2, 3)), LstmState.zeros(2, 4), lstm)
    assert np.all(out == 0) and np.all(state.hidden == 0) and np.all(state.cell == 0)


def test_lstm_single_unit_scalar_oracle():
    lstm = LSTM("l", 1, 1)
    # gate order i, f, o, g
    wx = np.array([[0.5, -0.3, 0.8, 1.2]])
    wh = np.array([[0.1, 0.2, -0.4, 0.7]])
    b = np.array([0.05, 1.0, -0.1, 0.2])
    lstm.w_x.value, lstm.w_h.value, lstm.b.value = wx, wh, b
    x, h0, c0 = 0.7, -0.2, 0.3

    def sig(z):
        return 1.0 / (1.0 + math.exp(-z))

    i = sig(0.5 * x + 0.1 * h0 + 0.05)
    f = sig(-0.3 * x + 0.2 * h0 + 1.0)
    o = sig(0.8 * x - 0.4 * h0 - 0.1)
    g = math.tanh(1.2 * x + 0.7 * h0 + 0.2)
    c = f * c0 + i * g
    h = o * math.tanh(c)

    out, state = lstm_step(np.array([[x]]), LstmState(np.array([[h0]]), np.array([[c0]])), lstm)
    assert abs(out[0, 0] - h) < 1e-14
    assert abs(state.cell[0, 0] - c) < 1e-14


def test_lstm_masked_step_passes_state_through():
    lstm = LSTM("l", 3, 4, np.random.default_rng(0))
    state = LstmState(np.full((1, 4), 0.3), np.full((1, 4), -0.2))
    out, new, = lstm.step(np.ones((1, 3)), state, np.zeros((1, 1)))
    assert np.all(out == 0)
    assert np.array_equal(new.hidden, state.hidden) and np.array_equal(new.cell, state.cell)


def test_lstm_single_step_sequence_equals_step():
    lstm = LSTM("l", 3, 5, np.random.default_rng(3))
    x = np.random.default_rng(4).normal(size=(2, 1, 3))
    out, _ = lstm_step(x[:, 0], LstmState.zeros(2, 5), lstm)
    m2m = lstm_sequence(x, np.ones((2, 1)), lstm, "many_to_many")
    m2o = lstm_sequence(x, np.ones((2, 1)), lstm, "many_to_one")
    assert np.allclose(m2m[:, 0], out, atol=1e-15, rtol=0)
    assert np.allclose(m2o, out, atol=1e-15, rtol=0)


def test_lstm_masked_inputs_do_not_matter():
    rng = np.random.default_rng(5)
    lstm = LSTM("l", 3, 4, rng)
    x = rng.normal(size=(2, 6, 3))
    mask = np.array([[0, 0, 1, 1, 1, 1], [0, 0, 0, 0, 1, 1]], dtype=float)
    base = lstm_sequence(x, mask, lstm)
    x2 = x + (1 - mask)[..., None] * rng.normal(size=x.shape) * 10
    assert np.array_equal(lstm_sequence(x2, mask, lstm), base)


def test_many_to_one_is_last_real_output_of_many_to_many():
    rng = np.random.default_rng(6)
    lstm = LSTM("l", 3, 4, rng)
    x = rng.normal(size=(3, 5, 3))
    mask = np.array([[0, 0, 1, 1, 1], [1, 1, 1, 1, 1], [0, 0, 0, 0, 1]], dtype=float)
    m2m = lstm_sequence(x, mask, lstm, "many_to_many")
    m2o = lstm_sequence(x, mask, lstm, "many_to_one")
    for b in range(3):
        last = np.nonzero(mask[b])[0][-1]
        assert np.array_equal(m2o[b], m2m[b, last])


def test_lstm_rejects_empty_row():
    lstm = LSTM("l", 2, 3)
    with pytest.raises(ValueError):
        lstm_sequence(np.zeros((1, 3, 2)), np.zeros((1, 3)), lstm)


# ---------------------------------------------------------------------- losses

def test_bce_values():
    assert loss_bce([1.0], [1 - 1e-7]) == pytest.approx(0.0, abs=2e-7)
    assert loss_bce([1.0], [0.5]) == pytest.approx(math.log(2), abs=1e-15)


def test_bce_matches_summation_oracle():
    rng = np.random.default_rng(7)
    y = rng.integers(0, 2, size=17).astype(float)
    p = rng.uniform(0.01, 0.99, size=17)
    total = 0.0
    for yi, pi in zip(y, p):
        total += -(yi * math.log(pi) + (1 - yi) * math.log(1 - pi))
    assert abs(loss_bce(y, p) - total / 17) < 1e-12


def test_sce_values():
    onehot = np.eye(7)[[2]][None]
    assert loss_sce(onehot, onehot, np.ones((1, 1))) == pytest.approx(0.0, abs=1e-6)
    uniform = np.full((1, 1, 7), 1 / 7)
    assert loss_sce(onehot, uniform, np.ones((1, 1))) == pytest.approx(math.log(7), abs=1e-12)


def test_sce_matches_direct_sum_oracle():
    rng = np.random.default_rng(8)
    B, T, K = 3, 5, 6
    y = np.eye(K)[rng.integers(0, K, size=(B, T))]
    p = softmax(rng.normal(size=(B, T, K)))
    mask = (rng.uniform(size=(B, T)) > 0.3).astype(float)
    mask[:, -1] = 1
    total, n = 0.0, 0
    for b in range(B):
        for t in range(T):
            if mask[b, t]:
                n += 1
                for k in range(K):
                    total -= y[b, t, k] * math.log(p[b, t, k])
    assert abs(loss_sce(y, p, mask) - total / n) < 1e-12


def test_l2_values_and_oracle():
    assert loss_l2_spatial(np.zeros((1, 1, 2)), np.zeros((1, 1, 2)), np.ones((1, 1))) == 0.0
    assert loss_l2_spatial(np.zeros((1, 1, 2)), np.array([[[0.3, 0.4]]]), np.ones((1, 1))) == pytest.approx(0.25, abs=1e-15)
    rng = np.random.default_rng(9)
    a, b = rng.normal(size=(2, 4, 2)), rng.normal(size=(2, 4, 2))
    mask = np.array([[0, 1, 1, 1], [0, 0, 1, 1]], dtype=float)
    total, n = 0.0, 0
    for i in range(2):
        for t in range(4):
            if mask[i, t]:
                n += 1
                total += (a[i, t, 0] - b[i, t, 0]) ** 2 + (a[i, t, 1] - b[i, t, 1]) ** 2
    assert abs(loss_l2_spatial(a, b, mask) - total / n) < 1e-12


# ------------------------------------------------------------------------ Adam

def test_adam_first_step_by_hand():
    p = _param("p", np.zeros(4))
    p.grad[...] = 1.0
    adam_update(p, lr=0.001)
    # m = 0.1, v = 0.001; m_hat = 1, v_hat = 1 -> step = lr * 1 / (1 + 1e-8)
    assert np.allclose(p.value, -0.001 / (1 + 1e-8), atol=1e-18, rtol=0)
    assert p.step_count == 1
    assert np.all(p.grad == 0)


def test_adam_zero_grad_no_change():
    p = _param("p", [1.0, -2.0])
    adam_update(p, lr=0.1)
    assert np.array_equal(p.value, [1.0, -2.0])


def test_adam_deterministic():
    a, b = _param("a", [0.5, 0.2]), _param("b", [0.5, 0.2])
    for p in (a, b):
        p.grad[...] = [0.3, -0.7]
        adam_update(p, 0.01)
    assert np.array_equal(a.value, b.value) and np.array_equal(a.adam_v, b.adam_v)


def test_adam_rejects_non_finite():
    p = _param("weights.x", [0.0])
    p.grad[0] = np.nan
    with pytest.raises(TrainingError, match="weights.x"):
        adam_update(p, 0.01)


# ------------------------------------------------------------ gradient checks

def test_fd_check_quadratic():
    theta = _param("theta", np.random.default_rng(10).normal(size=6))

    def loss():
        return 0.5 * float(np.sum(theta.value ** 2))

    theta.grad[...] = theta.value
    assert finite_difference_check(loss, [theta]) < 1e-9


def _away_from_kinks(layer, x):
    """Shift biases so no ReLU pre-activation sits within 1e-3 of zero."""
    z = x.reshape(-1, layer.n_in) @ layer.w.value + layer.b.value
    near = np.abs(z) < 1e-3
    while near.any():
        layer.b.value += 2e-3
        z = x.reshape(-1, layer.n_in) @ layer.w.value + layer.b.value
        near = np.abs(z) < 1e-3


@pytest.mark.parametrize("activation", ["none", "relu", "tanh", "sigmoid", "softmax"])
def test_dense_gradients(activation):
    rng = np.random.default_rng(11)
    layer = Dense("d", 4, 3, activation, rng)
    layer.b.value = rng.normal(size=3)
    x = rng.normal(size=(5, 4))
    if activation == "relu":
        _away_from_kinks(layer, x)
    target = rng.normal(size=(5, 3))

    def loss():
        return float(np.sum(layer.forward(x) * target))

    loss()
    layer.backward(target)
    assert finite_difference_check(loss, layer.parameters()) < 1e-5


def test_dense_relu_sce_stack_gradients():
    rng = np.random.default_rng(12)
    hidden = Dense("h", 5, 6, "relu", rng)
    out = Dense("o", 6, 4, "softmax", rng)
    x = rng.normal(size=(3, 2, 5))
    _away_from_kinks(hidden, x)
    y = np.eye(4)[rng.integers(0, 4, size=(3, 2))]
    mask = np.array([[1, 1], [0, 1], [1, 1]], dtype=float)

    def loss():
        return loss_sce(y, out.forward(hidden.forward(x)), mask)

    p = out.forward(hidden.forward(x))
    hidden.backward(out.backward(loss_sce_grad(y, p, mask)))
    assert finite_difference_check(loss, hidden.parameters() + out.parameters()) < 1e-5


@pytest.mark.parametrize("mode", ["many_to_many", "many_to_one"])
def test_lstm_gradients(mode):
    rng = np.random.default_rng(13)
    lstm = LSTM("l", 3, 4, rng)
    x = rng.normal(size=(2, 5, 3))
    mask = np.array([[0, 0, 1, 1, 1], [1, 1, 1, 1, 1]], dtype=float)
    shape = (2, 5, 4) if mode == "many_to_many" else (2, 4)
    target = rng.normal(size=shape)

    def loss():
        return float(np.sum(lstm.forward(x, mask, mode) * target))

    loss()
    dx = lstm.backward(target)
    assert finite_difference_check(loss, lstm.parameters()) < 1e-5
    # input gradient, checked coordinate-wise
    eps = 1e-6
    for idx in [(0, 3, 1), (1, 0, 2), (1, 4, 0)]:
        xp, xm = x.copy(), x.copy()
        xp[idx] += eps
        xm[idx] -= eps
        num = (np.sum(lstm.forward(xp, mask, mode) * target) - np.sum(lstm.forward(xm, mask, mode) * target)) / (2 * eps)
        assert abs(num - dx[idx]) < 1e-6 * max(1.0, abs(num))
    assert np.all(dx[0, :2] == 0)


def test_loss_primitive_gradients():
    rng = np.random.default_rng(14)
    z = _param("z", rng.normal(size=(2, 3, 4)))
    d = _param("d", rng.normal(size=(2, 3, 2)))
    s = _param("s", rng.uniform(0.1, 0.9, size=5))
    y = np.eye(4)[rng.integers(0, 4, size=(2, 3))]
    true_dev = rng.normal(size=(2, 3, 2))
    labels = rng.integers(0, 2, size=5).astype(float)
    mask = np.array([[0, 1, 1], [1, 1, 1]], dtype=float)

    def loss():
        return (loss_sce(y, softmax(z.value), mask) + loss_l2_spatial(true_dev, d.value, mask)
                + loss_bce(labels, s.value))

    p = softmax(z.value)
    gp = loss_sce_grad(y, p, mask)
    z.grad[...] = p * (gp - np.sum(gp * p, axis=-1, keepdims=True))
    d.grad[...] = loss_l2_spatial_grad(true_dev, d.value, mask)
    s.grad[...] = loss_bce_grad(labels, s.value)
    assert finite_difference_check(loss, [z, d, s]) < 1e-6


def test_fd_check_subsample():
    rng = np.random.default_rng(15)
    theta = _param("theta", rng.normal(size=(30, 30)))
    theta.grad[...] = 3 * theta.value ** 2

    def loss():
        return float(np.sum(theta.value ** 3))

    assert finite_difference_check(loss, [theta], max_coords=200, rng=rng) < 1e-5
