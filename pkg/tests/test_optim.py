import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from apical.activations import ALPHA_MIN
from apical.errors import DataError, DimensionError
from apical.optim import AdamState, adam_step, mse, sgd_step, softmax_cross_entropy
from apical.tensor import RngStream


def one_hot_rows(labels, k):
    out = np.zeros((len(labels), k))
    out[np.arange(len(labels)), labels] = 1
    return out


def test_uniform_logits_give_log_k():
    for k in (2, 5, 10):
        rep = softmax_cross_entropy(np.zeros((3, k)), one_hot_rows([0, 1, k - 1], k))
        assert rep.value == pytest.approx(math.log(k), abs=1e-12)


def test_confident_logits():
    rep = softmax_cross_entropy(np.array([[10.0, -10.0]]), np.array([[1.0, 0.0]]))
    assert rep.value == pytest.approx(math.log1p(math.exp(-20)), rel=1e-9)
    assert rep.value == pytest.approx(2.06e-9, rel=1e-2)
    assert np.all(np.abs(rep.grad_logits) < 1e-8)


def test_cross_entropy_grad_matches_finite_differences():
    rng = RngStream(3)
    logits = rng.uniform(-3, 3, (4, 3))
    targets = one_hot_rows([0, 2, 1, 2], 3)
    rep = softmax_cross_entropy(logits, targets)
    h = 1e-6
    num = np.zeros_like(logits)
    for i in np.ndindex(logits.shape):
        up, dn = logits.copy(), logits.copy()
        up[i] += h
        dn[i] -= h
        num[i] = (softmax_cross_entropy(up, targets).value - softmax_cross_entropy(dn, targets).value) / (2 * h)
    np.testing.assert_allclose(rep.grad_logits, num, rtol=1e-5, atol=1e-10)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10**6), st.floats(-50, 50))
def test_cross_entropy_row_properties(seed, shift):
    rng = RngStream(seed)
    logits = rng.uniform(-5, 5, (6, 4))
    targets = one_hot_rows(rng.integers(0, 4, 6), 4)
    rep = softmax_cross_entropy(logits, targets)
    assert np.all(np.abs(rep.grad_logits.sum(axis=1)) < 1e-12)
    assert softmax_cross_entropy(logits + shift, targets).value == pytest.approx(rep.value, abs=1e-9)


def test_cross_entropy_rejects_bad_targets():
    with pytest.raises(DataError):
        softmax_cross_entropy(np.zeros((2, 3)), np.array([[1, 1, 0], [0, 0, 1.0]]))
    with pytest.raises(DimensionError):
        softmax_cross_entropy(np.zeros((2, 3)), np.zeros((2, 2)))


def test_mse_gradient():
    y = np.array([[0.2], [0.9]])
    t = np.array([[0.0], [1.0]])
    rep = mse(y, t)
    assert rep.value == pytest.approx((0.04 + 0.01) / 2)
    np.testing.assert_allclose(rep.grad_logits, [[0.2], [-0.1]])


def test_adam_zero_grad_leaves_params():
    params = {"w": np.array([[1.0, -2.0]]), "a.alpha": np.asarray(0.5)}
    out, _ = adam_step(params, {k: np.zeros_like(v) for k, v in params.items()}, AdamState())
    for k in params:
        assert np.array_equal(out[k], params[k])


def test_adam_first_step_moves_by_lr():
    out, state = adam_step({"w": np.array([[0.0]])}, {"w": np.array([[1.0]])}, AdamState(lr=0.1))
    # m_hat = 1, v_hat = 1, so the step is lr / (1 + eps)
    assert out["w"][0, 0] == pytest.approx(-0.1, abs=1e-8)
    assert state.t == 1


def test_adam_minimizes_scalar_quadratic():
    params = {"w": np.array([[0.0]])}
    state = AdamState(lr=0.1)
    for _ in range(100):
        g = {"w": 2 * (params["w"] - 3)}
        params, state = adam_step(params, g, state)
    assert abs(params["w"][0, 0] - 3) < 0.1


def test_adam_reduces_random_quadratic_by_99_percent():
    rng = RngStream(17)
    A = rng.uniform(-1, 1, (8, 8))
    H = A @ A.T + 0.5 * np.eye(8)
    target = rng.uniform(-1, 1, (8, 1))

    def loss(w):
        d = w - target
        return (0.5 * d.T @ H @ d).item()

    params = {"w": np.zeros((8, 1))}
    start = loss(params["w"])
    state = AdamState(lr=0.05)
    for _ in range(500):
        params, state = adam_step(params, {"w": H @ (params["w"] - target)}, state)
    assert loss(params["w"]) <= 0.01 * start


def test_adam_clamps_alpha():
    params = {"0.apical.alpha": np.asarray(0.0011), "0.W": np.array([[0.0011]])}
    grads = {"0.apical.alpha": np.asarray(10.0), "0.W": np.array([[10.0]])}
    out, _ = adam_step(params, grads, AdamState(lr=1.0))
    assert float(out["0.apical.alpha"]) == ALPHA_MIN
    assert out["0.W"][0, 0] < 0


def test_adam_shape_mismatch():
    with pytest.raises(DimensionError):
        adam_step({"w": np.zeros((2, 2))}, {"w": np.zeros((1, 2))}, AdamState())


def test_sgd_step():
    p = {"w": np.array([[1.0]])}
    assert np.array_equal(sgd_step(p, {"w": np.array([[2.0]])}, 0.0)["w"], [[1.0]])
    assert sgd_step(p, {"w": np.array([[2.0]])}, 0.5)["w"][0, 0] == 0.0
    with pytest.raises(DimensionError):
        sgd_step(p, {"w": np.zeros((2, 1))}, 0.1)


def test_sgd_equals_adam_only_for_zero_grad():
    p = {"w": np.array([[1.0, 2.0]])}
    zero = {"w": np.zeros((1, 2))}
    assert np.array_equal(sgd_step(p, zero, 0.1)["w"], adam_step(p, zero, AdamState(lr=0.1))[0]["w"])
    g = {"w": np.array([[0.3, -4.0]])}
    assert not np.allclose(sgd_step(p, g, 0.1)["w"], adam_step(p, g, AdamState(lr=0.1))[0]["w"])
