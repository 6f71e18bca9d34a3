import numpy as np
import pytest

from apical.activations import ActivationSpec, Kind
from apical.errors import DimensionError, FormatError
from apical.gradcheck import PYRAMIDAL_COMBOS, check_layer, compare, layer_gradients, make_layer
from apical.layers import (
    DenseLayer,
    PyramidalLayer,
    dense_backward,
    dense_forward,
    init_glorot,
    load_layers,
    pyramidal_backward,
    pyramidal_forward,
    save_layers,
)
from apical.tensor import RngStream

XOR_X = np.array([[0.0, 0], [0, 1], [1, 0], [1, 1]])
ADA11 = ActivationSpec(Kind.ADA, alpha=1, c=1)


def test_dense_forward_xor_construction():
    layer = DenseLayer(np.array([[5.0], [5.0]]), np.array([[-4.0]]), ADA11)
    y, _ = dense_forward(layer, XOR_X)
    np.testing.assert_allclose(y, [[0], [1], [1], [6 * np.exp(-5)]], atol=1e-12)


def test_dense_identity_passthrough():
    x = RngStream(3).uniform(-1, 1, (5, 3))
    layer = DenseLayer(np.eye(3), np.zeros((1, 3)), ActivationSpec(Kind.IDENTITY))
    assert np.array_equal(dense_forward(layer, x)[0], x)


def test_dense_relu_hand_example():
    layer = DenseLayer(np.array([[1.0], [1.0]]), np.zeros((1, 1)), ActivationSpec(Kind.RELU))
    y, (_, pre) = dense_forward(layer, np.array([[-1.0, -2.0]]))
    assert pre[0, 0] == -3.0
    assert y[0, 0] == 0.0


def test_dense_shape_errors():
    layer = DenseLayer.create(3, 2, ActivationSpec(Kind.RELU), RngStream(0))
    with pytest.raises(DimensionError):
        dense_forward(layer, np.ones((4, 2)))
    _, cache = dense_forward(layer, np.ones((4, 3)))
    with pytest.raises(DimensionError):
        dense_backward(layer, cache, np.ones((4, 3)))


def test_dense_zero_upstream_gives_zero_grads():
    layer = make_layer("dense", ActivationSpec(Kind.ADA, alpha=0.5, alpha_learnable=True), RngStream(1))
    x = RngStream(2).uniform(-1, 1, (3, 4))
    _, cache = dense_forward(layer, x)
    grads, dX = dense_backward(layer, cache, np.zeros((3, 3)))
    assert all(np.all(g == 0) for g in grads.values())
    assert np.all(dX == 0)
    assert set(grads) == {"W", "b", "act.alpha"}


def test_dense_identity_weight_grad_closed_form():
    layer = DenseLayer.create(3, 2, ActivationSpec(Kind.IDENTITY), RngStream(0))
    x = np.array([[0.5, -1.0, 2.0]])
    dY = np.array([[1.5, -0.5]])
    _, cache = dense_forward(layer, x)
    grads, dX = dense_backward(layer, cache, dY)
    assert np.array_equal(grads["W"], x.T @ dY)
    assert np.array_equal(grads["b"], dY)
    np.testing.assert_allclose(dX, dY @ layer.W.T)


@pytest.mark.parametrize("kind", list(Kind))
def test_dense_backward_matches_finite_differences(kind):
    res = check_layer("dense", kind, RngStream(10), min_points=100)
    assert res.n_checked >= 100
    assert res.passed, res


def test_dense_3x4_layer_full_check():
    spec = ActivationSpec(Kind.LEAKY_ADA, alpha=0.8, c=1, l=0.01, alpha_learnable=True)
    layer = make_layer("dense", spec, RngStream(5))
    x = RngStream(6).uniform(-2, 2, (3, 4))
    dY = RngStream(7).uniform(-1, 1, (3, 3))
    analytic, numeric = layer_gradients(layer, x, dY)
    for name in analytic:
        rel, ab = compare(analytic[name], numeric[name])
        assert rel < 1e-4 and ab < 1e-7, name


# -- pyramidal ---------------------------------------------------------------


def test_pyramidal_xor_with_zeroed_basal_branch():
    layer = PyramidalLayer(
        np.zeros((2, 1)), np.zeros((1, 1)), ActivationSpec(Kind.RELU),
        np.array([[5.0], [5.0]]), np.array([[-4.0]]), ADA11,
    )
    y, _ = pyramidal_forward(layer, XOR_X)
    np.testing.assert_allclose(y, [[0], [1], [1], [0.040427682]], atol=1e-9)


def test_pyramidal_with_zeroed_apical_relu_equals_dense_relu():
    rng = RngStream(4)
    W = rng.uniform(-1, 1, (3, 2))
    b = rng.uniform(-1, 1, (1, 2))
    relu = ActivationSpec(Kind.RELU)
    pyr = PyramidalLayer(W, b, relu, np.zeros((3, 2)), np.zeros((1, 2)), relu)
    dense = DenseLayer(W, b, relu)
    x = rng.uniform(-2, 2, (6, 3))
    assert np.array_equal(pyr.forward(x)[0], dense.forward(x)[0])


def test_pyramidal_is_sum_of_branches():
    rng = RngStream(8)
    basal = ActivationSpec(Kind.LEAKY_RELU, l=0.01)
    apical = ActivationSpec(Kind.ADA, alpha=0.4, c=1)
    layer = PyramidalLayer.create(3, 2, basal, apical, rng)
    layer.b_basal = rng.uniform(-1, 1, (1, 2))
    layer.b_apical = rng.uniform(-1, 1, (1, 2))
    x = rng.child(9).uniform(-1, 1, (2, 3))
    expected = (
        DenseLayer(layer.W_basal, layer.b_basal, basal).forward(x)[0]
        + DenseLayer(layer.W_apical, layer.b_apical, apical).forward(x)[0]
    )
    np.testing.assert_allclose(pyramidal_forward(layer, x)[0], expected, rtol=1e-15)


def test_pyramidal_identical_relu_branches_double_dense():
    rng = RngStream(12)
    W, b = rng.uniform(-1, 1, (4, 3)), rng.uniform(-1, 1, (1, 3))
    relu = ActivationSpec(Kind.RELU)
    pyr = PyramidalLayer(W, b, relu, W.copy(), b.copy(), relu)
    x = rng.uniform(-1, 1, (5, 4))
    np.testing.assert_allclose(pyr.forward(x)[0], 2 * DenseLayer(W, b, relu).forward(x)[0])


@pytest.mark.parametrize("basal,apical", PYRAMIDAL_COMBOS)
@pytest.mark.parametrize("seed", [0, 1])
def test_pyramidal_backward_matches_finite_differences(basal, apical, seed):
    res = check_layer("pyramidal", apical, RngStream(seed), min_points=100, basal_kind=basal)
    assert res.passed, res


def test_pyramidal_grad_keys_and_zero_upstream():
    apical = ActivationSpec(Kind.ADA, alpha=1, c=0, alpha_learnable=True)
    layer = PyramidalLayer.create(4, 3, ActivationSpec(Kind.RELU), apical, RngStream(0))
    x = RngStream(1).uniform(-1, 1, (2, 4))
    _, cache = pyramidal_forward(layer, x)
    grads, dX = pyramidal_backward(layer, cache, np.zeros((2, 3)))
    assert set(grads) == {"W_basal", "b_basal", "W_apical", "b_apical", "apical.alpha"}
    assert all(np.all(g == 0) for g in grads.values()) and np.all(dX == 0)
    for name, g in grads.items():
        assert np.shape(g) == np.shape(layer.parameters()[name])


def test_pyramidal_dx_with_frozen_basal_equals_apical_only():
    rng = RngStream(21)
    apical = ActivationSpec(Kind.SWISH, beta=1.2)
    layer = PyramidalLayer(
        np.zeros((3, 2)), np.zeros((1, 2)), ActivationSpec(Kind.RELU),
        rng.uniform(-1, 1, (3, 2)), rng.uniform(-1, 1, (1, 2)), apical,
    )
    x, dY = rng.uniform(-1, 1, (4, 3)), rng.uniform(-1, 1, (4, 2))
    _, dX = pyramidal_backward(layer, pyramidal_forward(layer, x)[1], dY)
    apical_only = DenseLayer(layer.W_apical, layer.b_apical, apical)
    _, dX_ref = dense_backward(apical_only, apical_only.forward(x)[1], dY)
    np.testing.assert_allclose(dX, dX_ref, rtol=1e-14)


def test_pyramidal_branch_shape_mismatch():
    with pytest.raises(DimensionError):
        PyramidalLayer(np.zeros((2, 1)), np.zeros((1, 1)), ActivationSpec(), np.zeros((2, 2)), np.zeros((1, 2)), ActivationSpec())


def test_parameter_count_doubles():
    dense = DenseLayer.create(784, 100, ActivationSpec(Kind.RELU), RngStream(0))
    pyr = PyramidalLayer.create(784, 100, ActivationSpec(Kind.RELU), ActivationSpec(Kind.ADA), RngStream(0))
    assert pyr.n_weights() == 2 * dense.n_weights()


def test_pyramidal_branches_initialized_independently():
    pyr = PyramidalLayer.create(5, 4, ActivationSpec(), ActivationSpec(Kind.ADA), RngStream(3))
    assert not np.array_equal(pyr.W_basal, pyr.W_apical)


# -- initialization ----------------------------------------------------------


def test_glorot_bounds_and_determinism():
    W = init_glorot(30, 20, RngStream(1))
    bound = np.sqrt(6 / 50)
    assert np.all(np.abs(W) <= bound)
    assert np.array_equal(W, init_glorot(30, 20, RngStream(1)))
    layer = DenseLayer.create(30, 20, ActivationSpec(), RngStream(1))
    assert np.all(layer.b == 0)


def test_glorot_mean_near_zero():
    W = init_glorot(500, 200, RngStream(9))
    assert W.size == 10**5
    assert abs(W.mean()) < 0.01


def test_glorot_rejects_empty():
    with pytest.raises(DimensionError):
        init_glorot(0, 3, RngStream(0))


# -- checkpoint --------------------------------------------------------------


def test_checkpoint_roundtrip(tmp_path):
    rng = RngStream(2)
    layers = [
        PyramidalLayer.create(6, 4, ActivationSpec(Kind.LEAKY_RELU, l=0.01),
                              ActivationSpec(Kind.LEAKY_ADA, alpha=0.3, l=0.01, alpha_learnable=True), rng.child(0)),
        DenseLayer.create(4, 3, ActivationSpec(Kind.SWISH, beta=0.7, beta_learnable=True), rng.child(1)),
    ]
    path = tmp_path / "m.ckpt"
    save_layers(path, layers)
    loaded = load_layers(path)
    assert [type(a) for a in loaded] == [type(a) for a in layers]
    for a, b in zip(layers, loaded):
        for k, v in a.parameters().items():
            assert np.array_equal(np.asarray(v), np.asarray(b.parameters()[k]))
        assert a.activations() == b.activations()
    raw = path.read_bytes()
    assert raw[:8] == b"APCKPT01"
    n_floats = sum(np.size(getattr(l, n)) for l in layers for n in ("W", "b") if hasattr(l, n))
    n_floats += sum(l.n_weights() for l in layers if l.kind == "pyramidal")
    assert len(raw) - 12 - int.from_bytes(raw[8:12], "little") == 8 * n_floats


def test_checkpoint_rejects_bad_files(tmp_path):
    bad = tmp_path / "bad.ckpt"
    bad.write_bytes(b"NOTACKPT" + b"\0" * 8)
    with pytest.raises(FormatError):
        load_layers(bad)
    good = tmp_path / "good.ckpt"
    save_layers(good, [DenseLayer.create(2, 2, ActivationSpec(), RngStream(0))])
    truncated = tmp_path / "trunc.ckpt"
    truncated.write_bytes(good.read_bytes()[:-8])
    with pytest.raises(FormatError):
        load_layers(truncated)
