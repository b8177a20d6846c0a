import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tests.oracles import central_difference, relative_error
from waemdp.autodiff import tensor as T
from waemdp.autodiff.checkpoint import load_params, save_params
from waemdp.autodiff.nn import Made, Mlp
from waemdp.autodiff.optim import Adam
from waemdp.errors import NonScalarLoss, ShapeMismatch


def leaf(x):
    return T.Tensor(np.asarray(x, dtype=float), requires_grad=True)


def test_square_gradient():
    x = leaf(3.0)
    (g,) = T.grad(T.square(x), [x])
    assert g.value == pytest.approx(6.0)


def test_sigmoid_product_matches_closed_form():
    x, y = leaf(1.0), leaf(2.0)
    gx, gy = T.grad(T.sigmoid(T.mul(x, y)), [x, y])
    s = 1 / (1 + np.exp(-2.0))
    d = s * (1 - s)
    assert gx.value == pytest.approx(2 * d, rel=1e-12)
    assert gy.value == pytest.approx(d, rel=1e-12)


def test_linear_layer_squared_norm_gradient():
    rng = np.random.default_rng(0)
    w = leaf(np.eye(3))
    x = rng.normal(size=(3, 1))
    loss = T.tsum(T.square(T.matmul(w, x)))
    (g,) = T.grad(loss, [w])
    # d ||W x||^2 / dW = 2 (W x) x^T, and W = I here
    np.testing.assert_allclose(g.value, 2 * x @ x.T, rtol=1e-12)


def test_non_scalar_loss_rejected():
    x = leaf(np.ones(3))
    with pytest.raises(NonScalarLoss):
        T.grad(T.mul(x, 2.0), [x])


def test_matmul_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        T.matmul(leaf(np.ones((2, 3))), leaf(np.ones((2, 3))))


def test_unused_input_gets_zero_gradient():
    x, y = leaf(1.0), leaf(np.ones(2))
    _, gy = T.grad(T.square(x), [x, y])
    np.testing.assert_array_equal(gy.value, np.zeros(2))


def test_shared_subexpression_accumulates():
    x = leaf(2.0)
    y = T.mul(x, x)
    (g,) = T.grad(T.add(y, y), [x])
    assert g.value == pytest.approx(8.0)


def test_backward_visits_each_node_once_on_long_chain():
    x = leaf(1.0)
    y = x
    for _ in range(2000):
        y = T.add(y, 1e-3)
    (g,) = T.grad(y, [x])
    assert g.value == pytest.approx(1.0)


def test_no_grad_records_nothing():
    x = leaf(1.0)
    with T.no_grad():
        y = T.mul(x, 3.0)
    assert not y.requires_grad


def test_gradient_penalty_double_backward_matches_finite_difference():
    rng = np.random.default_rng(3)
    net = Mlp([3, 6, 1], rng, activation="tanh")
    x = rng.normal(size=(4, 3))

    def penalty():
        point = T.Tensor(x, requires_grad=True)
        (g,) = T.grad(T.tsum(net(point)), [point], create_graph=True)
        return T.mean(T.square(T.sub(T.norm(g, axis=1), 1.0)))

    grads = T.grad(penalty(), net.parameters())
    for p, g in zip(net.parameters(), grads):
        fd = central_difference(lambda: float(penalty().value), p.value)
        assert relative_error(g.value, fd) < 1e-6


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=2, max_size=6))
def test_softmax_gradient_property(values):
    x = leaf(np.array(values))
    weights = np.arange(len(values), dtype=float)
    f = lambda: float(np.sum(weights * np.exp(x.value - x.value.max()) / np.exp(x.value - x.value.max()).sum()))
    (g,) = T.grad(T.tsum(T.mul(T.softmax(x), weights)), [x])
    assert relative_error(g.value, central_difference(f, x.value)) < 1e-6


def test_adam_zero_gradient_leaves_params():
    p = leaf(np.array([1.0, -2.0]))
    opt = Adam([p], lr=1e-3)
    opt.step([np.zeros(2)])
    np.testing.assert_array_equal(p.value, [1.0, -2.0])


def test_adam_first_step_moves_by_learning_rate():
    p = leaf(np.array([0.5, 0.5]))
    opt = Adam([p], lr=1e-3)
    opt.step([np.array([3.0, -0.2])])
    # bias-corrected first step is lr * g / (|g| + eps)
    np.testing.assert_allclose(p.value, [0.5 - 1e-3, 0.5 + 1e-3], atol=1e-9)


def test_adam_ascend_on_concave_goes_to_maximum():
    theta = leaf(np.array([1.0]))
    opt = Adam([theta], lr=0.05)
    for _ in range(100):
        (g,) = T.grad(T.neg(T.square(theta)), [theta])
        opt.step([g.value], "ascend")
    assert abs(theta.value[0]) < 0.2


def test_adam_shape_mismatch():
    opt = Adam([leaf(np.ones(2))])
    with pytest.raises(ShapeMismatch):
        opt.step([np.ones(3)])


def test_mlp_parameter_count_and_determinism():
    net = Mlp([4, 8, 2], np.random.default_rng(0))
    assert net.parameter_count() == 4 * 8 + 8 + 8 * 2 + 2
    x = np.ones((3, 4))
    np.testing.assert_array_equal(net.forward_np(x), net(T.Tensor(x)).value)


def test_glorot_init_bounds_and_zero_bias():
    net = Mlp([10, 20, 1], np.random.default_rng(0))
    assert np.all(np.abs(net.weights[0].value) <= np.sqrt(6 / 30))
    assert np.all(net.biases[0].value == 0)


def test_made_autoregressive_masks():
    rng = np.random.default_rng(0)
    made = Made(5, rng, n_hidden=12, context_dim=2)
    base = rng.uniform(size=(1, 5))
    ctx = rng.uniform(size=(1, 2))
    ref = made.logits_np(base, ctx)
    for j in range(5):
        bumped = base.copy()
        bumped[0, j] += 1.0
        changed = np.abs(made.logits_np(bumped, ctx) - ref)[0] > 1e-12
        # logit i may only depend on bits strictly before i
        assert not changed[: j + 1].any()


def test_checkpoint_roundtrip(tmp_path):
    net = Mlp([2, 3, 1], np.random.default_rng(0))
    path = tmp_path / "params.json"
    save_params(path, net.state_dict())
    blob = json.loads(path.read_text())
    assert blob["mlp.w0"]["shape"] == [2, 3]
    other = Mlp([2, 3, 1], np.random.default_rng(1))
    other.load_state_dict(load_params(path))
    np.testing.assert_array_equal(other.forward_np(np.ones((1, 2))), net.forward_np(np.ones((1, 2))))
