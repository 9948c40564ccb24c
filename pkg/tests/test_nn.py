import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from arae import nn
from arae.errors import ConfigurationError, UsageError
from oracles import central_difference, random_network, rel_error


def _check_network(rng):
    layers = random_network(rng)
    x = rng.uniform(0, 1, (int(rng.integers(1, 4)), layers[0].in_dim))
    c = rng.normal(size=(x.shape[0], layers[-1].out_dim))

    def loss():
        return float(np.sum(c * nn.forward(layers, x)))

    tape = nn.GradientTape()
    nn.forward(layers, x, tape)
    grads, gx = nn.backward(tape, c)
    errs = [rel_error(gx, central_difference(loss, x))]
    for layer, (dw, db) in zip(layers, grads):
        errs.append(rel_error(dw, central_difference(loss, layer.weights)))
        errs.append(rel_error(db, central_difference(loss, layer.biases)))
    return max(errs)


def test_backward_matches_finite_differences():
    rng = np.random.default_rng(11)
    assert max(_check_network(rng) for _ in range(30)) < 1e-4


def test_sigmoid_is_overflow_safe():
    with np.errstate(over="raise", invalid="raise"):
        y = nn.sigmoid(np.array([-1000.0, 0.0, 1000.0]))
    assert y.tolist() == [0.0, 0.5, 1.0]


def test_forward_vector_and_batch_agree():
    rng = np.random.default_rng(0)
    layers = random_network(rng)
    x = rng.uniform(size=(3, layers[0].in_dim))
    batch = nn.forward(layers, x)
    for i in range(3):
        np.testing.assert_allclose(nn.forward(layers, x[i]), batch[i], rtol=0, atol=1e-15)


def test_dimension_mismatch_names_layer():
    layers = [nn.DenseLayer(np.ones((3, 2)), np.zeros(3)), nn.DenseLayer(np.ones((1, 4)), np.zeros(1))]
    with pytest.raises(ConfigurationError, match="layer 1 expects input dim 4"):
        nn.forward(layers, np.zeros(2))


def test_backward_without_forward_is_usage_error():
    with pytest.raises(UsageError):
        nn.backward(nn.GradientTape(), np.zeros(2))


def test_glorot_bounds():
    layer = nn.DenseLayer.glorot(30, 10, np.random.default_rng(0))
    assert np.abs(layer.weights).max() <= np.sqrt(6 / 40)
    assert np.all(layer.biases == 0)


def test_squared_error_gradient():
    rng = np.random.default_rng(1)
    y, t = rng.normal(size=(4, 3)), rng.normal(size=(4, 3))
    val, g = nn.squared_error(y, t)
    assert val == pytest.approx(np.sum((y - t) ** 2) / 4)
    fd = central_difference(lambda: nn.squared_error(y, t)[0], y)
    assert rel_error(g, fd) < 1e-6


def test_sgd_step():
    p = [np.array([1.0, 2.0])]
    nn.SGD(0.5).step(p, [np.array([2.0, -2.0])])
    assert p[0].tolist() == [0.0, 3.0]


def test_adam_first_step_is_lr_times_sign():
    # bias-corrected first Adam step is lr * g / (|g| + eps')
    p = [np.array([0.0, 0.0])]
    nn.Adam(0.1).step(p, [np.array([3.0, -0.5])])
    np.testing.assert_allclose(p[0], [-0.1, 0.1], rtol=1e-6)


def test_optimizer_rejects_shape_change():
    opt = nn.Adam(0.1)
    opt.step([np.zeros(2)], [np.ones(2)])
    with pytest.raises(ConfigurationError):
        opt.step([np.zeros(3)], [np.ones(3)])
    with pytest.raises(ConfigurationError):
        nn.make_optimizer("rmsprop", 0.1)
    with pytest.raises(ConfigurationError):
        nn.SGD(0.0)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_sigmoid_outputs_in_unit_interval(seed):
    rng = np.random.default_rng(seed)
    layers = random_network(rng)
    layers[-1].activation = "sigmoid"
    y = nn.forward(layers, rng.normal(0, 10, (5, layers[0].in_dim)))
    assert np.all((y >= 0) & (y <= 1))
