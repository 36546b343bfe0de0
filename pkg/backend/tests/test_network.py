import math

import numpy as np
import pytest

from app.errors import ShapeMismatchError, StaleCacheError
from app.nn_core.network import Network, build_network, softmax_cross_entropy
from app.schemas import ArchitectureSpec, LayerKind, LayerSpec
from app.utils import normal, uniform

from conftest import RELU, dense, numeric_gradients, relative_error


def conv(i, o, k, stride=1, padding=0):
    return LayerSpec(kind=LayerKind.CONV2D, in_channels=i, out_channels=o, kernel_h=k, kernel_w=k,
                     stride=stride, padding=padding)


FLATTEN = LayerSpec(kind=LayerKind.FLATTEN)


def test_composition_mismatch_names_layer():
    with pytest.raises(ShapeMismatchError, match="layer 2"):
        Network.from_specs([dense(4, 5), RELU, dense(6, 2)], (4,), 2)


def test_output_must_match_classes():
    with pytest.raises(ShapeMismatchError):
        Network.from_specs([dense(4, 3)], (4,), 2)


def test_identity_layer_then_relu_passes_positive_input():
    net = Network.from_specs([dense(3, 3), RELU, dense(3, 2)], (3,), 2)
    net.set_parameters({"0.weight": np.eye(3), "0.bias": np.zeros(3)})
    x = np.array([[0.2, 0.5, 0.9]])
    out, _ = net.layers[0].forward(x)
    out, _ = net.layers[1].forward(out)
    np.testing.assert_array_equal(out, x)


def test_uniform_logits_give_ln2():
    loss, probs = softmax_cross_entropy(np.zeros((3, 2)), np.array([0, 1, 0]))
    assert loss == pytest.approx(math.log(2), abs=1e-12)
    np.testing.assert_allclose(probs, 0.5)


def test_head_gradient_is_softmax_minus_onehot():
    net = Network.from_specs([dense(1, 2)], (1,), 2)
    loss, cache = net.forward(np.array([[1.0]]), np.array([0]))
    grads = net.backward(cache)
    # logits are (0, 0) with zero weights, so d loss / d bias == (-0.5, 0.5)
    np.testing.assert_allclose(grads["0.bias"], [-0.5, 0.5])


def test_forward_matches_straight_line_oracle(tiny_net):
    x = uniform(5, (7, 6))
    y = np.array([0, 1, 2, 0, 1, 2, 0])
    p = tiny_net.parameters()
    h1 = np.maximum(x @ p["0.weight"].T + p["0.bias"], 0)
    h2 = np.maximum(h1 @ p["2.weight"].T + p["2.bias"], 0)
    z = h2 @ p["4.weight"].T + p["4.bias"]
    z = z - z.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    expected = -logp[np.arange(7), y].mean()
    loss, _ = tiny_net.forward(x, y)
    assert loss == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_dense_gradients_match_finite_differences(seed):
    net = Network.from_specs([dense(5, 7), RELU, dense(7, 4)], (5,), 4, seed=seed)
    # non-zero biases so no unit sits exactly on the relu kink
    net.set_parameters({"0.bias": normal(seed + 100, 7) * 0.1})
    x = uniform(seed + 1, (6, 5))
    y = np.arange(6) % 4
    _, analytic = net.loss_and_grad(x, y)
    numeric = numeric_gradients(net, lambda: net.forward(x, y)[0])
    for name in analytic:
        assert relative_error(analytic[name], numeric[name]) < 1e-6, name


def test_conv_gradients_match_finite_differences():
    specs = [conv(1, 2, 3, stride=2, padding=1), RELU, FLATTEN, dense(2 * 3 * 3, 3)]
    net = Network.from_specs(specs, (1, 5, 5), 3, seed=9)
    net.set_parameters({"0.bias": np.array([0.03, -0.02])})
    x = uniform(10, (4, 1, 5, 5))
    y = np.array([0, 1, 2, 1])
    _, analytic = net.loss_and_grad(x, y)
    numeric = numeric_gradients(net, lambda: net.forward(x, y)[0])
    for name in analytic:
        assert relative_error(analytic[name], numeric[name]) < 1e-6, name


def test_zero_weights_on_zero_input_give_zero_weight_gradient():
    net = Network.from_specs([dense(3, 4), RELU, dense(4, 2)], (3,), 2)
    _, grads = net.loss_and_grad(np.zeros((2, 3)), np.array([0, 1]))
    assert not np.any(grads["0.weight"])


def test_backward_rejects_stale_cache(tiny_net):
    _, cache = tiny_net.forward(uniform(1, (2, 6)), np.array([0, 1]))
    tiny_net.set_parameters({"0.bias": np.ones(12)})
    with pytest.raises(StaleCacheError):
        tiny_net.backward(cache)


def test_batch_shape_mismatch_is_rejected(tiny_net):
    with pytest.raises(ShapeMismatchError, match="layer 0"):
        tiny_net.forward(np.zeros((2, 5)), np.array([0, 1]))


def test_initialization_is_seeded():
    a = Network.from_specs([dense(4, 3)], (4,), 3, seed=42)
    b = Network.from_specs([dense(4, 3)], (4,), 3, seed=42)
    c = Network.from_specs([dense(4, 3)], (4,), 3, seed=43)
    np.testing.assert_array_equal(a.weights()["0.weight"], b.weights()["0.weight"])
    assert not np.array_equal(a.weights()["0.weight"], c.weights()["0.weight"])
    assert not np.any(a.parameters()["0.bias"])


def test_mlp_preset_sizes():
    net = build_network(ArchitectureSpec(preset="mlp-300-100"), (28, 28), 10, seed=1)
    assert net.weight_count() == 784 * 300 + 300 * 100 + 100 * 10
    assert net.weight_names() == ["1.weight", "3.weight", "5.weight"]


def test_lenet_preset_adds_channel_axis():
    net = build_network(ArchitectureSpec(preset="lenet5-like"), (28, 28), 10, seed=1)
    assert net.input_shape == (1, 28, 28)
    assert len(net.prunable_indices()) == 5
    assert net.logits(np.zeros((2, 1, 28, 28))).shape == (2, 10)
