import numpy as np
import pytest

from app.admm.budget import budget_for_weights
from app.admm.projection import project_topk
from app.admm.pruner import (
    AdmmState, admm_iteration, admm_penalty, augmented_grad, augmented_loss, frozen_layers,
    primal_residual, run_admm, select_rho,
)
from app.config import get_settings
from app.data_io.datasets import Dataset
from app.errors import NumericError, ShapeMismatchError
from app.nn_core.network import Network
from app.pruning.masking import update_masks
from app.schemas import AdmmHyper, BudgetSpec, SgdConfig
from app.utils import derive_seed, normal, uniform

from conftest import RELU, dense, numeric_gradients, relative_error


def single_layer_state(rho=2.0):
    net = Network.from_specs([dense(1, 2)], (1,), 2)
    net.set_parameters({"0.weight": np.array([[1.0], [0.0]])})
    state = AdmmState(
        Z={"0.weight": np.array([[0.0], [1.0]])},
        U={"0.weight": np.array([[0.0], [1.0]])},
        rho={"0.weight": rho},
        keep={"0.weight": 1},
    )
    return net, state


def test_augmented_loss_adds_quadratic_penalty():
    net, state = single_layer_state()
    x, y = np.array([[0.5], [1.0]]), np.array([0, 1])
    plain, _ = net.forward(x, y)
    # W - Z + U = (1, 0), so rho / 2 * ||.||^2 == 1
    assert augmented_loss(net, state, x, y) == pytest.approx(plain + 1.0)
    _, grads = net.loss_and_grad(x, y)
    diff = augmented_grad(net, state, x, y)["0.weight"] - grads["0.weight"]
    np.testing.assert_allclose(diff, [[2.0], [0.0]])


def test_frozen_layer_has_no_penalty():
    net, state = single_layer_state(rho=0.0)
    assert admm_penalty(net.weights(), state) == 0.0


def test_state_must_match_network(tiny_net):
    _, state = single_layer_state()
    with pytest.raises(ShapeMismatchError):
        augmented_loss(tiny_net, state, np.zeros((1, 6)), np.array([0]))


def test_primal_residual():
    net, state = single_layer_state()
    net.set_parameters({"0.weight": np.array([[3.0], [4.0]])})
    state.Z["0.weight"] = np.zeros((2, 1))
    residual = primal_residual(net, state)["0.weight"]
    assert residual.absolute == pytest.approx(5.0)
    assert residual.relative == pytest.approx(1.0)


def test_relative_residual_of_zero_weights():
    net, state = single_layer_state()
    net.set_parameters({"0.weight": np.zeros((2, 1))})
    assert primal_residual(net, state)["0.weight"].relative == float("inf")
    state.Z["0.weight"] = np.zeros((2, 1))
    assert primal_residual(net, state)["0.weight"].relative == 0.0


def test_rho_switches_beyond_rate():
    hyper = AdmmHyper(rho=1e-3, rho_high=1e-2, rho_switch_rate=10)
    assert select_rho(hyper, 10) == 1e-3
    assert select_rho(hyper, 30) == 1e-2
    assert select_rho(hyper, None) == 1e-3


def test_initial_state_projects_weights(tiny_net):
    budget = budget_for_weights(tiny_net.weights(), BudgetSpec(rate=4))
    state = AdmmState.initialize(tiny_net, budget, rho=1e-3)
    for name, z in state.Z.items():
        assert np.count_nonzero(z) == state.keep[name]
        assert not np.any(state.U[name])
    assert state.k == 0


def test_zero_epoch_iteration_updates_z_and_dual(tiny_net, splits):
    hyper = AdmmHyper(admm_iterations=1, sgd=SgdConfig(learning_rate=0.01, epochs=0))
    budget = budget_for_weights(tiny_net.weights(), BudgetSpec(rate=4))
    state = AdmmState.initialize(tiny_net, budget, rho=1e-2)
    state.U = {name: 0.1 * normal(i, u.shape) for i, (name, u) in enumerate(state.U.items())}

    net, new_state, record = admm_iteration(tiny_net, state, splits.train, hyper)
    for name, w in tiny_net.weights().items():
        np.testing.assert_array_equal(net.weights()[name], w)
        v = w + state.U[name]
        np.testing.assert_array_equal(new_state.Z[name], project_topk(v, state.keep[name]))
        np.testing.assert_array_equal(new_state.U[name], v - new_state.Z[name])
        assert np.count_nonzero(new_state.Z[name]) <= state.keep[name]
    assert new_state.k == 1 and state.k == 0
    assert record.iteration == 1


def test_dual_vanishes_without_pruning_pressure():
    net = Network.from_specs([dense(1, 2)], (1,), 2)
    w = np.array([[0.1], [0.7]])
    net.set_parameters({"0.weight": w})
    u = np.array([[0.2], [0.1]])
    state = AdmmState(Z={"0.weight": w.copy()}, U={"0.weight": u}, rho={"0.weight": 1e-2}, keep={"0.weight": 2})
    data = Dataset(np.array([[0.5], [1.0]]), np.array([0, 1]), 2)
    hyper = AdmmHyper(admm_iterations=1, sgd=SgdConfig(learning_rate=0.01, epochs=0))

    _, new_state, _ = admm_iteration(net, state, data, hyper)
    np.testing.assert_array_equal(new_state.Z["0.weight"], w + u)
    assert not np.any(new_state.U["0.weight"])


def test_dual_update_algebra_is_exact(tiny_net, splits, fast_hyper):
    budget = budget_for_weights(tiny_net.weights(), BudgetSpec(rate=4))
    state = AdmmState.initialize(tiny_net, budget, rho=1e-2)
    net = tiny_net
    for _ in range(3):
        net, new_state, _ = admm_iteration(net, state, splits.train, fast_hyper)
        for name, w in net.weights().items():
            z, u = new_state.Z[name], new_state.U[name]
            np.testing.assert_array_equal(u, (w + state.U[name]) - z)
            # kept entries carry no dual, pruned ones carry all of W + U
            assert not np.any(u[z != 0])
            np.testing.assert_array_equal(u[z == 0], (w + state.U[name])[z == 0])
        state = new_state


@pytest.mark.parametrize("seed", range(50))
def test_augmented_gradient_matches_finite_differences(seed):
    hidden = 3 + seed % 9
    net = Network.from_specs([dense(4, hidden), RELU, dense(hidden, 3)], (4,), 3, seed=seed)
    assert net.weight_count() + hidden + 3 <= 200
    # non-zero biases so no unit sits exactly on the relu kink
    net.set_parameters({"0.bias": normal(seed + 100, hidden) * 0.1})
    budget = budget_for_weights(net.weights(), BudgetSpec(rate=2 + seed % 3))
    state = AdmmState.initialize(net, budget, rho=1.0)
    for i, name in enumerate(state.U):
        state.U[name] = 0.1 * normal(derive_seed(seed, "dual", i), state.U[name].shape)
        state.rho[name] = 0.1 + uniform(derive_seed(seed, "rho", i), 1)[0]
    x = uniform(seed + 1, (5, 4))
    y = np.arange(5) % 3

    _, plain = net.loss_and_grad(x, y)
    numeric_plain = numeric_gradients(net, lambda: net.forward(x, y)[0])
    augmented = augmented_grad(net, state, x, y)
    numeric_augmented = numeric_gradients(net, lambda: augmented_loss(net, state, x, y))
    for name in plain:
        assert relative_error(plain[name], numeric_plain[name]) < 1e-5, name
        assert relative_error(augmented[name], numeric_augmented[name]) < 1e-5, name
    np.testing.assert_array_equal(augmented["0.bias"], plain["0.bias"])


def test_augmented_gradient_without_penalty_is_plain(tiny_net):
    budget = budget_for_weights(tiny_net.weights(), BudgetSpec(rate=4))
    state = AdmmState.initialize(tiny_net, budget, rho=1e-2, frozen=tiny_net.weight_names())
    x, y = uniform(3, (4, 6)), np.array([0, 1, 2, 0])
    _, plain = tiny_net.loss_and_grad(x, y)
    for name, g in augmented_grad(tiny_net, state, x, y).items():
        np.testing.assert_array_equal(g, plain[name])


def test_frozen_layer_is_left_alone(tiny_net, splits, fast_hyper):
    budget = budget_for_weights(tiny_net.weights(), BudgetSpec(rate=4))
    state = AdmmState.initialize(tiny_net, budget, rho=1e-2, frozen=["2.weight"])
    _, new_state, record = admm_iteration(tiny_net, state, splits.train, fast_hyper)
    np.testing.assert_array_equal(new_state.Z["2.weight"], state.Z["2.weight"])
    np.testing.assert_array_equal(new_state.U["2.weight"], state.U["2.weight"])
    assert "2.weight" not in record.active
    assert new_state.frozen == ["2.weight"]


def test_frozen_layers_match_nonzero_counts(tiny_net):
    w = tiny_net.weights()["4.weight"].copy()
    w[:, 4:] = 0.0
    tiny_net.set_parameters({"4.weight": w})
    budget = budget_for_weights(tiny_net.weights(), BudgetSpec(ratios=[0.5, 0.5, 0.5]))
    assert frozen_layers(tiny_net, budget) == ["4.weight"]


def test_run_admm_trace_and_input_untouched(tiny_net, splits, fast_hyper):
    before = {k: v.copy() for k, v in tiny_net.parameters().items()}
    budget = budget_for_weights(tiny_net.weights(), BudgetSpec(rate=4))
    result = run_admm(tiny_net, budget, fast_hyper, splits.train)
    assert len(result.trace) == fast_hyper.admm_iterations
    assert [r.iteration for r in result.trace] == [1, 2, 3]
    assert result.state.k == fast_hyper.admm_iterations
    for name, value in tiny_net.parameters().items():
        np.testing.assert_array_equal(value, before[name])
    assert all(np.isfinite(r.objective) and r.objective >= r.loss for r in result.trace)


def test_run_admm_is_deterministic(tiny_net, splits, fast_hyper):
    budget = budget_for_weights(tiny_net.weights(), BudgetSpec(rate=4))
    a = run_admm(tiny_net, budget, fast_hyper, splits.train)
    b = run_admm(tiny_net, budget, fast_hyper, splits.train)
    for name, z in a.state.Z.items():
        np.testing.assert_array_equal(z, b.state.Z[name])


def test_non_finite_loss_leaves_state_unchanged(splits, fast_hyper):
    net = Network.from_specs([dense(6, 3)], (6,), 3, seed=2)
    net.set_parameters({"0.bias": np.array([np.inf, 0.0, 0.0])})
    budget = budget_for_weights(net.weights(), BudgetSpec(rate=2))
    state = AdmmState.initialize(net, budget, rho=1e-2)
    z = state.Z["0.weight"].copy()
    with pytest.raises(NumericError):
        admm_iteration(net, state, splits.train, fast_hyper)
    assert state.k == 0
    np.testing.assert_array_equal(state.Z["0.weight"], z)


def test_masked_admm_leaves_pruned_weights_bit_identical(tiny_net, splits, fast_hyper):
    pruned = update_masks(tiny_net, budget_for_weights(tiny_net.weights(), BudgetSpec(rate=2)))
    budget = budget_for_weights(pruned.net.weights(), BudgetSpec(rate=4))
    result = run_admm(pruned.net, budget, fast_hyper, splits.train, mask=pruned.masks)
    before, after = pruned.net.weights(), result.net.weights()
    for name, mask in pruned.masks.items():
        masked = mask == 0
        np.testing.assert_array_equal(after[name][masked].view(np.uint64), before[name][masked].view(np.uint64))
    assert not np.array_equal(after["0.weight"], before["0.weight"])


def test_run_admm_shrinks_primal_residual(tiny_net, splits):
    hyper = AdmmHyper(
        rho=0.5, rho_high=0.5, admm_iterations=10,
        sgd=SgdConfig(learning_rate=0.05, epochs=2, batch_size=16, seed=4),
    )
    budget = budget_for_weights(tiny_net.weights(), BudgetSpec(rate=4))
    trace = run_admm(tiny_net, budget, hyper, splits.train).trace
    first, last = trace[0].mean_relative_residual, trace[-1].mean_relative_residual
    assert first > 0
    assert last / first <= get_settings().RESIDUAL_RATIO_TARGET
