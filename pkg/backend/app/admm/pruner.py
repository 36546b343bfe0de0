"""
ADMM Pruner
Alternates SGD on the augmented loss, top-k projection of Z and the dual update of U
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, NamedTuple, Optional

import numpy as np

from ..config import get_settings
from ..errors import NumericError, ShapeMismatchError
from ..nn_core.network import Network, Params
from ..nn_core.training import (
    GradientMask, Objective, StepOutput, evaluate, train_epochs, zero_velocity,
)
from ..schemas import AdmmHyper
from .budget import SparsityBudget
from .projection import project_topk

settings = get_settings()
logger = logging.getLogger(__name__)


class Residual(NamedTuple):
    absolute: float  # ||W - Z||_F
    relative: float  # absolute / ||W||_F (0 for 0/0, inf for r/0)


@dataclass
class AdmmState:
    """
    Per-layer auxiliary copies Z_i, scaled duals U_i, penalties rho_i and keep
    counts l_i, plus the iteration counter k. A layer with rho_i == 0 is frozen.
    """
    Z: Params
    U: Params
    rho: Dict[str, float]
    keep: Dict[str, int]
    k: int = 0
    velocity: Optional[Params] = None  # SGD momentum, carried across the iterations of one run

    @classmethod
    def initialize(cls, net: Network, budget: SparsityBudget, rho: float,
                   frozen: Iterable[str] = ()) -> "AdmmState":
        """Z_i = project_topk(W_i, l_i), U_i = 0"""
        weights = net.weights()
        if list(weights) != budget.names:
            raise ShapeMismatchError(f"budget layers {budget.names} do not match network layers {list(weights)}")
        frozen = set(frozen)
        keep = budget.as_dict()
        return cls(
            Z={name: project_topk(w, keep[name]) for name, w in weights.items()},
            U={name: np.zeros_like(w) for name, w in weights.items()},
            rho={name: 0.0 if name in frozen else float(rho) for name in weights},
            keep=keep,
        )

    @property
    def frozen(self) -> List[str]:
        return [name for name, rho in self.rho.items() if rho == 0.0]

    def copy(self) -> "AdmmState":
        return AdmmState(
            Z={k: v.copy() for k, v in self.Z.items()},
            U={k: v.copy() for k, v in self.U.items()},
            rho=dict(self.rho),
            keep=dict(self.keep),
            k=self.k,
            velocity=None if self.velocity is None else {k: v.copy() for k, v in self.velocity.items()},
        )

    def check_against(self, net: Network):
        weights = net.weights()
        if set(weights) != set(self.Z):
            raise ShapeMismatchError(f"ADMM state layers {sorted(self.Z)} do not match network {sorted(weights)}")
        for name, w in weights.items():
            if self.Z[name].shape != w.shape or self.U[name].shape != w.shape:
                raise ShapeMismatchError(
                    f"{name}: Z {self.Z[name].shape} / U {self.U[name].shape} vs W {w.shape}"
                )


@dataclass
class AdmmRecord:
    """Diagnostics of one ADMM iteration"""
    iteration: int
    objective: float  # augmented loss
    loss: float  # plain loss
    residuals: Dict[str, Residual] = field(default_factory=dict)
    active: List[str] = field(default_factory=list)  # layers with rho > 0

    @property
    def mean_relative_residual(self) -> float:
        values = [self.residuals[name].relative for name in self.active]
        return float(np.mean(values)) if values else 0.0


class AdmmIteration(NamedTuple):
    net: Network
    state: AdmmState
    record: AdmmRecord


class AdmmResult(NamedTuple):
    net: Network
    state: AdmmState
    trace: List[AdmmRecord]


def select_rho(hyper: AdmmHyper, target_rate: Optional[float]) -> float:
    """rho_high beyond the switch rate, rho otherwise"""
    if target_rate is not None and target_rate > hyper.rho_switch_rate:
        return hyper.rho_high
    return hyper.rho


def admm_penalty(weights: Params, state: AdmmState) -> float:
    """sum_i rho_i / 2 * ||W_i - Z_i + U_i||_F^2"""
    total = 0.0
    for name, w in weights.items():
        rho = state.rho[name]
        if rho == 0.0:
            continue
        diff = w - state.Z[name] + state.U[name]
        total += 0.5 * rho * float(np.sum(diff * diff))
    return total


def augmented_objective(state: AdmmState) -> Objective:
    """Objective for the W-update: plain loss plus the ADMM quadratic penalty"""

    def objective(net: Network, inputs: np.ndarray, labels: np.ndarray) -> StepOutput:
        loss, grads = net.loss_and_grad(inputs, labels)
        weights = net.weights()
        for name, w in weights.items():
            rho = state.rho[name]
            if rho != 0.0:
                grads[name] = grads[name] + rho * (w - state.Z[name] + state.U[name])
        return StepOutput(loss + admm_penalty(weights, state), loss, grads)

    return objective


def augmented_loss(net: Network, state: AdmmState, inputs: np.ndarray, labels: np.ndarray) -> float:
    state.check_against(net)
    return augmented_objective(state)(net, inputs, labels).objective


def augmented_grad(net: Network, state: AdmmState, inputs: np.ndarray, labels: np.ndarray) -> Params:
    """Plain gradients with rho_i (W_i - Z_i + U_i) added to each weight gradient"""
    state.check_against(net)
    return augmented_objective(state)(net, inputs, labels).grads


def primal_residual(net: Network, state: AdmmState) -> Dict[str, Residual]:
    residuals = {}
    for name, w in net.weights().items():
        r = float(np.linalg.norm(w - state.Z[name]))
        norm_w = float(np.linalg.norm(w))
        if norm_w > 0.0:
            rel = r / norm_w
        elif r == 0.0:
            rel = 0.0
        else:
            rel = float("inf")
            logger.warning(f"{name}: relative residual is infinite (W is zero, Z is not)")
        residuals[name] = Residual(r, rel)
    return residuals


def admm_iteration(net: Network, state: AdmmState, data, hyper: AdmmHyper,
                   mask: Optional[GradientMask] = None) -> AdmmIteration:
    """
    One ADMM iteration on copies of `net` and `state`:
    (1) hyper.sgd.epochs of SGD on the augmented loss (gradients masked if given),
    (2) Z_i <- project_topk(W_i + U_i, l_i), (3) U_i <- (W_i + U_i) - Z_i, (4) k += 1.
    Frozen layers (rho_i == 0) skip (2) and (3). On a non-finite loss the
    inputs are left untouched and NumericError propagates.
    """
    state.check_against(net)
    work = net.copy()
    velocity = state.velocity if state.velocity is not None else zero_velocity(work.parameters())
    try:
        history, velocity = train_epochs(
            work, data, hyper.sgd, objective=augmented_objective(state), mask=mask,
            velocity=velocity, epoch_offset=state.k * hyper.sgd.epochs,
        )
    except NumericError as e:
        logger.error(f"ADMM iteration {state.k + 1} aborted, state unchanged: {e}")
        raise

    if history:
        objective, loss = history[-1].objective, history[-1].loss
    else:
        loss = evaluate(work, data).loss
        objective = loss + admm_penalty(work.weights(), state)

    new_state = state.copy()
    for name, w in work.weights().items():
        if new_state.rho[name] == 0.0:
            continue
        v = w + state.U[name]
        z = project_topk(v, state.keep[name])
        new_state.Z[name] = z
        new_state.U[name] = v - z  # exactly 0 where kept
    new_state.k = state.k + 1
    new_state.velocity = velocity

    record = AdmmRecord(
        iteration=new_state.k,
        objective=objective,
        loss=loss,
        residuals=primal_residual(work, new_state),
        active=[name for name, rho in new_state.rho.items() if rho != 0.0],
    )
    return AdmmIteration(work, new_state, record)


def frozen_layers(net: Network, budget: SparsityBudget) -> List[str]:
    """Layers whose keep count already equals their nonzero count"""
    weights = net.weights()
    keep = budget.as_dict()
    return [name for name, w in weights.items() if keep[name] == int(np.count_nonzero(w))]


def run_admm(net: Network, budget: SparsityBudget, hyper: AdmmHyper, data,
             mask: Optional[GradientMask] = None, rate: Optional[float] = None) -> AdmmResult:
    """
    Run hyper.admm_iterations ADMM iterations from a fresh state.

    With a mask (masked ADMM on a partially pruned model) layers that need no
    further pruning are frozen. The result is not hard-thresholded; that is
    left to the mask update.
    """
    rho = select_rho(hyper, rate if rate is not None else budget.rate)
    frozen = frozen_layers(net, budget) if mask else []
    state = AdmmState.initialize(net, budget, rho, frozen=frozen)
    logger.info(
        f"ADMM: {hyper.admm_iterations} iterations x {hyper.sgd.epochs} epochs, rho={rho:g}, "
        f"keep={budget.keep}" + (f", frozen={frozen}" if frozen else "") + (", masked" if mask else "")
    )

    trace: List[AdmmRecord] = []
    for _ in range(hyper.admm_iterations):
        net, state, record = admm_iteration(net, state, data, hyper, mask=mask)
        trace.append(record)
        logger.info(
            f"ADMM iteration {record.iteration}: augmented={record.objective:.6f} "
            f"loss={record.loss:.6f} mean_rel_residual={record.mean_relative_residual:.4e}"
        )

    first, last = trace[0].mean_relative_residual, trace[-1].mean_relative_residual
    if first > 0:
        ratio = last / first
        level = logging.INFO if ratio <= settings.RESIDUAL_RATIO_TARGET else logging.WARNING
        logger.log(level, f"ADMM residual ratio final/first = {ratio:.3f} (target <= {settings.RESIDUAL_RATIO_TARGET})")
    return AdmmResult(net, state, trace)
