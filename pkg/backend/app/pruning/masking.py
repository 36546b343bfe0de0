"""
Thresholding mask update and masked retraining of the surviving weights
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple, Optional

import numpy as np

from ..admm.budget import SparsityBudget
from ..admm.projection import project_topk, support
from ..errors import InvariantError, NumericError, ShapeMismatchError
from ..nn_core.network import Network
from ..nn_core.training import GradientMask, check_masked_zero, evaluate, train_epochs, zero_velocity
from ..schemas import SgdConfig

logger = logging.getLogger(__name__)


def compression_rate(total_params: int, nonzero: int) -> float:
    """total parameters / remaining nonzero weights (inf when nothing survives)"""
    return float("inf") if nonzero == 0 else total_params / nonzero


@dataclass
class PrunedModel:
    """
    A network whose pruned weights are exactly zero, together with the
    explicit masks that keep them zero during further training.
    """
    net: Network
    masks: GradientMask
    budget: SparsityBudget
    achieved_rate: float = 0.0

    def __post_init__(self):
        if not self.achieved_rate:
            self.achieved_rate = compression_rate(self.net.weight_count(), self.net.nonzero_count())

    def copy(self) -> "PrunedModel":
        return PrunedModel(self.net.copy(), {k: v.copy() for k, v in self.masks.items()},
                           self.budget, self.achieved_rate)

    def nonzero_counts(self) -> Dict[str, int]:
        return {name: int(np.count_nonzero(w)) for name, w in self.net.weights().items()}

    def check_invariants(self):
        """card(W_i) <= l_i and masked positions exactly zero"""
        keep = self.budget.as_dict()
        for name, count in self.nonzero_counts().items():
            if count > keep[name]:
                raise InvariantError(f"{name} has {count} nonzeros, budget {keep[name]}")
        check_masked_zero(self.net, self.masks)


class RetrainRecord(NamedTuple):
    epoch: int
    train_loss: float
    val_loss: float
    val_accuracy: float


@dataclass
class RetrainResult:
    model: PrunedModel
    trace: List[RetrainRecord] = field(default_factory=list)
    aborted: bool = False


def update_masks(net: Network, budget: SparsityBudget) -> PrunedModel:
    """
    Hard-prune every layer to its l_i largest-magnitude weights.
    The mask of a layer is the support of project_topk(W_i, l_i).
    """
    weights = net.weights()
    if list(weights) != budget.names:
        raise ShapeMismatchError(f"budget layers {budget.names} do not match network layers {list(weights)}")

    keep = budget.as_dict()
    pruned = net.copy()
    masks: GradientMask = {}
    new_weights = {}
    for name, w in weights.items():
        projected = project_topk(w, keep[name])
        masks[name] = support(projected)
        new_weights[name] = projected
    pruned.set_parameters(new_weights)
    model = PrunedModel(pruned, masks, budget)
    logger.info(
        f"Mask update: {pruned.nonzero_count()} of {pruned.weight_count()} weights kept "
        f"({model.achieved_rate:.2f}x)"
    )
    return model


def masked_retrain(model: PrunedModel, data, cfg: SgdConfig, val_data=None) -> RetrainResult:
    """
    Retrain the surviving weights for cfg.epochs epochs with masked gradients.

    Accuracy in the trace is measured on `val_data` (training data when
    absent). A non-finite loss stops retraining and returns the last model
    that completed an epoch.
    """
    current = model.copy()
    if cfg.epochs == 0:
        return RetrainResult(current)

    held_out = val_data if val_data is not None else data
    velocity = zero_velocity(current.net.parameters())
    trace: List[RetrainRecord] = []
    for epoch in range(cfg.epochs):
        candidate = current.net.copy()
        try:
            history, velocity = train_epochs(
                candidate, data, cfg, mask=current.masks, velocity=velocity, epoch_offset=epoch, epochs=1,
            )
        except NumericError as e:
            logger.warning(f"Masked retraining aborted at epoch {epoch}: {e}; keeping last valid model")
            return RetrainResult(current, trace, aborted=True)

        current = PrunedModel(candidate, current.masks, current.budget)
        current.check_invariants()
        val = evaluate(candidate, held_out)
        trace.append(RetrainRecord(epoch, history[-1].loss, val.loss, val.accuracy))
        logger.info(
            f"Retrain epoch {epoch}: lr={history[-1].learning_rate:.2e} train_loss={history[-1].loss:.6f} "
            f"val_loss={val.loss:.6f} val_acc={val.accuracy:.4f}"
        )
    return RetrainResult(current, trace)
