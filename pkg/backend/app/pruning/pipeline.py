"""
Pruning Stage Pipeline
One partial pruning: ADMM toward a budget, hard mask update, masked retraining, evaluation
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional

from ..admm.budget import SparsityBudget
from ..admm.pruner import AdmmRecord, AdmmState, run_admm
from ..data_io.datasets import Dataset
from ..nn_core.network import Network
from ..nn_core.training import GradientMask, evaluate
from ..schemas import CurvePoint, PruneConfig
from .masking import PrunedModel, RetrainRecord, masked_retrain, update_masks

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DataSplits:
    """Training data, the held-out validation split that drives selection, optional test data"""
    train: Dataset
    val: Dataset
    test: Optional[Dataset] = None


@dataclass
class StageOutcome:
    model: PrunedModel
    target_rate: Optional[float]
    admm_trace: List[AdmmRecord] = field(default_factory=list)
    admm_state: Optional[AdmmState] = None
    retrain_trace: List[RetrainRecord] = field(default_factory=list)
    epochs_used: int = 0
    final_loss: float = 0.0  # training loss of the returned model
    val_accuracy: float = 0.0
    test_accuracy: Optional[float] = None
    aborted: bool = False

    def loss_curve(self, method: str, seed: int, epoch_offset: int = 0,
                   admm_epochs: int = 1) -> List[CurvePoint]:
        """Training loss after every ADMM iteration and every retraining epoch"""
        points = []
        epoch = epoch_offset
        for record in self.admm_trace:
            epoch += admm_epochs
            points.append(CurvePoint(method=method, seed=seed, epoch=epoch, train_loss=record.loss))
        for record in self.retrain_trace:
            epoch += 1
            points.append(CurvePoint(method=method, seed=seed, epoch=epoch, train_loss=record.train_loss))
        return points


def prune_to_rate(net: Network, budget: SparsityBudget, cfg: PruneConfig, data: DataSplits,
                  mask: Optional[GradientMask] = None, rate: Optional[float] = None) -> StageOutcome:
    """
    run_admm -> update_masks -> masked_retrain -> evaluate.

    With `mask` the ADMM phase is masked ADMM on a partially pruned model.
    `rate` is the nominal target used for rho selection and reporting
    (defaults to the budget's rate).
    """
    rate = rate if rate is not None else budget.rate
    admm = run_admm(net, budget, cfg.admm, data.train, mask=mask, rate=rate)
    pruned = update_masks(admm.net, budget)
    pruned.check_invariants()
    retrained = masked_retrain(pruned, data.train, cfg.retrain, val_data=data.val)
    model = retrained.model

    final_loss = evaluate(model.net, data.train).loss
    val_accuracy = evaluate(model.net, data.val).accuracy
    test_accuracy = evaluate(model.net, data.test).accuracy if data.test is not None and len(data.test) else None
    epochs_used = cfg.admm.admm_iterations * cfg.admm.sgd.epochs + len(retrained.trace)

    logger.info(
        f"Stage done: target={rate}x achieved={model.achieved_rate:.2f}x epochs={epochs_used} "
        f"train_loss={final_loss:.6f} val_acc={val_accuracy:.4f}"
        + (f" test_acc={test_accuracy:.4f}" if test_accuracy is not None else "")
    )
    return StageOutcome(
        model=model,
        target_rate=rate,
        admm_trace=admm.trace,
        admm_state=admm.state,
        retrain_trace=retrained.trace,
        epochs_used=epochs_used,
        final_loss=final_loss,
        val_accuracy=val_accuracy,
        test_accuracy=test_accuracy,
        aborted=retrained.aborted,
    )
