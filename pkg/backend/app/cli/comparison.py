"""
Progressive vs Direct Comparison
Same dense start, same final rate and the same total epoch budget, over several seeds
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from ..admm.budget import budget_for_weights
from ..errors import ConfigError
from ..nn_core.network import Network
from ..pruning.pipeline import DataSplits, StageOutcome, prune_to_rate
from ..pruning.progressive import run_progressive
from ..schemas import BudgetSpec, ComparisonRecord, CurvePoint, PruneConfig, RunConfig
from .experiments import fit_splits, train_baseline

logger = logging.getLogger(__name__)

PROGRESSIVE = "progressive"
DIRECT = "direct"


@dataclass
class ComparisonResult:
    records: List[ComparisonRecord] = field(default_factory=list)
    curves: List[CurvePoint] = field(default_factory=list)

    def median(self, method: str, attribute: str) -> float:
        values = [getattr(r, attribute) for r in self.records if r.method == method]
        return float(np.median(values)) if values else float("nan")

    def summary(self) -> Dict[str, Dict[str, float]]:
        return {
            method: {
                "final_train_loss": self.median(method, "final_train_loss"),
                "val_accuracy": self.median(method, "val_accuracy"),
            }
            for method in (PROGRESSIVE, DIRECT)
        }


def direct_config(cfg: PruneConfig, total_epochs: int) -> PruneConfig:
    """
    Stretch the one-shot schedule to `total_epochs`: ADMM iterations scale
    with the budget and retraining takes the remaining epochs.
    """
    per_iteration = cfg.admm.sgd.epochs
    scale = total_epochs / max(cfg.stage_epochs(), 1)
    iterations = max(1, int(round(cfg.admm.admm_iterations * scale)))
    retrain_epochs = total_epochs - iterations * per_iteration
    if retrain_epochs < 0:
        iterations = max(1, total_epochs // max(per_iteration, 1))
        retrain_epochs = max(total_epochs - iterations * per_iteration, 0)
    admm = cfg.admm.model_copy(update={"admm_iterations": iterations})
    retrain = cfg.retrain.model_copy(update={"epochs": retrain_epochs})
    return cfg.model_copy(update={"admm": admm, "retrain": retrain})


def _curve(outcomes: List[StageOutcome], method: str, seed: int, admm_epochs: int) -> List[CurvePoint]:
    points: List[CurvePoint] = []
    offset = 0
    for outcome in outcomes:
        points += outcome.loss_curve(method, seed, epoch_offset=offset, admm_epochs=admm_epochs)
        offset += outcome.epochs_used
    return points


def _record(seed: int, method: str, outcome: StageOutcome, total_epochs: int) -> ComparisonRecord:
    return ComparisonRecord(
        seed=seed,
        method=method,
        final_rate=outcome.model.achieved_rate,
        total_epochs=total_epochs,
        final_train_loss=outcome.final_loss,
        val_accuracy=outcome.val_accuracy,
        test_accuracy=outcome.test_accuracy,
    )


def compare(config: RunConfig, splits: DataSplits, dense: Optional[Network] = None) -> ComparisonResult:
    """
    For every comparison seed: run the progressive schedule, then prune the
    same dense network directly to the final rate with the progressive run's
    total epoch budget. Without a dense network one is trained per seed.
    """
    schedule = config.schedule
    final_rate = (schedule.targets or schedule.seeds)[-1]
    result = ComparisonResult()

    for seed in config.compare.seeds:
        seeded = config.with_seed(seed)
        if dense is None:
            net, seed_splits, _ = train_baseline(seeded, splits)
        else:
            net, seed_splits = dense, fit_splits(splits, dense.input_shape)
        cfg = seeded.prune_config()
        admm_epochs = cfg.admm.sgd.epochs

        logger.info(f"Comparison seed {seed}: progressive schedule {schedule.seeds} -> {schedule.targets}")
        progressive = run_progressive(net, schedule, cfg, seed_splits)
        total_epochs = sum(stage.epochs_used for stage in progressive.history)
        final_outcome = progressive.final.outcome
        result.records.append(_record(seed, PROGRESSIVE, final_outcome, total_epochs))
        result.curves += _curve(progressive.outcomes, PROGRESSIVE, seed, admm_epochs)

        one_shot = direct_config(cfg, total_epochs)
        logger.info(
            f"Comparison seed {seed}: direct {final_rate}x with {one_shot.admm.admm_iterations} ADMM iterations "
            f"and {one_shot.retrain.epochs} retraining epochs ({total_epochs} epochs total)"
        )
        budget = budget_for_weights(net.weights(), BudgetSpec(rate=final_rate))
        direct = prune_to_rate(net, budget, one_shot, seed_splits, rate=final_rate)
        result.records.append(_record(seed, DIRECT, direct, direct.epochs_used))
        result.curves += _curve([direct], DIRECT, seed, admm_epochs)

    if not result.records:
        raise ConfigError("comparison needs at least one seed")
    summary = result.summary()
    logger.info(
        f"Median final training loss: progressive {summary[PROGRESSIVE]['final_train_loss']:.6f}, "
        f"direct {summary[DIRECT]['final_train_loss']:.6f}; median val accuracy: progressive "
        f"{summary[PROGRESSIVE]['val_accuracy']:.4f}, direct {summary[DIRECT]['val_accuracy']:.4f}"
    )
    return result
