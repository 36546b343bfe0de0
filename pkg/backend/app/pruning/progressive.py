"""
Progressive Pruning
Pool of partial prunings that is advanced toward higher compression rates with masked ADMM
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from ..admm.budget import SparsityBudget, budget_for_weights
from ..config import get_settings
from ..errors import ConfigError, InvariantError, PruningError
from ..nn_core.network import Network
from ..schemas import BudgetSpec, ProgressiveMode, PruneConfig, Schedule, StageKind, StageRecord
from .masking import PrunedModel
from .pipeline import DataSplits, StageOutcome, prune_to_rate

settings = get_settings()
logger = logging.getLogger(__name__)


@dataclass
class PoolEntry:
    """A partial pruning kept in the pool, keyed by its nominal rate"""
    model: PrunedModel
    rate: float
    val_accuracy: float
    lineage: List[float] = field(default_factory=list)  # rates passed through, this one last
    stage: Optional[StageRecord] = None
    outcome: Optional[StageOutcome] = None

    def __post_init__(self):
        if not 0.0 <= self.val_accuracy <= 1.0:
            raise ValueError(f"validation accuracy {self.val_accuracy} outside [0, 1]")
        if self.rate < 1.0:
            raise ValueError(f"pool entry rate {self.rate} < 1")
        if not self.lineage:
            self.lineage = [self.rate]


@dataclass
class PruningPool:
    capacity: int
    entries: List[PoolEntry] = field(default_factory=list)

    def __post_init__(self):
        self.check()

    def check(self):
        if len(self.entries) > self.capacity:
            raise InvariantError(f"pool holds {len(self.entries)} entries, capacity {self.capacity}")
        rates = self.rates
        if len(set(rates)) != len(rates):
            raise InvariantError(f"pool rates are not distinct: {rates}")

    @property
    def rates(self) -> List[float]:
        return [entry.rate for entry in self.entries]

    @property
    def max_rate(self) -> float:
        return max(self.rates)

    def highest(self) -> PoolEntry:
        return max(self.entries, key=lambda entry: entry.rate)

    def replaced(self, position: int, entry: PoolEntry) -> "PruningPool":
        """New pool with the entry at `position` swapped out; this pool is left untouched"""
        entries = list(self.entries)
        entries[position] = entry
        return PruningPool(self.capacity, entries)


@dataclass
class ProgressiveResult:
    final: PoolEntry
    pool: PruningPool
    history: List[StageRecord]
    outcomes: List[StageOutcome]


def _stage_record(index: int, kind: StageKind, parent_rate: float, outcome: StageOutcome) -> StageRecord:
    return StageRecord(
        stage_index=index,
        stage_kind=kind,
        parent_rate=parent_rate,
        target_rate=outcome.target_rate,
        epochs_used=outcome.epochs_used,
        final_loss=outcome.final_loss,
        val_accuracy=outcome.val_accuracy,
        test_accuracy=outcome.test_accuracy,
    )


def seed_pool(dense: Network, schedule: Schedule, cfg: PruneConfig, data: DataSplits) -> PruningPool:
    """Prune the dense network directly to every seed rate"""
    if len(schedule.seeds) > cfg.progressive.capacity:
        raise ConfigError(f"{len(schedule.seeds)} seed rates exceed the pool capacity {cfg.progressive.capacity}")

    entries: List[PoolEntry] = []
    for index, rate in enumerate(schedule.seeds):
        logger.info(f"Seeding pool entry {index + 1}/{len(schedule.seeds)} at {rate}x")
        budget = budget_for_weights(dense.weights(), BudgetSpec(rate=rate))
        try:
            outcome = prune_to_rate(dense, budget, cfg, data, rate=rate)
        except PruningError as e:
            logger.error(f"Pool construction aborted at seed rate {rate}x: {e}")
            raise
        entries.append(PoolEntry(
            model=outcome.model,
            rate=rate,
            val_accuracy=outcome.val_accuracy,
            stage=_stage_record(index, StageKind.SEED, 1.0, outcome),
            outcome=outcome,
        ))
    pool = PruningPool(cfg.progressive.capacity, entries)
    logger.info(f"Pool seeded with rates {pool.rates}")
    return pool


def parent_position(pool: PruningPool) -> int:
    """Highest validation accuracy; ties go to the lower rate, then the lower position"""
    if not pool.entries:
        raise InvariantError("cannot select a parent from an empty pool")
    return min(range(len(pool.entries)),
               key=lambda i: (-pool.entries[i].val_accuracy, pool.entries[i].rate, i))


def select_parent(pool: PruningPool) -> PoolEntry:
    return pool.entries[parent_position(pool)]


def check_mask_monotone(parent: PrunedModel, child: PrunedModel):
    """The child's support must lie inside the parent's support, layer by layer"""
    for name, keep in child.masks.items():
        grown = int(np.count_nonzero((keep != 0) & (parent.masks[name] == 0)))
        if grown:
            raise InvariantError(f"{name}: {grown} weights revived outside the parent mask")


def child_budget(parent: PoolEntry, target_rate: float) -> SparsityBudget:
    """Budget for the target rate, clamped to what the parent still has"""
    weights = parent.model.net.weights()
    budget = budget_for_weights(weights, BudgetSpec(rate=target_rate))
    nonzero = parent.model.nonzero_counts()
    return budget.clamped([nonzero[name] for name in budget.names])


def extend(parent: PoolEntry, target_rate: float, cfg: PruneConfig, data: DataSplits) -> StageOutcome:
    """Masked ADMM + mask update + masked retraining from one pool entry"""
    budget = child_budget(parent, target_rate)
    outcome = prune_to_rate(parent.model.net, budget, cfg, data, mask=parent.model.masks, rate=target_rate)
    check_mask_monotone(parent.model, outcome.model)
    return outcome


def _best_extension(pool: PruningPool, target_rate: float, cfg: PruneConfig,
                    data: DataSplits) -> Tuple[int, StageOutcome]:
    """Extend every entry to the target in parallel and keep the best candidate"""
    workers = min(settings.worker_count(), len(pool.entries))
    logger.info(f"Exhaustive advance to {target_rate}x: {len(pool.entries)} candidates on {workers} workers")
    with ThreadPoolExecutor(max_workers=workers) as executor:
        futures = [executor.submit(extend, entry, target_rate, cfg, data) for entry in pool.entries]
        outcomes = [future.result() for future in futures]
    best = min(range(len(outcomes)),
               key=lambda i: (-outcomes[i].val_accuracy, pool.entries[i].rate, i))
    return best, outcomes[best]


def advance(pool: PruningPool, target_rate: float, cfg: PruneConfig, data: DataSplits,
            stage_index: int = 0) -> PruningPool:
    """
    Reach `target_rate` from the pool and replace the parent with the result.

    Select-first mode extends only the selected parent; exhaustive mode
    extends every entry and keeps the best. A failing stage raises and the
    input pool stays as it was.
    """
    if any(target_rate <= rate for rate in pool.rates):
        raise ConfigError(f"target rate {target_rate}x must exceed every pool rate {pool.rates}")

    try:
        if cfg.progressive.mode == ProgressiveMode.EXHAUSTIVE:
            position, outcome = _best_extension(pool, target_rate, cfg, data)
        else:
            position = parent_position(pool)
            logger.info(
                f"Advancing to {target_rate}x from parent {pool.entries[position].rate}x "
                f"(val_acc={pool.entries[position].val_accuracy:.4f})"
            )
            outcome = extend(pool.entries[position], target_rate, cfg, data)
    except PruningError as e:
        logger.error(f"Advance to {target_rate}x failed, pool unchanged: {e}")
        raise

    parent = pool.entries[position]
    entry = PoolEntry(
        model=outcome.model,
        rate=target_rate,
        val_accuracy=outcome.val_accuracy,
        lineage=parent.lineage + [target_rate],
        stage=_stage_record(stage_index, StageKind.ADVANCE, parent.rate, outcome),
        outcome=outcome,
    )
    new_pool = pool.replaced(position, entry)
    logger.info(f"Replaced {parent.rate}x with {target_rate}x; pool rates {new_pool.rates}")
    return new_pool


def run_progressive(dense: Network, schedule: Schedule, cfg: PruneConfig, data: DataSplits) -> ProgressiveResult:
    """
    Seed the pool, then advance once per target rate.

    The final entry is the highest-rate one; without targets it is the
    entry select_parent would choose.
    """
    pool = seed_pool(dense, schedule, cfg, data)
    history = [entry.stage for entry in pool.entries]
    outcomes = [entry.outcome for entry in pool.entries]
    seeded_size = len(pool.entries)

    for offset, target in enumerate(schedule.targets):
        previous_max = pool.max_rate
        pool = advance(pool, target, cfg, data, stage_index=seeded_size + offset)
        if not pool.max_rate > previous_max or len(pool.entries) != seeded_size:
            raise InvariantError(f"pool did not advance monotonically: {pool.rates}")
        entry = next(e for e in pool.entries if e.rate == target)
        history.append(entry.stage)
        outcomes.append(entry.outcome)

    final = pool.highest() if schedule.targets else select_parent(pool)
    logger.info(
        f"Progressive pruning finished at {final.rate}x (achieved {final.model.achieved_rate:.2f}x, "
        f"lineage {final.lineage}, val_acc={final.val_accuracy:.4f})"
    )
    return ProgressiveResult(final=final, pool=pool, history=history, outcomes=outcomes)
