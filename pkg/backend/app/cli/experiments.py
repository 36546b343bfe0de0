"""
Experiment plumbing shared by the CLI commands
Config loading, dataset splits, baseline training and metric rows
"""

import logging
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

from pydantic import ValidationError

from ..admm.budget import budget_for_weights
from ..config import get_settings
from ..data_io.datasets import Dataset, split, synthetic_blobs
from ..data_io.idx import load_idx
from ..errors import ConfigError
from ..nn_core.network import Network, build_network
from ..nn_core.training import evaluate, train_epochs, zero_velocity
from ..pruning.pipeline import DataSplits, StageOutcome, prune_to_rate
from ..schemas import DatasetKind, DatasetSpec, EpochRecord, MetricPhase, PhaseRecord, RunConfig
from ..utils import derive_seed

settings = get_settings()
logger = logging.getLogger(__name__)


def load_config(path: Optional[Union[str, Path]] = None, seed: Optional[int] = None) -> RunConfig:
    """Parse a RunConfig JSON document (defaults when no path) and apply the seed override"""
    if path is None:
        config = RunConfig()
    else:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            config = RunConfig.model_validate_json(path.read_text(encoding="utf-8"))
        except ValidationError as e:
            raise ConfigError(f"invalid config {path}: {e}") from None
    return config.with_seed(seed)


def data_seed(spec: DatasetSpec) -> int:
    return spec.seed if spec.seed is not None else settings.DEFAULT_SEED


def load_splits(spec: DatasetSpec) -> DataSplits:
    """Train/validation/test data; the validation split is carved from the training data"""
    seed = data_seed(spec)
    if spec.kind == DatasetKind.IDX:
        full = load_idx(spec.train_images, spec.train_labels, spec.num_classes)
        test = None
        if spec.test_images is not None and spec.test_labels is not None:
            test = load_idx(spec.test_images, spec.test_labels, spec.num_classes)
    else:
        blobs = synthetic_blobs(derive_seed(seed, "blobs"), spec.n + spec.test_n, spec.num_classes,
                                spec.dim, spec.spread)
        if spec.test_n:
            full, test = split(blobs, spec.test_n / (spec.n + spec.test_n), derive_seed(seed, "test"))
        else:
            full, test = blobs, None

    train, val = split(full, spec.val_fraction, derive_seed(seed, "val"))
    logger.info(
        f"Data: {len(train)} train / {len(val)} val" + (f" / {len(test)} test" if test is not None else "")
        + f", samples {train.sample_shape}, {train.num_classes} classes"
    )
    return DataSplits(train, val, test)


def fit_splits(splits: DataSplits, input_shape: Sequence[int]) -> DataSplits:
    """Reshape samples to a network's input shape (e.g. a channel axis for conv nets)"""
    if tuple(splits.train.sample_shape) == tuple(input_shape):
        return splits

    def fit(ds: Optional[Dataset]) -> Optional[Dataset]:
        return None if ds is None else ds.reshaped(input_shape)

    return DataSplits(fit(splits.train), fit(splits.val), fit(splits.test))


def train_baseline(config: RunConfig, splits: DataSplits) -> Tuple[Network, DataSplits, List[EpochRecord]]:
    """Initialise and train the dense network, one validation row per epoch"""
    net = build_network(config.architecture, splits.train.sample_shape, splits.train.num_classes,
                        derive_seed(config.seed, "init"))
    splits = fit_splits(splits, net.input_shape)
    cfg = config.baseline
    velocity = zero_velocity(net.parameters())
    rows: List[EpochRecord] = []
    for epoch in range(cfg.epochs):
        history, velocity = train_epochs(net, splits.train, cfg, velocity=velocity, epoch_offset=epoch, epochs=1)
        val = evaluate(net, splits.val)
        rows.append(EpochRecord(epoch=epoch, train_loss=history[-1].loss, val_loss=val.loss, val_acc=val.accuracy))
        logger.info(
            f"Baseline epoch {epoch}: train_loss={history[-1].loss:.6f} val_loss={val.loss:.6f} "
            f"val_acc={val.accuracy:.4f}"
        )
    return net, splits, rows


def run_direct(net: Network, config: RunConfig, splits: DataSplits) -> StageOutcome:
    """One-shot pruning of a dense network to the configured budget"""
    budget = budget_for_weights(net.weights(), config.budget)
    return prune_to_rate(net, budget, config.prune_config(), splits, rate=config.budget.rate)


def phase_rows(outcome: StageOutcome) -> List[PhaseRecord]:
    rows = [
        PhaseRecord(phase=MetricPhase.ADMM, step=r.iteration, objective=r.objective, loss=r.loss,
                    mean_rel_residual=r.mean_relative_residual)
        for r in outcome.admm_trace
    ]
    rows += [
        PhaseRecord(phase=MetricPhase.RETRAIN, step=r.epoch, objective=r.train_loss, loss=r.train_loss,
                    val_acc=r.val_accuracy)
        for r in outcome.retrain_trace
    ]
    return rows


def accuracy_drop(baseline: Optional[float], pruned: Optional[float], what: str = "test") -> Optional[float]:
    """Log the accuracy lost against the dense baseline; report only"""
    if baseline is None or pruned is None:
        return None
    drop = baseline - pruned
    level = logging.WARNING if drop > settings.ACCURACY_DROP_TOLERANCE else logging.INFO
    logger.log(level, f"{what} accuracy drop vs dense baseline: {drop:+.4f} "
                      f"(baseline {baseline:.4f}, pruned {pruned:.4f}, tolerance {settings.ACCURACY_DROP_TOLERANCE})")
    return drop
