"""
SGD Trainer
Momentum SGD with optional gradient masking, deterministic batching and evaluation
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, NamedTuple, Optional, Tuple

import numpy as np

from ..config import get_settings
from ..errors import EmptyDatasetError, InvariantError, NumericError, ShapeMismatchError
from ..schemas import SgdConfig
from ..utils import chunk_indices, derive_seed, permutation
from .network import Network, Params

settings = get_settings()
logger = logging.getLogger(__name__)

GradientMask = Dict[str, np.ndarray]


class StepOutput(NamedTuple):
    """Result of one objective evaluation on a batch"""
    objective: float  # value being minimised
    loss: float  # plain cross-entropy part
    grads: Params


Objective = Callable[[Network, np.ndarray, np.ndarray], StepOutput]


class Evaluation(NamedTuple):
    loss: float
    accuracy: float


@dataclass
class EpochStats:
    epoch: int
    learning_rate: float
    objective: float
    loss: float


def plain_objective(net: Network, inputs: np.ndarray, labels: np.ndarray) -> StepOutput:
    loss, grads = net.loss_and_grad(inputs, labels)
    return StepOutput(loss, loss, grads)


def apply_gradient_mask(grads: Params, mask: GradientMask) -> Params:
    """
    Zero the gradient entries whose mask is 0.
    Parameters without a mask entry (biases, unmasked layers) pass through.
    """
    masked = dict(grads)
    for name, keep in mask.items():
        if name not in grads:
            raise ShapeMismatchError(f"mask names unknown parameter {name!r}")
        if keep.shape != grads[name].shape:
            raise ShapeMismatchError(f"mask for {name} has shape {keep.shape}, gradient {grads[name].shape}")
        # where() yields +0.0 at masked entries, so masked weights stay bit-identical
        masked[name] = np.where(keep != 0, grads[name], 0.0)
    return masked


def zero_velocity(params: Params) -> Params:
    return {name: np.zeros_like(value) for name, value in params.items()}


def sgd_step(params: Params, grads: Params, cfg: SgdConfig, velocity: Params,
             learning_rate: Optional[float] = None) -> Tuple[Params, Params]:
    """
    One momentum SGD step: v <- momentum * v + g ; w <- w - lr * v.
    Returns new parameter and velocity dictionaries; inputs are not modified.
    """
    lr = cfg.learning_rate if learning_rate is None else learning_rate
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient for {name}; step aborted")

    new_params: Params = {}
    new_velocity: Params = {}
    for name, w in params.items():
        if w.shape != grads[name].shape:
            raise ShapeMismatchError(f"gradient for {name} has shape {grads[name].shape}, parameter {w.shape}")
        v = cfg.momentum * velocity[name] + grads[name]
        new_velocity[name] = v
        new_params[name] = w - lr * v
    return new_params, new_velocity


def epoch_order(n: int, seed: int, epoch: int) -> np.ndarray:
    """Sample order for one epoch (splitmix64 shuffle seeded by run seed and epoch)"""
    return permutation(derive_seed(seed, "epoch", epoch), n)


def check_masked_zero(net: Network, mask: GradientMask):
    """Raise if any masked-out weight is not exactly zero"""
    weights = net.weights()
    for name, keep in mask.items():
        leaked = np.count_nonzero(weights[name][keep == 0])
        if leaked:
            raise InvariantError(f"{leaked} pruned weights of {name} became nonzero")


def train_epochs(net: Network, dataset, cfg: SgdConfig, objective: Objective = plain_objective,
                 mask: Optional[GradientMask] = None, velocity: Optional[Params] = None,
                 epoch_offset: int = 0, epochs: Optional[int] = None) -> Tuple[List[EpochStats], Params]:
    """
    Run `epochs` (default `cfg.epochs`) epochs of momentum SGD on `objective`,
    updating `net` in place.

    The epoch index used for the learning-rate schedule and shuffling is
    `epoch_offset + local epoch`, so a caller can split one schedule across
    several calls. Returns per-epoch means and the final velocity.
    """
    if len(dataset) == 0:
        raise EmptyDatasetError("cannot train on an empty dataset")
    if velocity is None:
        velocity = zero_velocity(net.parameters())

    history: List[EpochStats] = []
    for local in range(cfg.epochs if epochs is None else epochs):
        epoch = epoch_offset + local
        lr = cfg.lr_at(epoch)
        order = epoch_order(len(dataset), cfg.seed, epoch)
        objective_sum = 0.0
        loss_sum = 0.0
        for batch in chunk_indices(order, cfg.batch_size):
            inputs, labels = dataset.inputs[batch], dataset.labels[batch]
            step = objective(net, inputs, labels)
            if not (np.isfinite(step.objective) and np.isfinite(step.loss)):
                raise NumericError(f"non-finite loss at epoch {epoch}")
            grads = apply_gradient_mask(step.grads, mask) if mask else step.grads
            params, velocity = sgd_step(net.parameters(), grads, cfg, velocity, learning_rate=lr)
            net.set_parameters(params)
            if mask and settings.DEBUG:
                check_masked_zero(net, mask)
            objective_sum += step.objective * len(batch)
            loss_sum += step.loss * len(batch)

        if mask:
            check_masked_zero(net, mask)
        stats = EpochStats(epoch, lr, objective_sum / len(dataset), loss_sum / len(dataset))
        history.append(stats)
        logger.debug(f"epoch {epoch}: lr={lr:.2e} objective={stats.objective:.6f} loss={stats.loss:.6f}")
    return history, velocity


def evaluate(net: Network, dataset, batch_size: Optional[int] = None) -> Evaluation:
    """Mean loss and argmax accuracy over the whole dataset"""
    n = len(dataset)
    if n == 0:
        raise EmptyDatasetError("cannot evaluate on an empty dataset")
    batch_size = batch_size or settings.EVAL_BATCH_SIZE
    loss_sum = 0.0
    correct = 0
    for start in range(0, n, batch_size):
        inputs = dataset.inputs[start:start + batch_size]
        labels = dataset.labels[start:start + batch_size]
        loss, cache = net.forward(inputs, labels)
        loss_sum += loss * len(labels)
        correct += int(np.count_nonzero(np.argmax(cache.probs, axis=1) == labels))
    return Evaluation(loss_sum / n, correct / n)
