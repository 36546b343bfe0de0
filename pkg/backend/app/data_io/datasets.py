"""
In-memory classification datasets, the synthetic blob generator and seeded splits
"""

import logging
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from ..errors import EmptyDatasetError, ShapeMismatchError
from ..utils import derive_seed, normal, permutation, round_half_up, uniform

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Dataset:
    """
    Immutable labelled samples.
    - inputs: float64 array [n, features...] with values in [0, 1]
    - labels: int64 array [n] with values in [0, num_classes)
    """
    inputs: np.ndarray
    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        if len(self.inputs) != len(self.labels):
            raise ShapeMismatchError(f"{len(self.inputs)} inputs but {len(self.labels)} labels")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise ValueError(f"labels must lie in [0, {self.num_classes})")
        self.inputs.setflags(write=False)
        self.labels.setflags(write=False)

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def sample_shape(self) -> Tuple[int, ...]:
        return tuple(self.inputs.shape[1:])

    def subset(self, indices: np.ndarray) -> "Dataset":
        return Dataset(self.inputs[indices].copy(), self.labels[indices].copy(), self.num_classes)

    def reshaped(self, sample_shape: Sequence[int]) -> "Dataset":
        """Same samples with a different per-sample shape (e.g. adding a channel axis)"""
        if int(np.prod(sample_shape)) != int(np.prod(self.sample_shape)):
            raise ShapeMismatchError(f"cannot reshape samples {self.sample_shape} to {tuple(sample_shape)}")
        inputs = self.inputs.reshape((len(self),) + tuple(sample_shape)).copy()
        return Dataset(inputs, self.labels.copy(), self.num_classes)


def synthetic_blobs(seed: int, n: int, classes: int, dim: int, spread: float) -> Dataset:
    """
    Gaussian blobs around seeded class means, clipped to [0, 1].

    Means are drawn uniformly from [0.2, 0.8]^dim; labels cycle through the
    classes before a seeded shuffle, so every class appears when n >= classes.
    With spread = 0 every class collapses onto its mean.
    """
    if classes < 2 or n < classes or dim < 1:
        raise ValueError(f"invalid blob sizes: n={n}, classes={classes}, dim={dim}")
    if spread < 0:
        raise ValueError("spread must be non-negative")

    means = uniform(derive_seed(seed, "means"), (classes, dim), 0.2, 0.8)
    labels = (np.arange(n) % classes)[permutation(derive_seed(seed, "labels"), n)].astype(np.int64)
    noise = normal(derive_seed(seed, "noise"), (n, dim)) * spread
    inputs = np.clip(means[labels] + noise, 0.0, 1.0)
    return Dataset(inputs, labels, classes)


def split(dataset: Dataset, val_fraction: float, seed: int) -> Tuple[Dataset, Dataset]:
    """Seeded disjoint split; the first part holds round(n * (1 - fraction)) samples"""
    if not 0.0 < val_fraction < 1.0:
        raise ValueError(f"split fraction must lie in (0, 1), got {val_fraction}")
    if len(dataset) == 0:
        raise EmptyDatasetError("cannot split an empty dataset")
    order = permutation(derive_seed(seed, "split"), len(dataset))
    n_train = round_half_up(len(dataset) * (1.0 - val_fraction))
    train_idx = np.sort(order[:n_train])
    val_idx = np.sort(order[n_train:])
    logger.info(f"Split {len(dataset)} samples into {len(train_idx)} train / {len(val_idx)} validation")
    return dataset.subset(train_idx), dataset.subset(val_idx)
