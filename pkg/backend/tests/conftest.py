"""
Shared fixtures and helpers: tiny synthetic datasets, tiny networks, fast hyperparameters
and central-difference gradients
"""

import sys
from pathlib import Path

import numpy as np
import pytest

# Add backend directory to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from app.data_io.datasets import split, synthetic_blobs
from app.nn_core.network import Network
from app.pruning.pipeline import DataSplits
from app.schemas import (
    AdmmHyper, LayerKind, LayerSpec, ProgressiveConfig, PruneConfig, SgdConfig,
)


def dense(i, o):
    return LayerSpec(kind=LayerKind.DENSE, in_features=i, out_features=o)


RELU = LayerSpec(kind=LayerKind.RELU)


@pytest.fixture
def blobs():
    return synthetic_blobs(seed=7, n=240, classes=3, dim=6, spread=0.05)


@pytest.fixture
def splits(blobs):
    full, test = split(blobs, 0.25, seed=11)
    train, val = split(full, 0.2, seed=12)
    return DataSplits(train, val, test)


@pytest.fixture
def tiny_net():
    return Network.from_specs([dense(6, 12), RELU, dense(12, 8), RELU, dense(8, 3)], (6,), 3, seed=1)


@pytest.fixture
def fast_sgd():
    return SgdConfig(learning_rate=0.1, epochs=3, batch_size=16, seed=3)


@pytest.fixture
def fast_hyper():
    return AdmmHyper(
        admm_iterations=3,
        sgd=SgdConfig(learning_rate=0.01, epochs=1, batch_size=16, seed=4),
    )


@pytest.fixture
def fast_prune(fast_hyper):
    return PruneConfig(
        admm=fast_hyper,
        retrain=SgdConfig(learning_rate=0.02, epochs=2, batch_size=16, seed=5, decay_milestones=[0.5]),
        progressive=ProgressiveConfig(capacity=3),
    )


def numeric_gradients(net, loss, h=1e-6):
    """Central differences of `loss()` with respect to every parameter of `net`"""
    grads = {}
    for name, value in net.parameters().items():
        g = np.zeros_like(value)
        for j in range(value.size):
            plus = value.copy()
            plus.flat[j] += h
            net.set_parameters({name: plus})
            up = loss()
            minus = value.copy()
            minus.flat[j] -= h
            net.set_parameters({name: minus})
            down = loss()
            g.flat[j] = (up - down) / (2 * h)
        net.set_parameters({name: value})
        grads[name] = g
    return grads


def relative_error(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(a) + np.linalg.norm(b), 1e-12)
