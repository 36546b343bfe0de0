"""
Sparse export of pruned models: ascending flat indices plus values per layer
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Tuple, Union

import numpy as np
from pydantic import BaseModel, ValidationError

from ..errors import CheckpointError, CorruptPayloadError, InvariantError
from ..nn_core.network import Network, Params
from ..pruning.masking import PrunedModel
from ..schemas import LayerSpec
from ..utils import atomic_write_bytes
from .container import pack, unpack

logger = logging.getLogger(__name__)

SPARSE_MAGIC = b"ADMMSPR1"


def index_bits(size: int) -> int:
    """ceil(log2(size)): bits of a fixed-width flat index into a layer of `size` weights"""
    return max(int(size) - 1, 0).bit_length()


@dataclass
class SparseLayer:
    name: str
    shape: Tuple[int, ...]
    indices: np.ndarray  # int64, strictly ascending flat positions
    values: np.ndarray  # float64

    def __post_init__(self):
        size = int(np.prod(self.shape))
        if len(self.indices) != len(self.values):
            raise InvariantError(f"{self.name}: {len(self.indices)} indices for {len(self.values)} values")
        if len(self.indices) and (np.any(np.diff(self.indices) <= 0) or self.indices[0] < 0
                                  or self.indices[-1] >= size):
            raise InvariantError(f"{self.name}: indices must be strictly ascending and below {size}")

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def nnz(self) -> int:
        return len(self.values)

    @property
    def index_bits(self) -> int:
        return index_bits(self.size)

    def dense(self) -> np.ndarray:
        flat = np.zeros(self.size, dtype=np.float64)
        flat[self.indices] = self.values
        return flat.reshape(self.shape)


@dataclass
class SparseModel:
    """A pruned network with weights in sparse form and biases kept dense"""
    architecture: List[LayerSpec]
    input_shape: Tuple[int, ...]
    num_classes: int
    layers: List[SparseLayer]
    biases: Params = field(default_factory=dict)
    weight_bits: int = 64

    @property
    def nnz(self) -> int:
        return sum(layer.nnz for layer in self.layers)


def sparsify(name: str, weight: np.ndarray) -> SparseLayer:
    flat = np.ravel(weight)
    indices = np.flatnonzero(flat).astype(np.int64)
    return SparseLayer(name, tuple(weight.shape), indices, flat[indices].astype(np.float64))


def export_sparse(model: Union[PrunedModel, Network]) -> SparseModel:
    """Exactly the nonzero weights of every layer, in ascending index order"""
    net = model.net if isinstance(model, PrunedModel) else model
    params = net.parameters()
    layers = [sparsify(name, w) for name, w in net.weights().items()]
    biases = {name: value.copy() for name, value in params.items() if name.endswith(".bias")}
    return SparseModel(net.specs(), net.input_shape, net.num_classes, layers, biases)


def reconstruct(sparse: SparseModel) -> Params:
    """Dense weight tensors by name"""
    return {layer.name: layer.dense() for layer in sparse.layers}


def to_network(sparse: SparseModel) -> Network:
    net = Network.from_specs(sparse.architecture, sparse.input_shape, sparse.num_classes)
    params = dict(sparse.biases)
    params.update(reconstruct(sparse))
    net.set_parameters(params)
    return net


class SparseLayerHeader(BaseModel):
    name: str
    shape: List[int]
    nnz: int


class SparseHeader(BaseModel):
    architecture: List[LayerSpec]
    input_shape: List[int]
    num_classes: int
    weight_bits: int
    layers: List[SparseLayerHeader]


def encode_sparse(sparse: SparseModel) -> bytes:
    tensors: Dict[str, np.ndarray] = {}
    for layer in sparse.layers:
        tensors[f"idx/{layer.name}"] = layer.indices
        tensors[f"val/{layer.name}"] = layer.values
    tensors.update({f"bias/{name}": value for name, value in sparse.biases.items()})
    header = SparseHeader(
        architecture=sparse.architecture,
        input_shape=list(sparse.input_shape),
        num_classes=sparse.num_classes,
        weight_bits=sparse.weight_bits,
        layers=[SparseLayerHeader(name=l.name, shape=list(l.shape), nnz=l.nnz) for l in sparse.layers],
    )
    return pack(SPARSE_MAGIC, header.model_dump(mode="json"), tensors)


def decode_sparse(data: bytes) -> SparseModel:
    meta, tensors = unpack(SPARSE_MAGIC, data)
    try:
        header = SparseHeader.model_validate(meta)
        layers = [
            SparseLayer(entry.name, tuple(entry.shape), tensors[f"idx/{entry.name}"], tensors[f"val/{entry.name}"])
            for entry in header.layers
        ]
    except (ValidationError, KeyError, InvariantError) as e:
        raise CorruptPayloadError(f"corrupt payload: {e}") from None
    biases = {name[len("bias/"):]: value for name, value in tensors.items() if name.startswith("bias/")}
    return SparseModel(header.architecture, tuple(header.input_shape), header.num_classes,
                       layers, biases, header.weight_bits)


def save_sparse(sparse: SparseModel, path: Union[str, Path]) -> Path:
    path = atomic_write_bytes(path, encode_sparse(sparse))
    logger.info(f"Sparse model written: {path} ({sparse.nnz} nonzeros in {len(sparse.layers)} layers)")
    return path


def load_sparse(path: Union[str, Path]) -> SparseModel:
    try:
        data = Path(path).read_bytes()
    except OSError as e:
        raise CheckpointError(f"cannot read sparse model {path}: {e.strerror or e}") from e
    return decode_sparse(data)
