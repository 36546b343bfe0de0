"""
Checkpoint Persistence
Networks, masks, budgets, ADMM state and run metadata in the ADMMPRN1 container
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np
from pydantic import BaseModel, Field, ValidationError

from ..admm.budget import SparsityBudget
from ..admm.pruner import AdmmState
from ..errors import CheckpointError, CorruptPayloadError
from ..nn_core.network import Network, Params
from ..pruning.masking import PrunedModel
from ..schemas import LayerSpec
from ..utils import atomic_write_bytes
from .container import pack, unpack

logger = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"ADMMPRN1"


class CheckpointMeta(BaseModel):
    """Run metadata carried alongside the tensors"""
    seed: Optional[int] = None
    stage: str = "dense"  # dense | direct | progressive | seed | advance
    rate: float = Field(1.0, ge=1.0, description="Nominal compression rate")
    val_accuracy: Optional[float] = None
    test_accuracy: Optional[float] = None
    baseline_val_accuracy: Optional[float] = None
    baseline_test_accuracy: Optional[float] = None
    lineage: List[float] = Field(default_factory=list)


class BudgetHeader(BaseModel):
    keep: List[int]
    sizes: List[int]
    names: List[str]
    rate: Optional[float] = None


class AdmmStateHeader(BaseModel):
    rho: Dict[str, float]
    keep: Dict[str, int]
    k: int
    has_velocity: bool = False


class CheckpointHeader(BaseModel):
    architecture: List[LayerSpec]
    input_shape: List[int]
    num_classes: int
    metadata: CheckpointMeta = Field(default_factory=CheckpointMeta)
    budget: Optional[BudgetHeader] = None
    admm_state: Optional[AdmmStateHeader] = None
    has_masks: bool = False


@dataclass
class Checkpoint:
    net: Network
    masks: Optional[Dict[str, np.ndarray]] = None
    budget: Optional[SparsityBudget] = None
    admm_state: Optional[AdmmState] = None
    metadata: CheckpointMeta = field(default_factory=CheckpointMeta)

    @classmethod
    def from_model(cls, model: PrunedModel, metadata: Optional[CheckpointMeta] = None,
                   admm_state: Optional[AdmmState] = None) -> "Checkpoint":
        return cls(model.net, model.masks, model.budget, admm_state, metadata or CheckpointMeta())

    @property
    def is_pruned(self) -> bool:
        return self.masks is not None

    def pruned_model(self) -> PrunedModel:
        """
        The checkpoint as a PrunedModel. A dense checkpoint becomes a model
        with all-ones masks and a budget equal to its current nonzero counts.
        """
        weights = self.net.weights()
        masks = self.masks or {name: np.ones_like(w) for name, w in weights.items()}
        budget = self.budget or SparsityBudget(
            keep=[int(np.count_nonzero(w)) for w in weights.values()],
            sizes=[w.size for w in weights.values()],
            names=list(weights),
        )
        return PrunedModel(self.net, masks, budget)


def encode_checkpoint(ckpt: Checkpoint) -> bytes:
    net = ckpt.net
    tensors: Dict[str, np.ndarray] = {f"param/{name}": value for name, value in net.parameters().items()}
    if ckpt.masks is not None:
        tensors.update({f"mask/{name}": value for name, value in ckpt.masks.items()})

    state_header = None
    if ckpt.admm_state is not None:
        state = ckpt.admm_state
        tensors.update({f"admm/Z/{name}": value for name, value in state.Z.items()})
        tensors.update({f"admm/U/{name}": value for name, value in state.U.items()})
        if state.velocity is not None:
            tensors.update({f"admm/V/{name}": value for name, value in state.velocity.items()})
        state_header = AdmmStateHeader(rho=state.rho, keep=state.keep, k=state.k,
                                       has_velocity=state.velocity is not None)

    budget_header = None
    if ckpt.budget is not None:
        b = ckpt.budget
        budget_header = BudgetHeader(keep=b.keep, sizes=b.sizes, names=b.names, rate=b.rate)

    header = CheckpointHeader(
        architecture=net.specs(),
        input_shape=list(net.input_shape),
        num_classes=net.num_classes,
        metadata=ckpt.metadata,
        budget=budget_header,
        admm_state=state_header,
        has_masks=ckpt.masks is not None,
    )
    return pack(CHECKPOINT_MAGIC, header.model_dump(mode="json"), tensors)


def _group(tensors: Dict[str, np.ndarray], prefix: str) -> Params:
    return {name[len(prefix):]: value for name, value in tensors.items() if name.startswith(prefix)}


def decode_checkpoint(data: bytes) -> Checkpoint:
    meta, tensors = unpack(CHECKPOINT_MAGIC, data)
    try:
        header = CheckpointHeader.model_validate(meta)
    except ValidationError as e:
        raise CorruptPayloadError(f"corrupt payload: bad checkpoint header ({e.error_count()} errors)") from None

    net = Network.from_specs(header.architecture, header.input_shape, header.num_classes)
    params = _group(tensors, "param/")
    if set(params) != set(net.parameters()):
        raise CorruptPayloadError(
            f"corrupt payload: parameters {sorted(params)} do not match architecture {sorted(net.parameters())}"
        )
    try:
        net.set_parameters(params)
    except ValueError as e:
        raise CorruptPayloadError(f"corrupt payload: {e}") from None

    weight_shapes = {name: w.shape for name, w in net.weights().items()}

    def checked(group: Params, what: str) -> Params:
        if set(group) != set(weight_shapes) or any(v.shape != weight_shapes[k] for k, v in group.items()):
            raise CorruptPayloadError(f"corrupt payload: {what} tensors do not match the weights")
        return group

    masks = checked(_group(tensors, "mask/"), "mask") if header.has_masks else None

    state = None
    if header.admm_state is not None:
        s = header.admm_state
        velocity = _group(tensors, "admm/V/") if s.has_velocity else None
        state = AdmmState(
            Z=checked(_group(tensors, "admm/Z/"), "ADMM Z"),
            U=checked(_group(tensors, "admm/U/"), "ADMM U"),
            rho=dict(s.rho),
            keep=dict(s.keep),
            k=s.k,
            velocity=velocity,
        )

    budget = None
    if header.budget is not None:
        b = header.budget
        budget = SparsityBudget(list(b.keep), list(b.sizes), list(b.names), b.rate)

    return Checkpoint(net, masks, budget, state, header.metadata)


def save_checkpoint(ckpt: Checkpoint, path: Union[str, Path]) -> Path:
    path = atomic_write_bytes(path, encode_checkpoint(ckpt))
    logger.info(f"Checkpoint written: {path} ({ckpt.metadata.stage}, {ckpt.metadata.rate:g}x)")
    return path


def load_checkpoint(path: Union[str, Path]) -> Checkpoint:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise CheckpointError(f"cannot read checkpoint {path}: {e.strerror or e}") from e
    try:
        ckpt = decode_checkpoint(data)
    except CheckpointError as e:
        logger.error(f"{path}: {e}")
        raise
    logger.info(f"Loaded checkpoint {path}: {ckpt.net.weight_count()} weights, stage={ckpt.metadata.stage}")
    return ckpt


