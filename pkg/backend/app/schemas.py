"""
Pydantic Schemas for run configuration and emitted records
"""

from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Set

from pydantic import BaseModel, Field, PrivateAttr, field_validator, model_validator

from .config import get_settings
from .utils import derive_seed

settings = get_settings()


class LayerKind(str, Enum):
    DENSE = "dense"
    CONV2D = "conv2d"
    RELU = "relu"
    FLATTEN = "flatten"


class StageKind(str, Enum):
    SEED = "seed"
    ADVANCE = "advance"


class IndexMode(str, Enum):
    """How sparse indices are accounted for in storage reports"""
    FIXED = "fixed"  # ceil(log2(layer size)) bits per nonzero
    RELATIVE = "relative"  # fixed-width gaps with filler entries


class ProgressiveMode(str, Enum):
    SELECT_FIRST = "select_first"  # pick the parent, extend only it
    EXHAUSTIVE = "exhaustive"  # extend every entry, keep the best


class DatasetKind(str, Enum):
    IDX = "idx"
    SYNTHETIC = "synthetic"


class MetricPhase(str, Enum):
    ADMM = "admm"
    RETRAIN = "retrain"


# ============ Network Schemas ============

class LayerSpec(BaseModel):
    """Architecture description of one layer"""
    kind: LayerKind
    in_features: Optional[int] = Field(None, gt=0)
    out_features: Optional[int] = Field(None, gt=0)
    in_channels: Optional[int] = Field(None, gt=0)
    out_channels: Optional[int] = Field(None, gt=0)
    kernel_h: Optional[int] = Field(None, gt=0)
    kernel_w: Optional[int] = Field(None, gt=0)
    stride: int = Field(1, gt=0)
    padding: int = Field(0, ge=0)

    @model_validator(mode="after")
    def check_kind_fields(self) -> "LayerSpec":
        required = {
            LayerKind.DENSE: ("in_features", "out_features"),
            LayerKind.CONV2D: ("in_channels", "out_channels", "kernel_h", "kernel_w"),
        }.get(self.kind, ())
        missing = [name for name in required if getattr(self, name) is None]
        if missing:
            raise ValueError(f"{self.kind.value} layer requires {', '.join(missing)}")
        return self


class ArchitectureSpec(BaseModel):
    """Either a named preset (shaped by the dataset) or an explicit layer list"""
    preset: Optional[str] = Field("mlp-300-100", description="mlp-300-100 | lenet5-like")
    layers: Optional[List[LayerSpec]] = None

    @model_validator(mode="after")
    def check_source(self) -> "ArchitectureSpec":
        if self.layers:
            self.preset = None
        elif self.preset not in ("mlp-300-100", "lenet5-like"):
            raise ValueError(f"unknown architecture preset: {self.preset!r}")
        return self


# ============ Optimizer Schemas ============

class SgdConfig(BaseModel):
    """Momentum SGD settings for one pipeline stage"""
    learning_rate: float = Field(..., gt=0)
    momentum: float = Field(default_factory=lambda: settings.SGD_MOMENTUM, ge=0, lt=1)
    batch_size: int = Field(default_factory=lambda: settings.BATCH_SIZE, gt=0)
    epochs: int = Field(..., ge=0)
    seed: int = Field(default_factory=lambda: settings.DEFAULT_SEED, ge=0, lt=2 ** 64)
    decay_milestones: List[float] = Field(default_factory=list, description="Fractions of the epoch budget")
    decay_factor: float = Field(default_factory=lambda: settings.RETRAIN_DECAY_FACTOR, gt=0, le=1)

    @field_validator("decay_milestones")
    @classmethod
    def check_milestones(cls, value: List[float]) -> List[float]:
        if any(not 0 < m <= 1 for m in value):
            raise ValueError("decay milestones must lie in (0, 1]")
        return sorted(value)

    def lr_at(self, epoch: int) -> float:
        """Step-decayed learning rate for a zero-based epoch index"""
        passed = sum(1 for m in self.decay_milestones if epoch >= int(m * self.epochs))
        return self.learning_rate * self.decay_factor ** passed


def baseline_sgd() -> SgdConfig:
    return SgdConfig(learning_rate=settings.BASELINE_LEARNING_RATE, epochs=settings.BASELINE_EPOCHS)


def admm_sgd() -> SgdConfig:
    return SgdConfig(learning_rate=settings.ADMM_LEARNING_RATE, epochs=settings.ADMM_EPOCHS_PER_ITERATION)


def retrain_sgd() -> SgdConfig:
    return SgdConfig(
        learning_rate=settings.RETRAIN_LEARNING_RATE,
        epochs=settings.RETRAIN_EPOCHS,
        decay_milestones=list(settings.RETRAIN_DECAY_MILESTONES),
    )


class AdmmHyper(BaseModel):
    """ADMM penalty parameters and iteration budget"""
    rho: float = Field(default_factory=lambda: settings.ADMM_RHO, gt=0)
    rho_high: float = Field(default_factory=lambda: settings.ADMM_RHO_HIGH, gt=0)
    rho_switch_rate: float = Field(default_factory=lambda: settings.ADMM_RHO_SWITCH_RATE, ge=1)
    admm_iterations: int = Field(default_factory=lambda: settings.ADMM_ITERATIONS, gt=0)
    sgd: SgdConfig = Field(default_factory=admm_sgd)


# ============ Pruning Schemas ============

class BudgetSpec(BaseModel):
    """Per-layer keep ratios or one global compression rate"""
    ratios: Optional[List[float]] = None
    rate: Optional[float] = 10.0

    @model_validator(mode="after")
    def check_mode(self) -> "BudgetSpec":
        if self.ratios is not None:
            self.rate = None
            if any(not 0.0 <= r <= 1.0 for r in self.ratios):
                raise ValueError("keep ratios must lie in [0, 1]")
        elif self.rate is None:
            raise ValueError("either ratios or rate is required")
        elif self.rate < 1.0:
            raise ValueError("compression rate must be >= 1")
        return self


class Schedule(BaseModel):
    """Seed rates build the pool from the dense model; targets are reached by advancing it"""
    seeds: List[float] = Field(default_factory=lambda: list(settings.SEED_RATES), min_length=1)
    targets: List[float] = Field(default_factory=lambda: list(settings.TARGET_RATES))

    @model_validator(mode="after")
    def check_ascent(self) -> "Schedule":
        rates = list(self.seeds) + list(self.targets)
        if rates[0] < 1.0:
            raise ValueError("rates must be >= 1")
        if any(b <= a for a, b in zip(rates, rates[1:])):
            raise ValueError("seed and target rates must be strictly ascending")
        return self


class ProgressiveConfig(BaseModel):
    capacity: int = Field(default_factory=lambda: settings.POOL_CAPACITY, ge=1)
    mode: ProgressiveMode = ProgressiveMode.SELECT_FIRST


class PruneConfig(BaseModel):
    """Everything one pruning stage (ADMM, masks, retraining) needs"""
    admm: AdmmHyper = Field(default_factory=AdmmHyper)
    retrain: SgdConfig = Field(default_factory=retrain_sgd)
    progressive: ProgressiveConfig = Field(default_factory=ProgressiveConfig)

    def stage_epochs(self) -> int:
        return self.admm.admm_iterations * self.admm.sgd.epochs + self.retrain.epochs


# ============ Run Configuration ============

class DatasetSpec(BaseModel):
    kind: DatasetKind = DatasetKind.SYNTHETIC
    train_images: Optional[Path] = None
    train_labels: Optional[Path] = None
    test_images: Optional[Path] = None
    test_labels: Optional[Path] = None
    num_classes: int = Field(10, ge=2)
    # synthetic blobs
    n: int = Field(2000, gt=0)
    test_n: int = Field(500, ge=0)
    dim: int = Field(20, gt=0)
    spread: float = Field(0.05, ge=0)
    val_fraction: float = Field(default_factory=lambda: settings.VAL_FRACTION, gt=0, lt=1)
    seed: Optional[int] = Field(None, ge=0, lt=2 ** 64, description="Data seed; independent of the run seed")

    @model_validator(mode="after")
    def check_files(self) -> "DatasetSpec":
        if self.kind == DatasetKind.IDX:
            if self.train_images is None or self.train_labels is None:
                raise ValueError("idx datasets need train_images and train_labels")
            for path in (self.train_images, self.train_labels, self.test_images, self.test_labels):
                if path is not None and not Path(path).exists():
                    raise ValueError(f"dataset file not found: {path}")
        elif self.n < self.num_classes:
            raise ValueError("synthetic datasets need n >= num_classes")
        return self


class ReportSpec(BaseModel):
    weight_bits: int = Field(default_factory=lambda: settings.REPORT_WEIGHT_BITS, ge=1, le=64)
    index_mode: IndexMode = IndexMode.FIXED
    relative_index_bits: int = Field(default_factory=lambda: settings.RELATIVE_INDEX_BITS, ge=1, le=32)
    layer_bits: Dict[str, int] = Field(default_factory=dict, description="Per-weight-name overrides")


class CompareSpec(BaseModel):
    seeds: List[int] = Field(default_factory=lambda: [1, 2, 3], min_length=1)


class RunConfig(BaseModel):
    """Single JSON document driving every CLI command"""
    dataset: DatasetSpec = Field(default_factory=DatasetSpec)
    architecture: ArchitectureSpec = Field(default_factory=ArchitectureSpec)
    baseline: SgdConfig = Field(default_factory=baseline_sgd)
    admm: AdmmHyper = Field(default_factory=AdmmHyper)
    retrain: SgdConfig = Field(default_factory=retrain_sgd)
    budget: BudgetSpec = Field(default_factory=BudgetSpec)
    schedule: Schedule = Field(default_factory=Schedule)
    progressive: ProgressiveConfig = Field(default_factory=ProgressiveConfig)
    report: ReportSpec = Field(default_factory=ReportSpec)
    compare: CompareSpec = Field(default_factory=CompareSpec)
    output_dir: Path = Field(default_factory=lambda: settings.OUTPUT_PATH)
    seed: int = Field(default_factory=lambda: settings.DEFAULT_SEED, ge=0, lt=2 ** 64)

    # stage seeds given explicitly in the document; fixed at validation time
    _explicit_seeds: Set[str] = PrivateAttr(default_factory=set)

    def model_post_init(self, __context: Any) -> None:
        self._explicit_seeds = {tag for tag, sgd in self._stage_sgd().items() if "seed" in sgd.model_fields_set}

    def _stage_sgd(self) -> Dict[str, SgdConfig]:
        return {"baseline": self.baseline, "admm": self.admm.sgd, "retrain": self.retrain}

    def with_seed(self, seed: Optional[int] = None) -> "RunConfig":
        """
        Return a copy whose stage seeds are derived from the run seed.
        Stage seeds written explicitly in the JSON document are kept.
        """
        config = self.model_copy(deep=True)
        if seed is not None:
            config.seed = seed
        for tag, sgd in config._stage_sgd().items():
            if tag not in self._explicit_seeds:
                sgd.seed = derive_seed(config.seed, tag)
        return config

    def prune_config(self) -> PruneConfig:
        return PruneConfig(admm=self.admm, retrain=self.retrain, progressive=self.progressive)


# ============ Metric Records ============

class EpochRecord(BaseModel):
    epoch: int
    train_loss: float
    val_loss: float
    val_acc: float


class PhaseRecord(BaseModel):
    """One row of a direct-pruning metrics file (ADMM iteration or retrain epoch)"""
    phase: MetricPhase
    step: int
    objective: float
    loss: float
    mean_rel_residual: Optional[float] = None
    val_acc: Optional[float] = None


class StageRecord(BaseModel):
    stage_index: int
    stage_kind: StageKind
    parent_rate: float
    target_rate: float
    epochs_used: int
    final_loss: float
    val_accuracy: float
    test_accuracy: Optional[float] = None


class ComparisonRecord(BaseModel):
    seed: int
    method: str
    final_rate: float
    total_epochs: int
    final_train_loss: float
    val_accuracy: float
    test_accuracy: Optional[float] = None


class CurvePoint(BaseModel):
    method: str
    seed: int
    epoch: int
    train_loss: float


class EvalRecord(BaseModel):
    split: str
    samples: int
    loss: float
    accuracy: float


# ============ Storage Report ============

class LayerStorage(BaseModel):
    name: str
    size: int
    nnz: int
    weight_bits: int
    index_bits: int
    entries: int  # nnz plus filler entries in relative mode
    data_bytes: int
    index_bytes: int


class StorageReport(BaseModel):
    """Storage accounting of a (possibly pruned) model"""
    total_params: int
    total_nnz: int
    rate: float
    weight_bits: int
    index_mode: IndexMode
    data_bytes: int
    index_bytes: int
    total_bytes: int  # data + index
    layers: List[LayerStorage] = []
