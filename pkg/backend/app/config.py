"""
ADMM Pruner Configuration Module
Contains all system settings and the hyperparameter defaults used by the pipelines
"""

import os
from pathlib import Path
from pydantic_settings import BaseSettings
from typing import List
from functools import lru_cache


class Settings(BaseSettings):
    """Application settings with environment variable support"""

    # Application
    APP_NAME: str = "ADMM Progressive Pruner"
    APP_VERSION: str = "1.0.0"
    DEBUG: bool = False  # check sparsity after every SGD step instead of every epoch
    LOG_LEVEL: str = "INFO"

    # Runtime
    PRUNE_THREADS: int = 0  # 0 = one worker per CPU
    ENABLE_CONV: bool = True
    OUTPUT_PATH: Path = Path("./runs")
    DEFAULT_SEED: int = 20181015

    # SGD defaults
    SGD_MOMENTUM: float = 0.9
    BATCH_SIZE: int = 64
    EVAL_BATCH_SIZE: int = 1000
    BASELINE_LEARNING_RATE: float = 0.05
    BASELINE_EPOCHS: int = 10

    # ADMM defaults
    ADMM_RHO: float = 1.5e-3
    ADMM_RHO_HIGH: float = 3.0e-3
    ADMM_RHO_SWITCH_RATE: float = 25.0
    ADMM_ITERATIONS: int = 12
    ADMM_LEARNING_RATE: float = 1.0e-3
    ADMM_EPOCHS_PER_ITERATION: int = 1

    # Masked retraining
    RETRAIN_LEARNING_RATE: float = 1.0e-2
    RETRAIN_EPOCHS: int = 30
    RETRAIN_DECAY_MILESTONES: List[float] = [0.5, 0.75]
    RETRAIN_DECAY_FACTOR: float = 0.1

    # Progressive schedule
    VAL_FRACTION: float = 0.1
    POOL_CAPACITY: int = 3
    SEED_RATES: List[float] = [5.0, 8.0, 10.0]
    TARGET_RATES: List[float] = [20.0, 30.0, 40.0]

    # Acceptance thresholds (pilot-run values)
    RESIDUAL_RATIO_TARGET: float = 0.5
    ACCURACY_DROP_TOLERANCE: float = 0.01

    # Serialization
    CHECKPOINT_FORMAT_VERSION: int = 1
    METRICS_SCHEMA_VERSION: int = 1
    REPORT_WEIGHT_BITS: int = 32
    RELATIVE_INDEX_BITS: int = 5

    class Config:
        env_file = ".env"
        case_sensitive = True

    def worker_count(self) -> int:
        """Resolve PRUNE_THREADS to a concrete worker count"""
        if self.PRUNE_THREADS > 0:
            return self.PRUNE_THREADS
        return os.cpu_count() or 1


@lru_cache()
def get_settings() -> Settings:
    """Get cached settings instance"""
    return Settings()
