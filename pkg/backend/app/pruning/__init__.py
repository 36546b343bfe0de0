# Mask update, masked retraining, the stage pipeline and the progressive pool
from .masking import PrunedModel, RetrainResult, compression_rate, update_masks, masked_retrain
from .pipeline import DataSplits, StageOutcome, prune_to_rate
from .progressive import (
    PoolEntry, PruningPool, ProgressiveResult, seed_pool, select_parent, advance, run_progressive,
)
