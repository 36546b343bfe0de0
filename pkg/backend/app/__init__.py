# ADMM Progressive Pruner
# ADMM weight pruning, masked retraining and pool-based progressive schedules

__version__ = "1.0.0"
