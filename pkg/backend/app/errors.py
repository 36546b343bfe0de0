"""
Exception hierarchy for the pruning pipelines
"""


class PruningError(Exception):
    """Base class for all errors raised by the package"""


class ShapeMismatchError(PruningError, ValueError):
    """A tensor does not have the shape its layer or partner tensor requires"""


class StaleCacheError(PruningError):
    """Backward pass requested with a cache produced before the network changed"""


class NumericError(PruningError, ArithmeticError):
    """Non-finite loss or gradient encountered"""


class BudgetError(PruningError, ValueError):
    """Invalid keep ratio, compression rate or keep count"""


class EmptyDatasetError(PruningError, ValueError):
    """An operation needs at least one sample"""


class DatasetFormatError(PruningError, ValueError):
    """Malformed dataset file"""


class ConfigError(PruningError, ValueError):
    """Invalid run configuration or usage"""


class InvariantError(PruningError, AssertionError):
    """A sparsity or mask invariant was violated"""


class CheckpointError(PruningError, IOError):
    """Checkpoint or sparse export could not be read"""


class CorruptPayloadError(CheckpointError):
    """File is truncated, has an unknown layout or fails its checksum"""


class VersionMismatchError(CheckpointError):
    """File was written by a newer format version"""
