"""
Euclidean projection onto the cardinality set {X : card(X) <= l}
"""

import numpy as np

from ..errors import BudgetError


def topk_indices(values: np.ndarray, keep: int) -> np.ndarray:
    """
    Flat indices of the `keep` largest-magnitude entries.
    Equal magnitudes are ordered by ascending flat index.
    """
    flat = np.abs(np.ravel(values))
    if not 0 <= keep <= flat.size:
        raise BudgetError(f"keep count {keep} outside [0, {flat.size}]")
    # stable sort of negated magnitudes keeps lower indices first among ties
    return np.argsort(-flat, kind="stable")[:keep]


def project_topk(values: np.ndarray, keep: int) -> np.ndarray:
    """
    Keep the `keep` entries of largest magnitude and zero the rest.

    This is the exact Euclidean projection onto the (non-convex) set of
    tensors with at most `keep` nonzeros: any other support of the same size
    discards at least as much squared mass.
    """
    values = np.asarray(values, dtype=np.float64)
    flat = values.ravel()
    out = np.zeros_like(flat)
    chosen = topk_indices(flat, keep)
    out[chosen] = flat[chosen]
    return out.reshape(values.shape)


def support(values: np.ndarray) -> np.ndarray:
    """0/1 float mask of the nonzero entries"""
    return (np.asarray(values) != 0).astype(np.float64)
