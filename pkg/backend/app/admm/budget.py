"""
Sparsity budgets: per-layer keep counts from keep ratios or a global compression rate
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from ..errors import BudgetError
from ..schemas import BudgetSpec
from ..utils import round_half_up

logger = logging.getLogger(__name__)


@dataclass
class SparsityBudget:
    """Keep count l_i for every prunable layer, aligned with `names`"""
    keep: List[int]
    sizes: List[int]
    names: List[str] = field(default_factory=list)
    rate: Optional[float] = None  # requested global rate, if any

    def __post_init__(self):
        if len(self.keep) != len(self.sizes):
            raise BudgetError(f"{len(self.keep)} keep counts for {len(self.sizes)} layers")
        if not self.names:
            self.names = [str(i) for i in range(len(self.sizes))]
        for name, l, size in zip(self.names, self.keep, self.sizes):
            if not 0 <= l <= size:
                raise BudgetError(f"keep count {l} for {name} outside [0, {size}]")

    def as_dict(self) -> Dict[str, int]:
        return dict(zip(self.names, self.keep))

    @property
    def total_keep(self) -> int:
        return sum(self.keep)

    @property
    def total_params(self) -> int:
        return sum(self.sizes)

    def clamped(self, limits: Sequence[int]) -> "SparsityBudget":
        """Budget whose keep counts never exceed `limits` (e.g. current nonzero counts)"""
        keep = [min(l, int(m)) for l, m in zip(self.keep, limits)]
        return SparsityBudget(keep, list(self.sizes), list(self.names), self.rate)


def _apportion(sizes: Sequence[int], total_keep: int) -> List[int]:
    """Largest-remainder apportionment of total_keep proportional to sizes"""
    total = sum(sizes)
    quotas = [total_keep * s / total for s in sizes]
    keep = [math.floor(q) for q in quotas]
    leftover = total_keep - sum(keep)
    # largest fractional part first, lower index on ties
    order = sorted(range(len(sizes)), key=lambda i: (-(quotas[i] - keep[i]), i))
    for i in order[:leftover]:
        keep[i] += 1
    return keep


def budget_from_spec(sizes: Sequence[int], ratios: Optional[Sequence[float]] = None,
                     rate: Optional[float] = None, names: Optional[Sequence[str]] = None) -> SparsityBudget:
    """
    Build keep counts from exactly one of:
    - ratios: l_i = round(ratio_i * size_i), clamped to [0, size_i]
    - rate:   total keep = round(total / rate), split proportionally to layer
              sizes by largest remainder, with l_i >= 1 for non-empty layers
    """
    sizes = [int(s) for s in sizes]
    names = list(names) if names is not None else []
    if (ratios is None) == (rate is None):
        raise BudgetError("give either per-layer ratios or a global rate")

    if ratios is not None:
        if len(ratios) != len(sizes):
            raise BudgetError(f"{len(ratios)} ratios for {len(sizes)} prunable layers")
        if any(not 0.0 <= r <= 1.0 for r in ratios):
            raise BudgetError("keep ratios must lie in [0, 1]")
        keep = [min(max(round_half_up(r * s), 0), s) for r, s in zip(ratios, sizes)]
        return SparsityBudget(keep, sizes, names)

    if not rate >= 1.0:
        raise BudgetError(f"compression rate must be >= 1, got {rate}")
    total = sum(sizes)
    if total == 0:
        return SparsityBudget([0] * len(sizes), sizes, names, rate)
    keep = _apportion(sizes, round_half_up(total / rate))
    keep = [max(l, 1) if s >= 1 else 0 for l, s in zip(keep, sizes)]
    logger.debug(f"Budget for {rate}x over {total} weights: {keep}")
    return SparsityBudget(keep, sizes, names, rate)


def budget_for_weights(weights: Dict[str, np.ndarray], spec: BudgetSpec) -> SparsityBudget:
    """Budget for a name -> weight-tensor mapping (in layer order)"""
    names = list(weights)
    sizes = [weights[n].size for n in names]
    return budget_from_spec(sizes, ratios=spec.ratios, rate=spec.rate, names=names)
