# ADMM pruning: budgets, cardinality projection, ADMM iterations
from .projection import project_topk, topk_indices
from .budget import SparsityBudget, budget_from_spec
from .pruner import (
    AdmmState, AdmmRecord, admm_iteration, run_admm, augmented_loss,
    augmented_grad, primal_residual, select_rho,
)
