"""Simulator and verification suite for a tissue-scale tumor/normal-cell
model under localized chemotherapy infusion.

Two solution paths (direct method-of-lines integration and a
fixed-point iteration on the drug trajectory with closed-form cell
responses) plus executable audits of every proved solution bound.
"""

__version__ = "0.1.0"

from .domain import Grid, Region, build_grid, indicator, laplacian
from .errors import ChemoSimError
from .kernels import (
    DrugHistory,
    KernelConstants,
    bound_envelope,
    lambda_op,
    lipschitz_constants,
    theta_op,
)
from .params import (
    ModelParams,
    drug_ceiling,
    equilibrium_no_treatment,
    validate_params,
)
from .scenarios import (
    OutcomeReport,
    ScenarioSpec,
    base_params,
    builtin_scenario,
    classify_outcome,
    run_scenario,
    run_scenario_picard,
)
from .solver import (
    SolverConfig,
    State,
    StateTrajectory,
    integrate_mol,
    picard_solve,
    rhs,
)
from .verify import (
    AuditReport,
    audit_bounds,
    audit_lipschitz,
    audit_ratio_lemma,
    oracle_kernels,
)

__all__ = [
    "__version__",
    "Grid", "Region", "build_grid", "indicator", "laplacian",
    "ChemoSimError",
    "DrugHistory", "KernelConstants", "bound_envelope", "lambda_op",
    "lipschitz_constants", "theta_op",
    "ModelParams", "drug_ceiling", "equilibrium_no_treatment", "validate_params",
    "OutcomeReport", "ScenarioSpec", "base_params", "builtin_scenario",
    "classify_outcome", "run_scenario", "run_scenario_picard",
    "SolverConfig", "State", "StateTrajectory", "integrate_mol", "picard_solve", "rhs",
    "AuditReport", "audit_bounds", "audit_lipschitz", "audit_ratio_lemma",
    "oracle_kernels",
]
