"""Model parameter set, validation, and derived equilibrium quantities.

The parameter names follow the tissue model: a constant influx of normal
cells (r_N) with natural mortality (mu_N), logistically growing tumor
cells (r_A, k_A) with natural and apoptotic mortality (mu_A, eps_A),
cross-suppression of normal cells by tumor cells (beta_1), and a drug
compartment with infusion rate mu on the vessel region, clearance tau,
diffusion sigma, absorption rates gamma_N/gamma_A and kill efficiencies
alpha_N/alpha_A.  The reverse suppression coefficient of the original
ODE model is fixed to zero and is intentionally not configurable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace

from .errors import DegenerateDenominator, NegativeRate, NonPositive

__all__ = [
    "ModelParams",
    "validate_params",
    "equilibrium_no_treatment",
    "drug_ceiling",
    "RATE_FIELDS",
    "POSITIVE_FIELDS",
]

#: Fields that must be nonnegative (rates and dimensionless kill factors).
RATE_FIELDS = (
    "r_N", "mu_N", "beta_1", "r_A", "mu_A", "eps_A",
    "alpha_N", "alpha_A", "gamma_N", "gamma_A", "mu",
)

#: Fields that must be strictly positive.
POSITIVE_FIELDS = ("k_A", "tau", "sigma", "T")


def _exp_capped(x: float) -> float:
    """exp(x), saturating to +inf instead of raising on overflow."""
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


@dataclass(frozen=True)
class ModelParams:
    """All rate constants plus domain/infusion scalars of the model.

    Instances are immutable after validation and safe to share across
    threads.  `lam` and `c_lambda` are derived, never stored.
    """

    r_N: float
    mu_N: float
    beta_1: float
    r_A: float
    k_A: float
    mu_A: float
    eps_A: float
    alpha_N: float
    alpha_A: float
    gamma_N: float
    gamma_A: float
    mu: float
    tau: float
    sigma: float
    T: float

    @property
    def lam(self) -> float:
        """Net tumor growth rate r_A - (mu_A + eps_A)."""
        return self.r_A - (self.mu_A + self.eps_A)

    @property
    def c_lambda(self) -> float:
        """Growth envelope factor max(1, e^(lam*T)); >= 1 always."""
        return max(1.0, _exp_capped(self.lam * self.T))

    def with_overrides(self, **kw: float) -> "ModelParams":
        """Copy with selected fields replaced, re-validated."""
        return validate_params(replace(self, **kw))


def validate_params(raw: ModelParams) -> ModelParams:
    """Check the admissibility of a parameter set.

    Raises NonPositive when a strictly positive field is <= 0 and
    NegativeRate when any rate is < 0; returns the (immutable) params
    otherwise.
    """
    for name in POSITIVE_FIELDS:
        v = getattr(raw, name)
        if not (v > 0.0) or not math.isfinite(v):
            raise NonPositive(f"{name} must be > 0 and finite, got {v}")
    for name in RATE_FIELDS:
        v = getattr(raw, name)
        if v < 0.0 or not math.isfinite(v):
            raise NegativeRate(f"{name} must be >= 0 and finite, got {v}")
    return raw


def param_field_names() -> tuple[str, ...]:
    """Names of the settable parameter fields, in declaration order."""
    return tuple(f.name for f in fields(ModelParams))


def equilibrium_no_treatment(p: ModelParams) -> tuple[float, float]:
    """Coexistence equilibrium (N2, A2) of the homogeneous model with no drug.

    A2 = (lam/r_A)*k_A clamped at 0 when the net tumor growth rate is
    nonpositive (the tumor cannot persist), N2 = r_N/(mu_N + beta_1*A2).
    """
    if p.lam <= 0.0 or p.r_A <= 0.0:
        a2 = 0.0
    else:
        a2 = p.lam / p.r_A * p.k_A
    denom = p.mu_N + p.beta_1 * a2
    if p.r_N == 0.0:
        return 0.0, a2
    if denom == 0.0:
        raise DegenerateDenominator(
            "mu_N + beta_1*A2 = 0 with r_N > 0: no finite normal-cell equilibrium"
        )
    return p.r_N / denom, a2


def drug_ceiling(p: ModelParams) -> float:
    """Invariant-region upper bound mu/tau for the drug concentration."""
    return p.mu / p.tau
