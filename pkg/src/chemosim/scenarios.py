"""Built-in experiments, equilibrium initial data, and outcome classification.

The five built-in scenarios share one rescaled base parameter set and
differ only in drug cytotoxicity (alpha_A), infusion rate (mu),
diffusivity (sigma), the infusion region, and dimensionality.  All
start from the no-treatment coexistence equilibrium with zero drug and
run to t = 25, long enough for stationary behavior.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .domain import Region, build_grid, source_profile
from .errors import UnknownScenario
from .params import ModelParams, equilibrium_no_treatment, validate_params
from .solver import SolverConfig, State, StateTrajectory, integrate_mol, picard_solve
from .verify import AuditReport, audit_bounds, trajectory_difference

__all__ = [
    "ScenarioSpec",
    "OutcomeReport",
    "Outcome",
    "base_params",
    "builtin_scenario",
    "builtin_ids",
    "builtin_table",
    "initial_fields",
    "run_scenario",
    "run_scenario_picard",
    "classify_outcome",
]

#: Tumor is extinct when its max over nodes at t_end falls below this
#: (three decades under the untreated equilibrium; insensitive in [1e-4, 1e-2]).
EPS_EXTINCTION = 1e-3
#: Near-stationarity threshold on the last unit of time.
STATIONARY_TOL = 1e-4

_SNAPSHOTS_2D = (0.0, 1.0, 15.0)
_SNAPSHOTS_1D = (0.0, 3.0, 6.0, 9.0, 12.0, 15.0, 25.0)

# (expected outcome, alpha_A, mu, sigma, region, dim)
_TABLE: dict[int, tuple[str, float, float, float, Region, int]] = {
    1: ("persistence", 5.0, 3.0, 0.1, Region.box(0.45, 0.55, 0.45, 0.55), 2),
    2: ("persistence", 10.0, 3.0, 0.1, Region.interval(0.0, 0.1), 1),
    3: ("extinction", 10.0, 6.0, 0.1, Region.interval(0.0, 0.1), 1),
    4: ("extinction", 10.0, 3.0, 0.2, Region.interval(0.0, 0.1), 1),
    5: ("extinction", 20.0, 3.0, 0.1, Region.interval(0.0, 0.1), 1),
}


def base_params(alpha_A: float, mu: float, sigma: float, T: float = 25.0,
                **overrides: float) -> ModelParams:
    """Rescaled base parameter set shared by all built-in experiments."""
    kw = dict(
        r_N=1.0, mu_N=1.0, beta_1=1.5,
        r_A=1.0, k_A=1.0, mu_A=0.05, eps_A=0.05,
        alpha_N=1.0, gamma_N=0.1, gamma_A=1.0, tau=0.9,
        alpha_A=alpha_A, mu=mu, sigma=sigma, T=T,
    )
    kw.update(overrides)
    return validate_params(ModelParams(**kw))


@dataclass(frozen=True)
class ScenarioSpec:
    """A named experiment: parameters, geometry, and snapshot schedule.

    Equality ignores the id, so a custom spec that reproduces a
    built-in row compares equal to it.
    """

    params: ModelParams
    dim: int
    n: int
    L: float
    omega: Region
    snapshot_times: tuple[float, ...]
    id: int | None = field(default=None, compare=False)

    @property
    def t_end(self) -> float:
        return self.params.T

    @property
    def alpha_A(self) -> float:
        return self.params.alpha_A

    @property
    def mu(self) -> float:
        return self.params.mu

    @property
    def sigma(self) -> float:
        return self.params.sigma


def builtin_ids() -> tuple[int, ...]:
    return tuple(sorted(_TABLE))


def builtin_table() -> dict[int, dict]:
    """Row data of the built-in experiments (for listings and manifests)."""
    out = {}
    for sid, (outcome, alpha_a, mu, sigma, omega, dim) in _TABLE.items():
        out[sid] = {
            "outcome": outcome, "alpha_A": alpha_a, "mu": mu, "sigma": sigma,
            "omega": [list(omega.lo), list(omega.hi)], "dim": dim,
        }
    return out


def builtin_scenario(scenario_id: int) -> ScenarioSpec:
    if scenario_id not in _TABLE:
        raise UnknownScenario(
            f"scenario id must be one of {builtin_ids()}, got {scenario_id}"
        )
    _, alpha_a, mu, sigma, omega, dim = _TABLE[scenario_id]
    return ScenarioSpec(
        params=base_params(alpha_A=alpha_a, mu=mu, sigma=sigma),
        dim=dim, n=50, L=1.0, omega=omega,
        snapshot_times=_SNAPSHOTS_2D if dim == 2 else _SNAPSHOTS_1D,
        id=scenario_id,
    )


def initial_fields(spec: ScenarioSpec, grid) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Equilibrium initial condition (N, A, D) = (N2, A2, 0)."""
    n2, a2 = equilibrium_no_treatment(spec.params)
    return grid.full(n2), grid.full(a2), grid.zeros()


@dataclass(frozen=True)
class Outcome:
    outcome: str                 # "persistence" | "extinction"
    max_a_final: float
    stationary: bool
    stationary_delta: float


def classify_outcome(traj: StateTrajectory, eps_ext: float = EPS_EXTINCTION,
                     stationary_tol: float = STATIONARY_TOL) -> Outcome:
    """Extinction iff the final tumor max is below eps_ext.

    Also reports whether the tumor field moved less than stationary_tol
    over the last unit of time (needs snapshots at t_end and t_end-1).
    """
    final = traj.snapshots[-1]
    max_a = float(final.A.max())
    outcome = "extinction" if max_a < eps_ext else "persistence"
    delta = float("nan")
    stationary = False
    t_prev = final.t - 1.0
    near = [s for s in traj.snapshots if abs(s.t - t_prev) <= 0.5 * traj.dt + 1e-9]
    if near:
        delta = float(np.max(np.abs(final.A - near[-1].A)))
        stationary = delta < stationary_tol
    return Outcome(outcome, max_a, stationary, delta)


@dataclass
class OutcomeReport:
    outcome: str
    max_a_final: float
    min_n_final: float
    stationary: bool
    stationary_delta: float
    audit: AuditReport
    wall_clock_s: float
    picard_agreement: float | None = None
    picard_iterations: int | None = None


def _effective_config(spec: ScenarioSpec, cfg: SolverConfig | None) -> SolverConfig:
    """The scenario owns t_end and the snapshot schedule; classification
    additionally needs snapshots at t_end-1 and t_end."""
    if cfg is None:
        cfg = SolverConfig()
    times = set(spec.snapshot_times) | {0.0, spec.t_end - 1.0, spec.t_end}
    return replace(cfg, t_end=spec.t_end, snapshot_times=tuple(sorted(times)))


def run_scenario(spec: ScenarioSpec, cfg: SolverConfig | None = None,
                 picard_check: bool = False) -> tuple[OutcomeReport, StateTrajectory]:
    """Integrate a scenario, audit its bounds, and classify the outcome."""
    started = time.perf_counter()
    cfg = _effective_config(spec, cfg)
    grid = build_grid(spec.dim, spec.L, spec.n)
    chi = source_profile(spec.omega, grid)
    n0, a0, d0 = initial_fields(spec, grid)
    traj = integrate_mol(State(0.0, n0, a0, d0, grid), cfg, chi, spec.params)
    audit = audit_bounds(traj, spec.params)
    outcome = classify_outcome(traj)

    agreement = None
    picard_iters = None
    if picard_check:
        ptraj = picard_solve(grid, d0, n0, a0, cfg, chi, spec.params)
        agreement = trajectory_difference(traj, ptraj)
        picard_iters = ptraj.picard_iterations

    report = OutcomeReport(
        outcome=outcome.outcome,
        max_a_final=outcome.max_a_final,
        min_n_final=float(traj.snapshots[-1].N.min()),
        stationary=outcome.stationary,
        stationary_delta=outcome.stationary_delta,
        audit=audit,
        wall_clock_s=time.perf_counter() - started,
        picard_agreement=agreement,
        picard_iterations=picard_iters,
    )
    return report, traj


def run_scenario_picard(spec: ScenarioSpec, cfg: SolverConfig | None = None,
                        initial_guess: float | np.ndarray | None = None) -> StateTrajectory:
    """Fixed-point solution path for a scenario (same schedule as run_scenario)."""
    cfg = _effective_config(spec, cfg)
    grid = build_grid(spec.dim, spec.L, spec.n)
    chi = source_profile(spec.omega, grid)
    n0, a0, d0 = initial_fields(spec, grid)
    return picard_solve(grid, d0, n0, a0, cfg, chi, spec.params,
                        initial_guess=initial_guess)
