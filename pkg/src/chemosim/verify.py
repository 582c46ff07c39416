"""Runtime audits of the proved solution bounds and operator properties.

Each audit returns an AuditReport of named checks with signed margins
(positive means the bound holds with that much room; negative means a
violation of that size).  Failures are report entries, never
exceptions, so callers can aggregate.  Randomized audits take an
explicit seed and are reproducible byte for byte.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .domain import build_grid
from .kernels import DrugHistory, evaluate_kernels_at_stamps, lipschitz_constants
from .params import ModelParams, _exp_capped, drug_ceiling
from .solver import TOL_CEILING, TOL_NEG, StateTrajectory

__all__ = [
    "AuditCheck",
    "AuditReport",
    "audit_bounds",
    "oracle_kernels",
    "audit_ratio_lemma",
    "audit_lipschitz",
    "gronwall_growth_constant",
    "trajectory_difference",
    "random_piecewise_history",
]

#: Slack allowed on the population sup-norm envelopes.
TOL_ENVELOPE = 1e-8


@dataclass
class AuditCheck:
    name: str
    passed: bool
    margin: float
    location: tuple[int, float] | None = None  # (flat node index, time)

    def line(self) -> str:
        loc = "" if self.location is None else f" at node {self.location[0]}, t={self.location[1]:g}"
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.name}: margin {self.margin:.3e}{loc}"


@dataclass
class AuditReport:
    name: str
    checks: list[AuditCheck] = field(default_factory=list)
    seed: int | None = None

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def worst(self) -> AuditCheck:
        return min(self.checks, key=lambda c: c.margin)

    def failures(self) -> list[AuditCheck]:
        return [c for c in self.checks if not c.passed]

    def summary(self, max_lines: int = 12) -> str:
        head = f"{self.name}: {'PASS' if self.passed else 'FAIL'} ({len(self.checks)} checks"
        head += f", seed {self.seed})" if self.seed is not None else ")"
        shown = self.failures() or [self.worst()]
        lines = [head] + ["  " + c.line() for c in shown[:max_lines]]
        if len(shown) > max_lines:
            lines.append(f"  ... {len(shown) - max_lines} more")
        return "\n".join(lines)

    def to_dict(self) -> dict:
        worst = self.worst() if self.checks else None
        return {
            "name": self.name,
            "passed": self.passed,
            "n_checks": len(self.checks),
            "n_failures": len(self.failures()),
            "seed": self.seed,
            "worst": None if worst is None else {
                "name": worst.name,
                "margin": worst.margin,
                "location": None if worst.location is None else list(worst.location),
            },
        }


def audit_bounds(traj: StateTrajectory, p: ModelParams) -> AuditReport:
    """Invariant-region and sup-envelope audit of a trajectory.

    Uses the running extremes, which cover every node of every accepted
    step, not just the stored snapshots.
    """
    ceiling = drug_ceiling(p)
    n_env = traj.n0_sup + p.r_N * p.T
    a_env = p.c_lambda * traj.a0_sup
    ext = traj.extremes
    checks = []
    for name, rec, tol in (
        ("N nonnegative", ext.n_min, TOL_NEG),
        ("A nonnegative", ext.a_min, TOL_NEG),
        ("D nonnegative", ext.d_min, TOL_NEG),
    ):
        margin = rec.value - 0.0
        checks.append(AuditCheck(name, margin >= -tol, margin, (rec.node, rec.t)))
    for name, rec, bound, tol in (
        ("D ceiling mu/tau", ext.d_max, ceiling, TOL_CEILING),
        ("N sup envelope", ext.n_max, n_env, TOL_ENVELOPE),
        ("A sup envelope", ext.a_max, a_env, TOL_ENVELOPE),
    ):
        margin = bound - rec.value
        checks.append(AuditCheck(name, margin >= -tol, margin, (rec.node, rec.t)))
    return AuditReport(name="bounds", checks=checks)


def _rk4_cells(stamps, values, a_init, n_init, lam, r_a, k_a, kill_a,
               kill_n, r_n, mu_n, b1, oracle_dt):
    """Scalar-RK4 sweep of the two cell ODEs under piecewise-linear |D|.

    Plain nested loops so the optional numba jit below can compile it;
    runs unchanged (slower) when numba is unavailable.
    """
    m = stamps.shape[0]
    nodes = a_init.shape[0]
    out_a = np.empty((m, nodes))
    out_n = np.empty((m, nodes))
    out_a[0] = a_init
    out_n[0] = n_init
    ra_kk = r_a / k_a
    for k in range(m - 1):
        span = stamps[k + 1] - stamps[k]
        sub = max(1, int(math.ceil(span / oracle_dt - 1e-12)))
        h = span / sub
        for j in range(nodes):
            a = out_a[k, j]
            n = out_n[k, j]
            d_lo = values[k, j]
            dd = values[k + 1, j] - d_lo
            for i in range(sub):
                d0v = abs(d_lo + ((i * h) / span) * dd)
                dmv = abs(d_lo + (((i + 0.5) * h) / span) * dd)
                d1v = abs(d_lo + (((i + 1.0) * h) / span) * dd)
                ka1 = lam * a - ra_kk * a * a - kill_a * d0v * a
                kn1 = r_n - mu_n * n - b1 * n * a - kill_n * d0v * n
                a2 = a + 0.5 * h * ka1
                n2 = n + 0.5 * h * kn1
                ka2 = lam * a2 - ra_kk * a2 * a2 - kill_a * dmv * a2
                kn2 = r_n - mu_n * n2 - b1 * n2 * a2 - kill_n * dmv * n2
                a3 = a + 0.5 * h * ka2
                n3 = n + 0.5 * h * kn2
                ka3 = lam * a3 - ra_kk * a3 * a3 - kill_a * dmv * a3
                kn3 = r_n - mu_n * n3 - b1 * n3 * a3 - kill_n * dmv * n3
                a4 = a + h * ka3
                n4 = n + h * kn3
                ka4 = lam * a4 - ra_kk * a4 * a4 - kill_a * d1v * a4
                kn4 = r_n - mu_n * n4 - b1 * n4 * a4 - kill_n * d1v * n4
                a = a + (h / 6.0) * (ka1 + 2.0 * (ka2 + ka3) + ka4)
                n = n + (h / 6.0) * (kn1 + 2.0 * (kn2 + kn3) + kn4)
            out_a[k + 1, j] = a
            out_n[k + 1, j] = n
    return out_a, out_n


try:  # jit keeps the 20-history audit well under its runtime budget
    import numba

    _rk4_cells = numba.njit(cache=True)(_rk4_cells)
except ImportError:  # pragma: no cover - exercised only without numba
    pass


def _oracle_cell_ode(hist: DrugHistory, n0: np.ndarray, a0: np.ndarray,
                     p: ModelParams, oracle_dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Dense per-node RK4 integration of the two cell ODEs driven by |D|.

    Independent of the kernel quadrature path: it never sees the stored
    exposure integrals, only the piecewise-linear drug interpolant.
    Returns (tumor, normal) arrays at every history stamp.
    """
    stamps = hist.stamps
    shape = np.shape(a0)
    values = hist.values_array().reshape(len(stamps), -1)
    out_a, out_n = _rk4_cells(
        stamps, values,
        np.asarray(a0, dtype=float).ravel().copy(),
        np.asarray(n0, dtype=float).ravel().copy(),
        p.lam, p.r_A, p.k_A, p.alpha_A * p.gamma_A, p.alpha_N * p.gamma_N,
        p.r_N, p.mu_N, p.beta_1, oracle_dt,
    )
    full = (len(stamps),) + shape
    return out_a.reshape(full), out_n.reshape(full)


def oracle_kernels(hist: DrugHistory, n0: np.ndarray, a0: np.ndarray,
                   p: ModelParams, tol: float = 1e-6,
                   oracle_dt: float = 1e-4) -> AuditReport:
    """Compare the closed-form operators against dense ODE integration.

    Passing needs a dense history (stamp spacing around 1e-3 or finer);
    a deliberately coarse history makes the comparison fail, which is
    the sanity check that this audit can fail at all.
    """
    kern_a, kern_n = evaluate_kernels_at_stamps(hist, n0, a0, p)
    ode_a, ode_n = _oracle_cell_ode(hist, n0, a0, p, oracle_dt)
    stamps = hist.stamps
    checks = []
    for name, kv, ov in (("tumor operator vs dense ODE", kern_a, ode_a),
                         ("normal operator vs dense ODE", kern_n, ode_n)):
        diff = np.abs(kv - ov)
        idx = np.unravel_index(int(np.argmax(diff)), diff.shape)
        worst = float(diff[idx])
        node = int(np.ravel_multi_index(idx[1:], diff.shape[1:]))
        checks.append(AuditCheck(name, worst <= tol, tol - worst,
                                 (node, float(stamps[idx[0]]))))
    return AuditReport(name="kernel-oracle", checks=checks)


def _cumtrapz(values: np.ndarray, dt: float) -> np.ndarray:
    out = np.empty_like(values)
    out[0] = 0.0
    np.cumsum(0.5 * dt * (values[1:] + values[:-1]), out=out[1:])
    return out


def audit_ratio_lemma(sample_count: int = 1000, seed: int = 0,
                      grid_points: int = 257) -> AuditReport:
    """Averaged-growth bound for positive nondecreasing integrands.

    For f > 0 nondecreasing, the ratio (integral of f over [0,t]) / f(t)
    never exceeds t (hence never the horizon).  Samples f in the exact
    shape the normal-cell operator uses: exponentials of nonnegative
    random piecewise-linear integrands.  The constant function is
    included as the equality case.
    """
    rng = np.random.default_rng(seed)
    checks = []

    def check_f(name: str, t: np.ndarray, f: np.ndarray) -> None:
        g = _cumtrapz(f, t[1] - t[0]) / f
        slack = (t - g)[1:]  # the bound is over (0, T); at 0 it is trivial
        margin = float(np.min(slack))
        k = int(np.argmin(slack)) + 1
        checks.append(AuditCheck(name, margin >= -1e-9, margin, (0, float(t[k]))))

    t_eq = np.linspace(0.0, 10.0, grid_points)
    check_f("equality case (constant integrand)", t_eq, np.ones_like(t_eq))

    for i in range(sample_count):
        horizon = rng.uniform(0.5, 25.0)
        t = np.linspace(0.0, horizon, grid_points)
        n_break = rng.integers(2, 9)
        tb = np.sort(rng.uniform(0.0, horizon, n_break))
        tb[0], tb[-1] = 0.0, horizon
        qb = rng.uniform(0.0, 3.0, n_break)
        q = np.interp(t, tb, qb)
        f = np.exp(_cumtrapz(q, t[1] - t[0]))
        check_f(f"sample_{i:04d}", t, f)
    return AuditReport(name="ratio-lemma", checks=checks, seed=seed)


def random_piecewise_history(rng: np.random.Generator, grid, stamps: np.ndarray,
                              phi_sup: float, n_break: int = 6) -> DrugHistory:
    """Nonnegative piecewise-linear drug trajectory, independent per node."""
    tb = np.linspace(0.0, stamps[-1], n_break)
    vb = rng.uniform(0.0, phi_sup, (n_break,) + grid.shape)
    values = np.empty((len(stamps),) + grid.shape)
    flat = vb.reshape(n_break, -1)
    out = values.reshape(len(stamps), -1)
    for j in range(flat.shape[1]):
        out[:, j] = np.interp(stamps, tb, flat[:, j])
    return DrugHistory.from_arrays(grid, stamps, values)


def audit_lipschitz(p: ModelParams, T: float, trials: int, seed: int = 0,
                    phi_sup: float | None = None) -> AuditReport:
    """Empirical operator-sensitivity quotients vs the explicit constants.

    Random bounded drug-trajectory pairs on a small 1D grid; the
    sup-norm quotient of operator changes per drug change must stay at
    or below the corresponding constant for every pair.
    """
    p = p.with_overrides(T=T)
    if phi_sup is None:
        phi_sup = drug_ceiling(p)
    grid = build_grid(1, 1.0, 8)
    stamps = np.linspace(0.0, T, 257)
    rng = np.random.default_rng(seed)
    checks = []
    for trial in range(trials):
        a0 = rng.uniform(0.0, 1.0, grid.shape)
        n0 = rng.uniform(0.0, 1.0, grid.shape)
        h1 = random_piecewise_history(rng, grid, stamps, phi_sup)
        if trial == 0:
            h2 = h1  # identical pair: quotient defined as zero
        else:
            h2 = random_piecewise_history(rng, grid, stamps, phi_sup)
        tum1, nor1 = evaluate_kernels_at_stamps(h1, n0, a0, p)
        tum2, nor2 = evaluate_kernels_at_stamps(h2, n0, a0, p)
        dphi = float(np.max(np.abs(h1.values_array() - h2.values_array())))
        consts = lipschitz_constants(
            p, float(a0.max()), float(n0.max()), float(phi_sup)
        )
        for name, u1, u2, c in (("tumor", tum1, tum2, consts.c1),
                                ("normal", nor1, nor2, consts.c2)):
            q = 0.0 if dphi == 0.0 else float(np.max(np.abs(u1 - u2))) / dphi
            margin = c - q
            checks.append(AuditCheck(
                f"{name} quotient trial_{trial:03d}",
                (not math.isnan(margin)) and margin >= 0.0, margin,
            ))
    return AuditReport(name="lipschitz", checks=checks, seed=seed)


def gronwall_growth_constant(p: ModelParams, n0_sup: float, a0_sup: float) -> float:
    """Coarse growth-rate estimate for the squared L2 distance of two runs.

    Assembled from the proved sup bounds on each field and the Young
    splittings of the pairwise coupling terms; intentionally generous
    (an upper bound, never sharp).
    """
    n_bound = n0_sup + p.r_N * p.T
    c_n = n_bound * (p.beta_1 + p.alpha_N * p.gamma_N)
    c_a = p.r_A + p.alpha_A * p.gamma_A * p.c_lambda * a0_sup
    c_d = drug_ceiling(p) * (p.gamma_A + p.gamma_N)
    return 2.0 * (c_n + c_a + c_d)


def gronwall_envelope(p: ModelParams, n0_sup: float, a0_sup: float,
                      delta: float) -> float:
    """Upper bound e^{C*T} * delta on the final L2 distance of two runs."""
    return _exp_capped(gronwall_growth_constant(p, n0_sup, a0_sup) * p.T) * delta


def trajectory_difference(tr1: StateTrajectory, tr2: StateTrajectory) -> float:
    """Sup over shared snapshot times and fields of the nodewise difference."""
    diff = 0.0
    shared = 0
    for s1 in tr1.snapshots:
        for s2 in tr2.snapshots:
            if abs(s1.t - s2.t) <= 1e-9:
                shared += 1
                for u1, u2 in ((s1.N, s2.N), (s1.A, s2.A), (s1.D, s2.D)):
                    diff = max(diff, float(np.max(np.abs(u1 - u2))))
    if shared == 0:
        raise ValueError("trajectories share no snapshot times")
    return diff
