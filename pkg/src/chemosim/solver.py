"""Two solution paths for the coupled tissue/drug system.

`integrate_mol` advances the fully coupled semidiscrete system (normal
cells, tumor cells, drug) with classical RK4 (or explicit Euler) at a
fixed step.  `picard_solve` instead iterates on the drug trajectory
alone: each pass freezes the cell populations at their closed-form
kernel response to the previous drug iterate and integrates the
resulting *linear* parabolic drug problem, until successive drug
trajectories agree in sup norm.  Both produce a StateTrajectory with
running extreme-value records so invariant-region audits can cover
every node and step without storing full histories.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .domain import Grid, laplacian
from .errors import ConfigError, Instability, NegativeInput, NoConvergence, ValidationError
from .kernels import DrugHistory, KernelAccumulator
from .params import ModelParams, drug_ceiling

__all__ = [
    "State",
    "SolverConfig",
    "StateTrajectory",
    "Extremes",
    "ExtremeRecord",
    "KernelSnapshot",
    "rhs",
    "integrate_mol",
    "picard_solve",
    "stability_ceiling",
    "default_dt",
]

#: Fields may undershoot zero by at most this much at any node/step.
TOL_NEG = 1e-12
#: Audited slack above the drug ceiling mu/tau.
TOL_CEILING = 1e-10
#: Integration aborts when the drug exceeds the ceiling by more than this.
TOL_INSTABILITY = 1e-6
#: Hard cap on the default time step.
DT_CAP = 1e-3


@dataclass
class State:
    """Solution triple at one instant, on one grid."""

    t: float
    N: np.ndarray
    A: np.ndarray
    D: np.ndarray
    grid: Grid

    def __post_init__(self) -> None:
        for u in (self.N, self.A, self.D):
            self.grid.check_field(u)


@dataclass
class SolverConfig:
    method: str = "rk4"
    dt: float | None = None          # None: 0.9x stability ceiling, capped
    t_end: float = 25.0
    snapshot_times: tuple[float, ...] = ()
    picard_tol: float = 1e-6
    picard_max_iter: int = 60
    store_history: bool = False      # keep the full drug history (small runs)
    track_kernels: bool = True       # kernel cross-check fields at snapshots


def stability_ceiling(grid: Grid, sigma: float) -> float:
    """Explicit-diffusion step ceiling: h^2/(2*sigma) in 1D, h^2/(4*sigma) in 2D."""
    return grid.h * grid.h / (2.0 * grid.dim * sigma)


def default_dt(grid: Grid, sigma: float) -> float:
    return min(0.9 * stability_ceiling(grid, sigma), DT_CAP)


@dataclass
class ExtremeRecord:
    value: float
    t: float
    node: int  # flat (row-major) node index


class Extremes:
    """Running per-field extremes over every node and accepted step."""

    def __init__(self) -> None:
        self.n_min = ExtremeRecord(math.inf, math.nan, -1)
        self.a_min = ExtremeRecord(math.inf, math.nan, -1)
        self.d_min = ExtremeRecord(math.inf, math.nan, -1)
        self.n_max = ExtremeRecord(-math.inf, math.nan, -1)
        self.a_max = ExtremeRecord(-math.inf, math.nan, -1)
        self.d_max = ExtremeRecord(-math.inf, math.nan, -1)

    def observe(self, t: float, n: np.ndarray, a: np.ndarray, d: np.ndarray) -> None:
        for u, rec_min, rec_max in (
            (n, self.n_min, self.n_max),
            (a, self.a_min, self.a_max),
            (d, self.d_min, self.d_max),
        ):
            lo = float(u.min())
            if lo < rec_min.value:
                rec_min.value, rec_min.t, rec_min.node = lo, t, int(u.argmin())
            hi = float(u.max())
            if hi > rec_max.value:
                rec_max.value, rec_max.t, rec_max.node = hi, t, int(u.argmax())


@dataclass
class KernelSnapshot:
    """Kernel-operator evaluation of the cell fields at a snapshot time."""

    t: float
    tumor: np.ndarray
    normal: np.ndarray


@dataclass
class StateTrajectory:
    grid: Grid
    params: ModelParams
    method: str
    dt: float
    n_steps: int
    requested_times: tuple[float, ...]
    times: tuple[float, ...]             # actual snapshot times (nearest step)
    snapshots: list[State]
    n0_sup: float
    a0_sup: float
    d0_sup: float
    extremes: Extremes
    kernel_snapshots: list[KernelSnapshot] | None = None
    d_history: DrugHistory | None = None
    picard_iterations: int | None = None
    picard_residuals: tuple[float, ...] | None = None
    meta: dict = field(default_factory=dict)

    @property
    def t_end(self) -> float:
        return self.n_steps * self.dt

    def snapshot_at(self, t: float) -> State:
        k = int(np.argmin([abs(s.t - t) for s in self.snapshots]))
        s = self.snapshots[k]
        if abs(s.t - t) > self.dt * 0.51 + 1e-9:
            raise ValidationError(f"no snapshot near t={t}; stored {self.times}")
        return s

    @classmethod
    def from_states(cls, grid: Grid, p: ModelParams, states: list[State],
                    method: str = "manual", dt: float = 1.0) -> "StateTrajectory":
        """Wrap explicit states as a trajectory (testing and replay)."""
        ext = Extremes()
        for s in states:
            ext.observe(s.t, s.N, s.A, s.D)
        first = states[0]
        times = tuple(s.t for s in states)
        return cls(
            grid=grid, params=p, method=method, dt=dt, n_steps=len(states) - 1,
            requested_times=times, times=times, snapshots=list(states),
            n0_sup=float(first.N.max()), a0_sup=float(first.A.max()),
            d0_sup=float(first.D.max()), extremes=ext,
        )


def rhs(s: State, chi: np.ndarray, p: ModelParams) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Pointwise time derivatives (dN, dA, dD) of the coupled system."""
    s.grid.check_field(chi)
    dy = _rhs_stack(s.grid, np.stack([s.N, s.A, s.D]), chi, p)
    return dy[0], dy[1], dy[2]


def _rhs_stack(grid: Grid, y: np.ndarray, chi: np.ndarray, p: ModelParams) -> np.ndarray:
    n, a, d = y
    dn = p.r_N - p.mu_N * n - p.beta_1 * n * a - p.alpha_N * p.gamma_N * d * n
    da = p.r_A * a * (1.0 - a / p.k_A) - (p.mu_A + p.eps_A) * a \
        - p.alpha_A * p.gamma_A * d * a
    dd = p.sigma * laplacian(grid, d) + p.mu * chi \
        - p.gamma_A * d * a - p.gamma_N * d * n - p.tau * d
    return np.stack([dn, da, dd])


def _resolve_steps(cfg: SolverConfig, grid: Grid, p: ModelParams) -> tuple[float, int]:
    """Validated (dt, n_steps) with n_steps*dt == t_end exactly."""
    if cfg.t_end <= 0.0:
        raise ConfigError(f"t_end must be > 0, got {cfg.t_end}")
    ceiling = 0.9 * stability_ceiling(grid, p.sigma)
    dt_req = default_dt(grid, p.sigma) if cfg.dt is None else cfg.dt
    if not dt_req > 0.0:
        raise ConfigError(f"dt must be > 0, got {dt_req}")
    if dt_req > ceiling * (1.0 + 1e-12):
        raise ConfigError(
            f"dt={dt_req:g} exceeds the stability ceiling 0.9*h^2/(2*dim*sigma)={ceiling:g}"
        )
    n_steps = max(1, math.ceil(cfg.t_end / dt_req - 1e-9))
    return cfg.t_end / n_steps, n_steps


def _snapshot_steps(times: tuple[float, ...], dt: float, n_steps: int) -> dict[int, float]:
    """Map requested times to nearest step indices (deduplicated, ordered)."""
    out: dict[int, float] = {}
    for t in times:
        if t < -1e-9 or t > n_steps * dt * (1.0 + 1e-12) + 1e-9:
            raise ConfigError(f"snapshot time {t} outside [0, {n_steps * dt}]")
        k = int(round(t / dt))
        k = min(max(k, 0), n_steps)
        out.setdefault(k, t)
    return dict(sorted(out.items()))


def _check_step(t: float, y: np.ndarray, ceiling: float) -> None:
    if not np.isfinite(y).all():
        raise Instability(f"non-finite field at t={t:g}: dt too large")
    lo = float(y.min())
    if lo < -TOL_NEG:
        raise Instability(
            f"negative field value {lo:g} at t={t:g} beyond tolerance {TOL_NEG:g}"
        )
    d_hi = float(y[2].max())
    if d_hi > ceiling + TOL_INSTABILITY:
        raise Instability(
            f"drug {d_hi:g} exceeds ceiling {ceiling:g} at t={t:g}: dt too large"
        )


def _check_initial_state(s0: State, p: ModelParams) -> None:
    if float(min(s0.N.min(), s0.A.min())) < 0.0:
        raise NegativeInput("initial N and A must be nonnegative")
    ceiling = drug_ceiling(p)
    if float(s0.D.min()) < -TOL_NEG or float(s0.D.max()) > ceiling + TOL_CEILING:
        raise ValidationError(
            f"initial drug field must lie within [0, mu/tau] = [0, {ceiling:g}]"
        )


def integrate_mol(s0: State, cfg: SolverConfig, chi: np.ndarray,
                  p: ModelParams) -> StateTrajectory:
    """Fixed-step method-of-lines integration of the coupled system."""
    grid = s0.grid
    grid.check_field(chi)
    _check_initial_state(s0, p)
    if s0.t != 0.0:
        raise ConfigError("integration starts at t = 0")
    if cfg.method not in ("rk4", "explicit-euler"):
        raise ConfigError(f"unknown method {cfg.method!r}")
    dt, n_steps = _resolve_steps(cfg, grid, p)
    snap_steps = _snapshot_steps(cfg.snapshot_times, dt, n_steps)
    ceiling = drug_ceiling(p)

    y = np.stack([np.asarray(s0.N, dtype=float),
                  np.asarray(s0.A, dtype=float),
                  np.asarray(s0.D, dtype=float)])
    extremes = Extremes()
    extremes.observe(0.0, y[0], y[1], y[2])
    acc = KernelAccumulator(p, y[0], y[1], y[2]) if cfg.track_kernels else None
    hist = DrugHistory(grid, y[2]) if cfg.store_history else None

    snapshots: list[State] = []
    kernel_snaps: list[KernelSnapshot] = []
    times: list[float] = []

    def capture(t: float) -> None:
        snapshots.append(State(t, y[0].copy(), y[1].copy(), y[2].copy(), grid))
        times.append(t)
        if acc is not None:
            kernel_snaps.append(KernelSnapshot(t, acc.tumor.copy(), acc.normal.copy()))

    if 0 in snap_steps:
        capture(0.0)

    rk4 = cfg.method == "rk4"
    for j in range(n_steps):
        t_next = (j + 1) * dt
        if rk4:
            k1 = _rhs_stack(grid, y, chi, p)
            k2 = _rhs_stack(grid, y + (0.5 * dt) * k1, chi, p)
            k3 = _rhs_stack(grid, y + (0.5 * dt) * k2, chi, p)
            k4 = _rhs_stack(grid, y + dt * k3, chi, p)
            y = y + (dt / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
        else:
            y = y + dt * _rhs_stack(grid, y, chi, p)
        _check_step(t_next, y, ceiling)
        extremes.observe(t_next, y[0], y[1], y[2])
        if acc is not None:
            acc.advance(t_next, y[2])
        if hist is not None:
            hist.append(t_next, y[2])
        if (j + 1) in snap_steps:
            capture(t_next)

    return StateTrajectory(
        grid=grid, params=p, method=cfg.method, dt=dt, n_steps=n_steps,
        requested_times=tuple(cfg.snapshot_times), times=tuple(times),
        snapshots=snapshots,
        n0_sup=float(s0.N.max()), a0_sup=float(s0.A.max()), d0_sup=float(s0.D.max()),
        extremes=extremes,
        kernel_snapshots=kernel_snaps if acc is not None else None,
        d_history=hist,
    )


def _linear_drug_step(grid: Grid, d: np.ndarray, dt: float, source: np.ndarray,
                      c0: np.ndarray, cm: np.ndarray, c1: np.ndarray,
                      sigma: float, rk4: bool) -> np.ndarray:
    """One step of the linear drug problem with frozen decay coefficients."""
    if not rk4:
        return d + dt * (sigma * laplacian(grid, d) + source - c0 * d)
    k1 = sigma * laplacian(grid, d) + source - c0 * d
    u = d + (0.5 * dt) * k1
    k2 = sigma * laplacian(grid, u) + source - cm * u
    u = d + (0.5 * dt) * k2
    k3 = sigma * laplacian(grid, u) + source - cm * u
    u = d + dt * k3
    k4 = sigma * laplacian(grid, u) + source - c1 * u
    return d + (dt / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)


def picard_solve(grid: Grid, d0: np.ndarray, n0: np.ndarray, a0: np.ndarray,
                 cfg: SolverConfig, chi: np.ndarray, p: ModelParams,
                 initial_guess: float | np.ndarray | None = None) -> StateTrajectory:
    """Fixed-point solve of the drug problem with kernel-frozen coefficients.

    Iterates: given a full drug-trajectory guess, evaluate the kernel
    cell responses along it, integrate the linear drug equation with
    those coefficient fields, and repeat until the sup-norm change over
    all stamps and nodes is at most picard_tol.  Cell fields of the
    returned trajectory are kernel evaluations along the converged drug
    trajectory.
    """
    for u in (d0, n0, a0, chi):
        grid.check_field(u)
    _check_initial_state(State(0.0, n0, a0, d0, grid), p)
    if cfg.method not in ("rk4", "explicit-euler"):
        raise ConfigError(f"unknown method {cfg.method!r}")
    dt, n_steps = _resolve_steps(cfg, grid, p)
    snap_steps = _snapshot_steps(cfg.snapshot_times, dt, n_steps)
    ceiling = drug_ceiling(p)
    rk4 = cfg.method == "rk4"
    source = p.mu * chi
    d0 = np.asarray(d0, dtype=float)

    shape = (n_steps + 1,) + grid.shape
    phi_old = np.empty(shape)
    if initial_guess is None:
        phi_old[:] = d0
    elif np.isscalar(initial_guess):
        phi_old[:] = float(initial_guess)
    else:
        grid.check_field(initial_guess)
        phi_old[:] = np.asarray(initial_guess, dtype=float)
    phi_new = np.empty(shape)

    residuals: list[float] = []
    for _ in range(cfg.picard_max_iter):
        acc = KernelAccumulator(p, n0, a0, phi_old[0])
        coeff_prev = p.gamma_A * acc.tumor + p.gamma_N * acc.normal + p.tau
        d = d0.copy()
        phi_new[0] = d
        residual = float(np.abs(d - phi_old[0]).max())
        for j in range(n_steps):
            t_next = (j + 1) * dt
            acc.advance(t_next, phi_old[j + 1])
            coeff_next = p.gamma_A * acc.tumor + p.gamma_N * acc.normal + p.tau
            d = _linear_drug_step(
                grid, d, dt, source, coeff_prev,
                0.5 * (coeff_prev + coeff_next), coeff_next, p.sigma, rk4,
            )
            if not np.isfinite(d).all():
                raise Instability(f"non-finite drug iterate at t={t_next:g}")
            phi_new[j + 1] = d
            residual = max(residual, float(np.abs(d - phi_old[j + 1]).max()))
            coeff_prev = coeff_next
        residuals.append(residual)
        if residual <= cfg.picard_tol:
            break
        phi_old, phi_new = phi_new, phi_old
    else:
        raise NoConvergence(
            f"fixed-point iteration did not reach tol={cfg.picard_tol:g} "
            f"in {cfg.picard_max_iter} iterations (last residual {residuals[-1]:g})",
            residual=residuals[-1], iterations=len(residuals),
        )

    # final sweep along the converged drug trajectory: cell fields,
    # extremes at every stamp, snapshots at the requested steps
    acc = KernelAccumulator(p, n0, a0, phi_new[0])
    extremes = Extremes()
    extremes.observe(0.0, acc.normal, acc.tumor, phi_new[0])
    hist = DrugHistory(grid, phi_new[0]) if cfg.store_history else None
    snapshots: list[State] = []
    kernel_snaps: list[KernelSnapshot] = []
    times: list[float] = []
    if 0 in snap_steps:
        snapshots.append(State(0.0, acc.normal.copy(), acc.tumor.copy(),
                               phi_new[0].copy(), grid))
        kernel_snaps.append(KernelSnapshot(0.0, acc.tumor.copy(), acc.normal.copy()))
        times.append(0.0)
    for j in range(n_steps):
        t_next = (j + 1) * dt
        d = phi_new[j + 1]
        acc.advance(t_next, d)
        _check_step(t_next, np.stack([acc.normal, acc.tumor, d]), ceiling)
        extremes.observe(t_next, acc.normal, acc.tumor, d)
        if hist is not None:
            hist.append(t_next, d)
        if (j + 1) in snap_steps:
            snapshots.append(State(t_next, acc.normal.copy(), acc.tumor.copy(),
                                   d.copy(), grid))
            kernel_snaps.append(KernelSnapshot(t_next, acc.tumor.copy(),
                                               acc.normal.copy()))
            times.append(t_next)

    return StateTrajectory(
        grid=grid, params=p, method=f"picard-{cfg.method}", dt=dt, n_steps=n_steps,
        requested_times=tuple(cfg.snapshot_times), times=tuple(times),
        snapshots=snapshots,
        n0_sup=float(np.max(n0)), a0_sup=float(np.max(a0)), d0_sup=float(np.max(d0)),
        extremes=extremes,
        kernel_snapshots=kernel_snaps,
        d_history=hist,
        picard_iterations=len(residuals),
        picard_residuals=tuple(residuals),
    )
