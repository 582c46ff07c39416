"""Closed-form solution operators driven by a stored drug history.

Per node, with exposure I(t) = integral of |D| over [0, t]:

* the tumor response has Bernoulli (logistic) form

      num(t) = A0 * k_A * exp(lam*t - alpha_A*gamma_A*I(t))
      den(t) = k_A + A0 * r_A * J(t),   J(t) = integral of the numerator
                                               exponential over [0, t]

* the normal-cell response is the linear-ODE solution

      theta(t) = (N0 + r_N * K(t)) / E(t)

      E(t) = exp(mu_N*t + alpha_N*gamma_N*I(t) + beta_1 * integral of tumor)
      K(t) = integral of E over [0, t]

All history integrals use composite trapezoid on the stored stamps, so
the evaluation advances in O(nodes) work and memory per stamp.  The
exponentials are kept in log space: the tumor accumulator rescales by a
per-node running maximum of the exponent, and the normal accumulator
uses that E is nondecreasing (every exponent term has a nonnegative
integrand), so only exponentials of nonpositive arguments are ever
taken.  This makes both operators total on arbitrary bounded inputs;
exponents far beyond float range degrade gracefully to 0/inf instead of
producing NaNs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import Grid
from .errors import HistoryTooShort, NegativeInput, ValidationError
from .params import ModelParams, _exp_capped

__all__ = [
    "DrugHistory",
    "KernelAccumulator",
    "KernelConstants",
    "lambda_op",
    "theta_op",
    "evaluate_kernels_at_stamps",
    "lipschitz_constants",
    "bound_envelope",
]

_STAMP_TOL = 1e-12


class DrugHistory:
    """Drug trajectory on a grid: one field per strictly increasing stamp.

    The per-node running integral of |D| is maintained incrementally on
    append, so kernel evaluation never rescans the raw history for it.
    """

    def __init__(self, grid: Grid, d0: np.ndarray, t0: float = 0.0):
        if t0 != 0.0:
            raise ValidationError("drug history must start at t = 0")
        grid.check_field(d0)
        self.grid = grid
        self._stamps = [0.0]
        self._values = [np.asarray(d0, dtype=float).copy()]
        self._i_abs = [grid.zeros()]

    def append(self, t: float, field: np.ndarray) -> None:
        self.grid.check_field(field)
        t_prev = self._stamps[-1]
        if not t > t_prev:
            raise ValidationError(
                f"stamps must be strictly increasing: {t} after {t_prev}"
            )
        field = np.asarray(field, dtype=float).copy()
        dt = t - t_prev
        self._i_abs.append(
            self._i_abs[-1] + 0.5 * dt * (np.abs(self._values[-1]) + np.abs(field))
        )
        self._stamps.append(float(t))
        self._values.append(field)

    @classmethod
    def from_arrays(cls, grid: Grid, stamps: np.ndarray, values: np.ndarray) -> "DrugHistory":
        """Bulk constructor: values[k] is the field at stamps[k]."""
        stamps = np.asarray(stamps, dtype=float)
        hist = cls(grid, values[0], t0=float(stamps[0]))
        for t, v in zip(stamps[1:], values[1:]):
            hist.append(float(t), v)
        return hist

    @classmethod
    def constant(cls, grid: Grid, value: float, stamps: np.ndarray) -> "DrugHistory":
        field = grid.full(value)
        hist = cls(grid, field, t0=float(stamps[0]))
        for t in np.asarray(stamps, dtype=float)[1:]:
            hist.append(float(t), field)
        return hist

    @property
    def stamps(self) -> np.ndarray:
        return np.asarray(self._stamps)

    @property
    def t_end(self) -> float:
        return self._stamps[-1]

    def __len__(self) -> int:
        return len(self._stamps)

    def field_at(self, k: int) -> np.ndarray:
        return self._values[k]

    def values_array(self) -> np.ndarray:
        """All stored fields as one (n_stamps,) + grid.shape array."""
        return np.stack(self._values)

    def i_abs_at(self, k: int) -> np.ndarray:
        return self._i_abs[k]

    def interp(self, t: float) -> np.ndarray:
        """Piecewise-linear interpolant of the stored fields at time t."""
        stamps = self.stamps
        if t < -_STAMP_TOL or t > self.t_end + _STAMP_TOL:
            raise HistoryTooShort(
                f"t={t} outside stored history [0, {self.t_end}]"
            )
        t = min(max(t, 0.0), self.t_end)
        k = int(np.searchsorted(stamps, t, side="right")) - 1
        if k >= len(stamps) - 1:
            return self._values[-1].copy()
        w = (t - stamps[k]) / (stamps[k + 1] - stamps[k])
        return (1.0 - w) * self._values[k] + w * self._values[k + 1]


class KernelAccumulator:
    """Streaming evaluation of both operators along a drug trajectory.

    Call advance(t, D) once per stamp in order; `tumor` and `normal`
    always hold the operator values at the latest stamp.  Memory is
    O(nodes) regardless of trajectory length, which is what lets the
    solver cross-check kernels on long 2D runs without storing the
    drug history.
    """

    def __init__(self, p: ModelParams, n0: np.ndarray, a0: np.ndarray, d0: np.ndarray):
        shape = np.shape(d0)
        self.p = p
        self.n0 = np.asarray(n0, dtype=float)
        self.a0 = np.asarray(a0, dtype=float)
        self.t = 0.0
        self._abs_d = np.abs(np.asarray(d0, dtype=float))
        zeros = np.zeros(shape)
        self.i_abs = zeros.copy()
        # tumor accumulator: exponent, its running max, rescaled integral
        self._f = zeros.copy()
        self._m = zeros.copy()
        self._s = zeros.copy()
        self.tumor = self.a0.copy()
        # normal accumulator: nondecreasing exponent and rescaled integral
        self._int_tumor = zeros.copy()
        self._g = zeros.copy()
        self._r = zeros.copy()
        self.normal = self.n0.copy()

    def copy(self) -> "KernelAccumulator":
        dup = object.__new__(KernelAccumulator)
        dup.p, dup.n0, dup.a0, dup.t = self.p, self.n0, self.a0, self.t
        for name in ("_abs_d", "i_abs", "_f", "_m", "_s", "tumor",
                     "_int_tumor", "_g", "_r", "normal"):
            setattr(dup, name, getattr(self, name).copy())
        return dup

    def advance(self, t_new: float, d_new: np.ndarray) -> None:
        p = self.p
        dt = t_new - self.t
        if not dt > 0.0:
            raise ValidationError(
                f"accumulator stamps must increase: {t_new} after {self.t}"
            )
        abs_new = np.abs(np.asarray(d_new, dtype=float))
        self.i_abs = self.i_abs + 0.5 * dt * (self._abs_d + abs_new)

        # tumor: rescale the exponential integral by the running max exponent
        a_kill = p.alpha_A * p.gamma_A
        f_new = p.lam * t_new - a_kill * self.i_abs
        m_new = np.maximum(self._m, f_new)
        s_new = self._s * np.exp(self._m - m_new) + 0.5 * dt * (
            np.exp(self._f - m_new) + np.exp(f_new - m_new)
        )
        num = self.a0 * p.k_A * np.exp(f_new - m_new)
        den = p.k_A * np.exp(-m_new) + self.a0 * p.r_A * s_new
        tumor_new = num / np.where(num > 0.0, den, 1.0)

        # normal: the exponent is nondecreasing, so increments are <= 0 in exp
        self._int_tumor = self._int_tumor + 0.5 * dt * (self.tumor + tumor_new)
        g_new = p.mu_N * t_new + p.alpha_N * p.gamma_N * self.i_abs \
            + p.beta_1 * self._int_tumor
        decay = np.exp(self._g - g_new)
        r_new = self._r * decay + 0.5 * dt * (decay + 1.0)
        normal_new = self.n0 * np.exp(-g_new) + p.r_N * r_new

        self.t = t_new
        self._abs_d = abs_new
        self._f, self._m, self._s, self.tumor = f_new, m_new, s_new, tumor_new
        self._g, self._r, self.normal = g_new, r_new, normal_new


def _check_initial(name: str, field: np.ndarray) -> None:
    if np.min(field) < 0.0:
        raise NegativeInput(f"{name} must be nonnegative everywhere")


def _sweep(hist: DrugHistory, n0: np.ndarray, a0: np.ndarray,
           p: ModelParams, t: float) -> KernelAccumulator:
    """Accumulator advanced through the history up to time t.

    t may fall between stamps; the final partial step uses the linear
    interpolant of the drug field, consistent with the trapezoid rule.
    """
    if t < -_STAMP_TOL or t > hist.t_end + _STAMP_TOL:
        raise HistoryTooShort(f"t={t} beyond stored history [0, {hist.t_end}]")
    acc = KernelAccumulator(p, n0, a0, hist.field_at(0))
    stamps = hist.stamps
    for k in range(1, len(stamps)):
        if stamps[k] > t + _STAMP_TOL:
            break
        acc.advance(stamps[k], hist.field_at(k))
    if t > acc.t + _STAMP_TOL:
        acc.advance(t, hist.interp(t))
    return acc


def lambda_op(hist: DrugHistory, a0: np.ndarray, p: ModelParams, t: float) -> np.ndarray:
    """Tumor field at time t for initial data a0 and the given drug history."""
    hist.grid.check_field(a0)
    _check_initial("A0", a0)
    return _sweep(hist, np.zeros_like(np.asarray(a0, dtype=float)), a0, p, t).tumor


def theta_op(hist: DrugHistory, n0: np.ndarray, a0: np.ndarray,
             p: ModelParams, t: float) -> np.ndarray:
    """Normal-cell field at time t; evaluates the tumor operator internally."""
    hist.grid.check_field(n0)
    hist.grid.check_field(a0)
    _check_initial("N0", n0)
    _check_initial("A0", a0)
    return _sweep(hist, n0, a0, p, t).normal


def evaluate_kernels_at_stamps(hist: DrugHistory, n0: np.ndarray, a0: np.ndarray,
                               p: ModelParams) -> tuple[np.ndarray, np.ndarray]:
    """Both operators at every history stamp, in one O(stamps*nodes) sweep.

    Returns (tumor, normal) arrays of shape (n_stamps,) + grid.shape.
    """
    _check_initial("N0", n0)
    _check_initial("A0", a0)
    acc = KernelAccumulator(p, n0, a0, hist.field_at(0))
    stamps = hist.stamps
    tumor = np.empty((len(stamps),) + hist.grid.shape)
    normal = np.empty_like(tumor)
    tumor[0], normal[0] = acc.tumor, acc.normal
    for k in range(1, len(stamps)):
        acc.advance(stamps[k], hist.field_at(k))
        tumor[k], normal[k] = acc.tumor, acc.normal
    return tumor, normal


@dataclass(frozen=True)
class KernelConstants:
    """Explicit sup-norm Lipschitz constants of the two operators."""

    c1: float
    c2: float


def lipschitz_constants(p: ModelParams, a0_sup: float, n0_sup: float,
                        phi_sup: float) -> KernelConstants:
    """Bounds on the operator sensitivity per unit sup-norm drug change.

    c1 bounds the tumor operator; c2 the normal operator, assembled as
    the four-term sum the tumor constant feeds into.  Both are upper
    bounds, not sharp: at long horizons and fast growth they are huge
    (and may saturate to inf) while empirical quotients stay modest.
    """
    cl = p.c_lambda
    t = p.T
    a_kill = p.alpha_A * p.gamma_A
    c1 = a0_sup * cl * a_kill * t \
        + (2.0 / p.k_A) * a0_sup ** 2 * p.r_A * cl ** 2 * a_kill * t ** 2
    e_drug = _exp_capped(p.alpha_N * p.gamma_N * t * phi_sup)
    e_tumor = _exp_capped(p.beta_1 * t * cl * a0_sup)
    e_decay = _exp_capped(p.mu_N * t)
    n_kill = p.alpha_N * p.gamma_N
    c2 = n0_sup * e_drug * p.beta_1 * t ** 2 * c1 \
        + n0_sup * e_tumor * n_kill * t ** 2 \
        + p.r_N * e_decay * e_drug * e_tumor * p.beta_1 * t ** 2 * c1 \
        + p.r_N * e_decay * e_drug * e_tumor * n_kill * t ** 2
    return KernelConstants(c1=c1, c2=c2)


def bound_envelope(p: ModelParams, n0_sup: float, a0_sup: float) -> tuple[float, float]:
    """Proved sup bounds (N_max, A_max) for the two operators on [0, T]."""
    return n0_sup + p.r_N * p.T, p.c_lambda * a0_sup
