"""Acceptance gate: every primary criterion at its stated tolerance.

Each test prints one PASS/FAIL line (visible with `pytest -s`).  The
scenario integrations are session-cached, so the whole gate costs five
method-of-lines runs, seven fixed-point runs, and the property sweeps.
"""

import math
import time

import numpy as np
import pytest

from chemosim.domain import Region, build_grid, laplacian, source_profile
from chemosim.params import equilibrium_no_treatment
from chemosim.scenarios import base_params, builtin_scenario
from chemosim.solver import SolverConfig, State, integrate_mol
from chemosim.verify import (
    audit_bounds,
    audit_lipschitz,
    audit_ratio_lemma,
    oracle_kernels,
    random_piecewise_history,
    trajectory_difference,
)

PICARD_TOL = 1e-6  # default SolverConfig tolerance, pinned here for messages


def criterion(ok: bool, text: str) -> None:
    print(f"\nACCEPTANCE {'PASS' if ok else 'FAIL'} - {text}")
    assert ok, text


def test_builtin_outcome_reproduction(mol_runs):
    expected = {1: "persistence", 2: "persistence",
                3: "extinction", 4: "extinction", 5: "extinction"}
    results = {}
    ok = True
    for sid, want in expected.items():
        report, _ = mol_runs(sid)
        max_a = report.max_a_final
        if want == "persistence":
            good = report.outcome == want and max_a > 0.1
        else:
            good = report.outcome == want and max_a < 1e-3
        ok = ok and good
        results[sid] = f"{sid}:{report.outcome}/maxA={max_a:.2e}/{report.wall_clock_s:.0f}s"
    criterion(ok, "built-in outcomes (1,2 persistence >0.1; 3,4,5 extinction <1e-3): "
                  + " ".join(results.values()))


def test_extinction_front_pattern(mol_runs):
    _, traj = mol_runs(2)
    s15 = traj.snapshot_at(15.0)
    x = traj.grid.axis_coords()
    near = float(s15.A[x <= 0.5 + 1e-12].max())
    far = float(s15.A[x > 0.7].max())
    ok = near < 1e-3 and far > 0.1
    criterion(ok, f"Simulation 2 pattern at t=15: A<=1e-3 for x<=0.5 (got {near:.2e}), "
                  f"max A over x>0.7 > 0.1 (got {far:.3f})")


def test_invariant_region_audit_both_paths(mol_runs, picard_runs):
    ok = True
    details = []
    for sid in (1, 2, 3, 4, 5):
        report, mol = mol_runs(sid)
        pic = picard_runs(sid)
        p = builtin_scenario(sid).params
        audit_pic = audit_bounds(pic, p)
        good = report.audit.passed and audit_pic.passed
        ok = ok and good
        details.append(f"{sid}:{'ok' if good else 'VIOLATION'}")
        # uniqueness-backed cross-path agreement on every shared snapshot
        agreement = trajectory_difference(mol, pic)
        good_agree = agreement <= max(1e-3, 10.0 * PICARD_TOL)
        ok = ok and good_agree
        details.append(f"{sid}-agree:{agreement:.1e}")
    criterion(ok, "invariant region (0<=N,A; 0<=D<=mu/tau; sup envelopes) on every "
                  "node/step, both paths, all scenarios: " + " ".join(details))


def test_kernel_oracle_equivalence():
    rng = np.random.default_rng(2024)
    grid = build_grid(1, 1.0, 10)
    p = base_params(alpha_A=5.0, mu=3.0, sigma=0.1, T=5.0)
    stamps = np.linspace(0.0, 5.0, 10001)  # spacing 5e-4
    started = time.perf_counter()
    worst = -math.inf
    failures = 0
    for _ in range(20):
        hist = random_piecewise_history(rng, grid, stamps, p.mu / p.tau)
        n0 = rng.uniform(0.0, 1.0, grid.shape)
        a0 = rng.uniform(0.0, 1.0, grid.shape)
        report = oracle_kernels(hist, n0, a0, p, tol=1e-6, oracle_dt=1e-4)
        failures += 0 if report.passed else 1
        worst = max(worst, 1e-6 - min(c.margin for c in report.checks))
    elapsed = time.perf_counter() - started
    ok = failures == 0 and elapsed < 60.0
    criterion(ok, f"kernel operators vs dense per-node ODE: 20 seeded histories, "
                  f"worst Linf {worst:.2e} <= 1e-6, {elapsed:.0f}s < 60s")


def test_method_cross_agreement_and_unique_fixed_point(mol_runs, picard_runs):
    _, mol = mol_runs(2)
    pic_default = picard_runs(2)
    agreement = trajectory_difference(mol, pic_default)

    spec = builtin_scenario(2)
    pic_zero = picard_runs(2, initial_guess=0.0)
    pic_ceiling = picard_runs(2, initial_guess=spec.params.mu / spec.params.tau)
    guess_gap = trajectory_difference(pic_zero, pic_ceiling)

    ok = agreement <= 1e-3 and guess_gap <= 2.0 * PICARD_TOL
    criterion(ok, f"method cross-agreement on Simulation 2: MOL vs fixed point "
                  f"{agreement:.2e} <= 1e-3; two initial guesses (0, mu/tau) agree "
                  f"to {guess_gap:.2e} <= {2.0 * PICARD_TOL:.0e}")


def test_discretization_orders():
    # spatial: no-flux-compatible cosine mode under grid doubling
    errors = {}
    for n in (50, 100):
        g = build_grid(1, 1.0, n)
        u = np.cos(np.pi * g.axis_coords())
        errors[n] = float(np.max(np.abs(laplacian(g, u) + np.pi ** 2 * u)))
    order = math.log2(errors[50] / errors[100])

    # temporal: RK4 self-error against a dt/4 reference under dt halving
    p = base_params(alpha_A=5.0, mu=3.0, sigma=0.1, T=1.0)
    g = build_grid(1, 1.0, 10)
    chi = source_profile(Region.interval(0.0, 0.1), g)
    n2, a2 = equilibrium_no_treatment(p)
    finals = []
    for dt in (0.02, 0.01, 0.005):
        cfg = SolverConfig(t_end=1.0, dt=dt, snapshot_times=(1.0,),
                           track_kernels=False)
        traj = integrate_mol(State(0.0, g.full(n2), g.full(a2), g.zeros(), g),
                             cfg, chi, p)
        s = traj.snapshot_at(1.0)
        finals.append(np.concatenate([s.N, s.A, s.D]))
    factor = (np.max(np.abs(finals[0] - finals[2]))
              / np.max(np.abs(finals[1] - finals[2])))

    ok = 1.9 <= order <= 2.1 and 8.0 <= factor <= 32.0
    criterion(ok, f"discretization orders: Laplacian order {order:.3f} in [1.9, 2.1]; "
                  f"RK4 halving factor {factor:.1f} in [8, 32]")


def test_lemma_property_suites():
    ratio = audit_ratio_lemma(sample_count=1000, seed=42)
    lip = audit_lipschitz(base_params(alpha_A=5.0, mu=3.0, sigma=0.1),
                          T=2.0, trials=100, seed=42)
    n_viol = len(ratio.failures()) + len(lip.failures())
    ok = n_viol == 0
    criterion(ok, f"property suites: averaged-growth ratio (1000 samples) and "
                  f"operator Lipschitz quotients (100 pairs): {n_viol} violations")


def test_monotonicity_spot_checks(mol_runs):
    base_max = mol_runs(2)[0].max_a_final
    dose_max = mol_runs(3)[0].max_a_final      # mu: 3 -> 6 on row-2 geometry
    toxicity_max = mol_runs(5)[0].max_a_final  # alpha_A: 10 -> 20
    ok = dose_max <= base_max + 1e-12 and toxicity_max <= base_max + 1e-12
    criterion(ok, f"monotonicity: raising mu (maxA {base_max:.2e} -> {dose_max:.2e}) "
                  f"and alpha_A (-> {toxicity_max:.2e}) never increases the final "
                  "tumor maximum")


def test_gronwall_two_run_agreement(mol_runs):
    # solver invariant backed by the uniqueness argument: a 1e-8 initial
    # L2 perturbation stays below 1e-2 at the final time
    spec = builtin_scenario(2)
    p = spec.params
    g = build_grid(spec.dim, spec.L, spec.n)
    chi = source_profile(spec.omega, g)
    n2, a2 = equilibrium_no_treatment(p)
    rng = np.random.default_rng(99)
    noise_n = rng.standard_normal(g.shape)
    noise_a = rng.standard_normal(g.shape)
    norm = math.sqrt(g.l2_norm(noise_n) ** 2 + g.l2_norm(noise_a) ** 2)
    delta = 1e-8
    noise_n *= delta / norm
    noise_a *= delta / norm
    cfg = SolverConfig(t_end=25.0, snapshot_times=(25.0,), track_kernels=False)
    pert = integrate_mol(State(0.0, g.full(n2) + noise_n, g.full(a2) + noise_a,
                               g.zeros(), g), cfg, chi, p)
    _, base = mol_runs(2)
    s0 = base.snapshot_at(25.0)
    s1 = pert.snapshot_at(25.0)
    final = math.sqrt(g.l2_norm(s1.N - s0.N) ** 2 + g.l2_norm(s1.A - s0.A) ** 2
                      + g.l2_norm(s1.D - s0.D) ** 2)
    ok = final < 1e-2
    criterion(ok, f"two-run agreement: 1e-8 initial L2 perturbation gives final "
                  f"L2 distance {final:.2e} < 1e-2")
