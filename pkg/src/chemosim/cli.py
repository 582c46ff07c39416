"""Command-line interface.

    chemosim scenarios                         list the built-in experiments
    chemosim run <id|config> [--out-dir DIR] [--method M] [--dt DT]
                 [--picard-check] [--seed S]
    chemosim verify [--suite bounds|kernels|lipschitz|ratio|all] [--seed S]

Exit codes: 0 success with all audits passing, 1 audit failure,
2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .errors import ChemoSimError
from .io import parse_config, write_run
from .kernels import DrugHistory
from .scenarios import (
    ScenarioSpec,
    base_params,
    builtin_scenario,
    builtin_table,
    run_scenario,
    run_scenario_picard,
)
from .solver import SolverConfig
from .domain import Region, build_grid
from .verify import (
    AuditReport,
    audit_bounds,
    audit_lipschitz,
    audit_ratio_lemma,
    oracle_kernels,
    random_piecewise_history,
)

_SUITES = ("bounds", "kernels", "lipschitz", "ratio", "all")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chemosim",
        description="Tumor/normal-tissue chemotherapy simulator and verification suite",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario and write snapshots")
    p_run.add_argument("target", help="built-in scenario id (1..5) or config file path")
    p_run.add_argument("--method", choices=("rk4", "explicit-euler"))
    p_run.add_argument("--dt", type=float)
    p_run.add_argument("--out-dir", default=None)
    p_run.add_argument("--picard-check", action="store_true",
                       help="also solve by fixed-point iteration and report agreement")
    p_run.add_argument("--seed", type=int, default=0)

    p_verify = sub.add_parser("verify", help="run the property audit suites")
    p_verify.add_argument("--suite", choices=_SUITES, default="all")
    p_verify.add_argument("--seed", type=int, default=0)

    sub.add_parser("scenarios", help="list the built-in experiments")
    return parser


def _cmd_scenarios() -> int:
    print("id  outcome      alpha_A  mu   sigma  dim  omega")
    for sid, row in builtin_table().items():
        lo, hi = row["omega"]
        omega = " x ".join(f"[{a:g}, {b:g}]" for a, b in zip(lo, hi))
        print(f"{sid:<3} {row['outcome']:<12} {row['alpha_A']:<8g} "
              f"{row['mu']:<4g} {row['sigma']:<6g} {row['dim']:<4} {omega}")
    return 0


def _cmd_run(args: argparse.Namespace) -> int:
    if args.target.isdigit():
        spec = builtin_scenario(int(args.target))
        cfg = SolverConfig()
        label = f"scenario-{args.target}"
    else:
        spec, cfg = parse_config(Path(args.target).read_text())
        label = Path(args.target).stem
    if args.method:
        cfg = replace(cfg, method=args.method)
    if args.dt is not None:
        cfg = replace(cfg, dt=args.dt)

    report, traj = run_scenario(spec, cfg, picard_check=args.picard_check)
    out_dir = Path(args.out_dir) if args.out_dir else Path("runs") / label
    write_run(out_dir, spec, cfg, traj, report, seed=args.seed)

    print(f"outcome: {report.outcome} (max A at t_end = {report.max_a_final:.3e}, "
          f"stationary: {report.stationary})")
    if report.picard_agreement is not None:
        print(f"fixed-point agreement: {report.picard_agreement:.3e} "
              f"in {report.picard_iterations} iterations")
    print(report.audit.summary())
    print(f"wall clock: {report.wall_clock_s:.1f} s; wrote {out_dir}")
    return 0 if report.audit.passed else 1


def _bounds_suite() -> list[AuditReport]:
    reports = []
    report, _ = run_scenario(builtin_scenario(2))
    report.audit.name = "bounds (scenario 2, method of lines)"
    reports.append(report.audit)
    small = ScenarioSpec(
        params=base_params(alpha_A=10.0, mu=3.0, sigma=0.1, T=2.0),
        dim=1, n=10, L=1.0, omega=Region.interval(0.0, 0.1),
        snapshot_times=(0.0, 1.0, 2.0),
    )
    ptraj = run_scenario_picard(small)
    audit = audit_bounds(ptraj, small.params)
    audit.name = "bounds (small scenario, fixed point)"
    reports.append(audit)
    return reports


def _kernels_suite(seed: int) -> list[AuditReport]:
    rng = np.random.default_rng(seed)
    grid = build_grid(1, 1.0, 10)
    p = base_params(alpha_A=5.0, mu=3.0, sigma=0.1, T=2.0)
    stamps = np.linspace(0.0, p.T, 4001)  # spacing 5e-4: quadrature error ~1e-7
    reports = []
    for k in range(3):
        hist = random_piecewise_history(rng, grid, stamps, p.mu / p.tau)
        n0 = rng.uniform(0.0, 1.0, grid.shape)
        a0 = rng.uniform(0.0, 1.0, grid.shape)
        report = oracle_kernels(hist, n0, a0, p, tol=1e-6)
        report.name = f"kernel-oracle (history {k})"
        report.seed = seed
        reports.append(report)
    zero = DrugHistory.constant(grid, 0.0, stamps)
    report = oracle_kernels(zero, grid.full(0.4), grid.full(0.9), p, tol=1e-6)
    report.name = "kernel-oracle (no drug)"
    reports.append(report)
    return reports


def _cmd_verify(args: argparse.Namespace) -> int:
    reports: list[AuditReport] = []
    if args.suite in ("ratio", "all"):
        reports.append(audit_ratio_lemma(1000, seed=args.seed))
    if args.suite in ("lipschitz", "all"):
        p = base_params(alpha_A=5.0, mu=3.0, sigma=0.1)
        reports.append(audit_lipschitz(p, T=2.0, trials=100, seed=args.seed))
    if args.suite in ("kernels", "all"):
        reports.extend(_kernels_suite(args.seed))
    if args.suite in ("bounds", "all"):
        reports.extend(_bounds_suite())
    for report in reports:
        print(report.summary())
    return 0 if all(r.passed for r in reports) else 1


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "scenarios":
            return _cmd_scenarios()
        if args.command == "run":
            return _cmd_run(args)
        return _cmd_verify(args)
    except ChemoSimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
