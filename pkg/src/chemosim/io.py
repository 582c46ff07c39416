"""Config parsing, snapshot/report persistence, and run-directory layout.

Config files are flat key-value sections:

    [scenario]   id, omega, t_end, snapshots
    [domain]     dim, L, n
    [model]      any model parameter field (r_N, mu_N, beta_1, r_A, k_A,
                 mu_A, eps_A, alpha_N, alpha_A, gamma_N, gamma_A, mu,
                 tau, sigma, T)
    [solver]     method, dt, picard_tol, picard_max_iter,
                 store_history, track_kernels

`#` starts a comment.  `omega` is two comma-separated bounds in 1D or
four (lo_x, hi_x, lo_y, hi_y) in 2D; `snapshots` is a comma-separated
time list.  With `id` set, the other keys override that built-in row;
without it, the full model field set plus geometry is required.
Unknown keys are errors: silent parameter typos corrupt results.

Snapshots are CSV, one per captured time: header `x,N,A,D` (1D) or
`x,y,N,A,D` (2D), nodes in row-major order, 17 significant digits, LF
line endings.  The JSON manifest is written last; its presence marks a
complete run.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .domain import Grid, Region
from .errors import MalformedCsv, ParseError, UnknownKey, ValidationError
from .params import ModelParams, param_field_names, validate_params
from .scenarios import (
    OutcomeReport,
    ScenarioSpec,
    _SNAPSHOTS_1D,
    _SNAPSHOTS_2D,
    builtin_scenario,
)
from .solver import SolverConfig, State, StateTrajectory

__all__ = [
    "parse_config",
    "serialize_config",
    "write_snapshot",
    "read_snapshot",
    "write_run",
    "read_manifest",
    "MANIFEST_NAME",
]

MANIFEST_NAME = "manifest.json"

_SECTIONS = ("scenario", "domain", "model", "solver")
_SCENARIO_KEYS = ("id", "omega", "t_end", "snapshots")
_DOMAIN_KEYS = ("dim", "L", "n")
_SOLVER_KEYS = ("method", "dt", "picard_tol", "picard_max_iter",
                "store_history", "track_kernels")
_KEY_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


def _split_sections(text: str) -> dict[str, dict[str, tuple[str, int]]]:
    """section -> key -> (raw value, line number); strict, no duplicates."""
    sections: dict[str, dict[str, tuple[str, int]]] = {}
    current: str | None = None
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip()
            if name not in _SECTIONS:
                raise ParseError(
                    f"unknown section [{name}]; expected one of {_SECTIONS}", line_no
                )
            current = name
            sections.setdefault(name, {})
            continue
        if "=" not in line:
            raise ParseError(f"expected 'key = value', got {line!r}", line_no)
        if current is None:
            raise ParseError("key outside any [section]", line_no)
        key, value = (part.strip() for part in line.split("=", 1))
        if not _KEY_RE.match(key):
            raise ParseError(f"invalid key name {key!r}", line_no)
        if key in sections[current]:
            raise ParseError(f"duplicate key '{key}' in [{current}]", line_no)
        sections[current][key] = (value, line_no)
    return sections


def _check_keys(section: str, entries: dict[str, tuple[str, int]],
                allowed: tuple[str, ...]) -> None:
    for key, (_, line_no) in entries.items():
        if key not in allowed:
            raise UnknownKey(f"unknown key '{key}' in [{section}]", line_no)


def _as_float(section: str, key: str, entries: dict) -> float | None:
    if key not in entries:
        return None
    value, line_no = entries[key]
    try:
        out = float(value)
    except ValueError:
        raise ParseError(f"[{section}] {key}: expected a number, got {value!r}", line_no)
    if not math.isfinite(out):
        raise ParseError(f"[{section}] {key}: must be finite, got {value!r}", line_no)
    return out


def _as_int(section: str, key: str, entries: dict) -> int | None:
    if key not in entries:
        return None
    value, line_no = entries[key]
    try:
        return int(value)
    except ValueError:
        raise ParseError(f"[{section}] {key}: expected an integer, got {value!r}", line_no)


def _as_bool(section: str, key: str, entries: dict) -> bool | None:
    if key not in entries:
        return None
    value, line_no = entries[key]
    low = value.lower()
    if low in ("true", "yes", "1"):
        return True
    if low in ("false", "no", "0"):
        return False
    raise ParseError(f"[{section}] {key}: expected a boolean, got {value!r}", line_no)


def _as_float_list(section: str, key: str, entries: dict) -> tuple[float, ...] | None:
    if key not in entries:
        return None
    value, line_no = entries[key]
    try:
        return tuple(float(part) for part in value.split(",") if part.strip())
    except ValueError:
        raise ParseError(f"[{section}] {key}: expected comma-separated numbers, "
                         f"got {value!r}", line_no)


def _parse_omega(entries: dict) -> Region | None:
    bounds = _as_float_list("scenario", "omega", entries)
    if bounds is None:
        return None
    if len(bounds) == 2:
        return Region.interval(*bounds)
    if len(bounds) == 4:
        return Region.box(*bounds)
    raise ParseError(
        "omega needs 2 bounds (1D: lo, hi) or 4 (2D: lo_x, hi_x, lo_y, hi_y)",
        entries["omega"][1],
    )


def parse_config(text: str) -> tuple[ScenarioSpec, SolverConfig]:
    """Strictly parse config text into a scenario spec and solver config."""
    sections = _split_sections(text)
    scen = sections.get("scenario", {})
    dom = sections.get("domain", {})
    model = sections.get("model", {})
    solver = sections.get("solver", {})
    _check_keys("scenario", scen, _SCENARIO_KEYS)
    _check_keys("domain", dom, _DOMAIN_KEYS)
    _check_keys("model", model, param_field_names())
    _check_keys("solver", solver, _SOLVER_KEYS)

    t_end = _as_float("scenario", "t_end", scen)
    if t_end is not None and "T" in model:
        raise ParseError("set either [scenario] t_end or [model] T, not both",
                         model["T"][1])
    model_overrides = {
        key: _as_float("model", key, model) for key in model
    }
    if t_end is not None:
        model_overrides["T"] = t_end

    scenario_id = _as_int("scenario", "id", scen)
    omega = _parse_omega(scen)
    snapshots = _as_float_list("scenario", "snapshots", scen)
    dim = _as_int("domain", "dim", dom)
    length = _as_float("domain", "L", dom)
    n = _as_int("domain", "n", dom)

    if scenario_id is not None:
        spec = builtin_scenario(scenario_id)
        params = spec.params.with_overrides(**model_overrides) \
            if model_overrides else spec.params
        new_dim = dim if dim is not None else spec.dim
        spec = ScenarioSpec(
            params=params,
            dim=new_dim,
            n=n if n is not None else spec.n,
            L=length if length is not None else spec.L,
            omega=omega if omega is not None else spec.omega,
            snapshot_times=snapshots if snapshots is not None else spec.snapshot_times,
            id=scenario_id,
        )
    else:
        required = set(param_field_names()) - set(model_overrides)
        if "T" in required and t_end is not None:
            required.discard("T")
        if required:
            raise ValidationError(
                "custom scenario (no id) needs the full model field set; "
                f"missing: {', '.join(sorted(required))}"
            )
        if dim is None or n is None or omega is None:
            raise ValidationError(
                "custom scenario needs [domain] dim and n plus [scenario] omega"
            )
        params = validate_params(ModelParams(**model_overrides))
        spec = ScenarioSpec(
            params=params, dim=dim, n=n,
            L=length if length is not None else 1.0,
            omega=omega,
            snapshot_times=snapshots if snapshots is not None
            else (_SNAPSHOTS_2D if dim == 2 else _SNAPSHOTS_1D),
        )

    cfg = SolverConfig()
    method = solver.get("method")
    if method is not None:
        cfg = replace(cfg, method=method[0])
    dt = _as_float("solver", "dt", solver)
    if dt is not None:
        cfg = replace(cfg, dt=dt)
    picard_tol = _as_float("solver", "picard_tol", solver)
    if picard_tol is not None:
        cfg = replace(cfg, picard_tol=picard_tol)
    picard_max_iter = _as_int("solver", "picard_max_iter", solver)
    if picard_max_iter is not None:
        cfg = replace(cfg, picard_max_iter=picard_max_iter)
    store_history = _as_bool("solver", "store_history", solver)
    if store_history is not None:
        cfg = replace(cfg, store_history=store_history)
    track_kernels = _as_bool("solver", "track_kernels", solver)
    if track_kernels is not None:
        cfg = replace(cfg, track_kernels=track_kernels)
    cfg = replace(cfg, t_end=spec.t_end)
    return spec, cfg


def serialize_config(spec: ScenarioSpec, cfg: SolverConfig | None = None) -> str:
    """Canonical config text; parse_config(serialize_config(s)) == s."""
    if cfg is None:
        cfg = SolverConfig()
    lines = ["[domain]",
             f"dim = {spec.dim}",
             f"L = {spec.L!r}",
             f"n = {spec.n}",
             "",
             "[scenario]"]
    bounds = [b for pair in zip(spec.omega.lo, spec.omega.hi) for b in pair]
    lines.append("omega = " + ", ".join(repr(b) for b in bounds))
    lines.append(f"t_end = {spec.params.T!r}")
    lines.append("snapshots = " + ", ".join(repr(t) for t in spec.snapshot_times))
    lines += ["", "[model]"]
    for name in param_field_names():
        if name == "T":
            continue  # carried by t_end
        lines.append(f"{name} = {getattr(spec.params, name)!r}")
    lines += ["", "[solver]", f"method = {cfg.method}"]
    if cfg.dt is not None:
        lines.append(f"dt = {cfg.dt!r}")
    lines.append(f"picard_tol = {cfg.picard_tol!r}")
    lines.append(f"picard_max_iter = {cfg.picard_max_iter}")
    lines.append(f"store_history = {str(cfg.store_history).lower()}")
    lines.append(f"track_kernels = {str(cfg.track_kernels).lower()}")
    return "\n".join(lines) + "\n"


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_snapshot(state: State, path: str | Path) -> Path:
    """One CSV per snapshot: x[,y],N,A,D rows in row-major node order."""
    grid = state.grid
    path = Path(path)
    coords = grid.axis_coords()
    out = []
    if grid.dim == 1:
        out.append("x,N,A,D")
        for i in range(grid.n + 1):
            out.append(",".join([_fmt(coords[i]), _fmt(state.N[i]),
                                 _fmt(state.A[i]), _fmt(state.D[i])]))
    else:
        out.append("x,y,N,A,D")
        for i in range(grid.n + 1):
            for j in range(grid.n + 1):
                out.append(",".join([_fmt(coords[i]), _fmt(coords[j]),
                                     _fmt(state.N[i, j]), _fmt(state.A[i, j]),
                                     _fmt(state.D[i, j])]))
    path.write_text("\n".join(out) + "\n", newline="\n")
    return path


def read_snapshot(path: str | Path) -> dict[str, np.ndarray]:
    """Columns of a snapshot CSV, keyed by header name."""
    lines = Path(path).read_text().strip().split("\n")
    header = lines[0].split(",")
    if header not in (["x", "N", "A", "D"], ["x", "y", "N", "A", "D"]):
        raise MalformedCsv(f"{path}: unexpected header {lines[0]!r}")
    try:
        rows = np.array([[float(v) for v in line.split(",")] for line in lines[1:]])
    except ValueError as exc:
        raise MalformedCsv(f"{path}: {exc}") from exc
    if rows.ndim != 2 or rows.shape[1] != len(header):
        raise MalformedCsv(f"{path}: ragged rows")
    return {name: rows[:, k] for k, name in enumerate(header)}


def snapshot_to_state(grid: Grid, t: float, columns: dict[str, np.ndarray]) -> State:
    """Rebuild a State from read_snapshot columns (row-major order)."""
    return State(
        t,
        columns["N"].reshape(grid.shape).copy(),
        columns["A"].reshape(grid.shape).copy(),
        columns["D"].reshape(grid.shape).copy(),
        grid,
    )


def _spec_dict(spec: ScenarioSpec) -> dict:
    return {
        "id": spec.id,
        "dim": spec.dim,
        "n": spec.n,
        "L": spec.L,
        "omega": {"lo": list(spec.omega.lo), "hi": list(spec.omega.hi)},
        "snapshot_times": list(spec.snapshot_times),
        "params": {name: getattr(spec.params, name) for name in param_field_names()},
    }


def write_run(out_dir: str | Path, spec: ScenarioSpec, cfg: SolverConfig,
              traj: StateTrajectory, report: OutcomeReport, seed: int = 0) -> dict:
    """Persist a completed run: snapshots first, manifest last."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    index = []
    for k, state in enumerate(traj.snapshots):
        name = f"snapshot_{k:03d}_t{state.t:.6f}.csv"
        write_snapshot(state, out_dir / name)
        index.append({"index": k, "time": state.t, "file": name})
    manifest = {
        "version": __version__,
        "seed": seed,
        "requested_times": list(traj.requested_times),
        "scenario": _spec_dict(spec),
        "solver": {
            "method": traj.method,
            "dt": traj.dt,
            "n_steps": traj.n_steps,
            "t_end": traj.t_end,
            "picard_tol": cfg.picard_tol,
            "picard_max_iter": cfg.picard_max_iter,
        },
        "snapshots": index,
        "outcome": report.outcome,
        "max_A_final": report.max_a_final,
        "min_N_final": report.min_n_final,
        "stationary": report.stationary,
        "audit": report.audit.to_dict(),
        "picard_agreement": report.picard_agreement,
        "picard_iterations": report.picard_iterations,
        "drug_ceiling": spec.params.mu / spec.params.tau,
        "wall_clock_s": report.wall_clock_s,
    }
    (out_dir / MANIFEST_NAME).write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", newline="\n"
    )
    return manifest


def read_manifest(out_dir: str | Path) -> dict:
    return json.loads((Path(out_dir) / MANIFEST_NAME).read_text())
