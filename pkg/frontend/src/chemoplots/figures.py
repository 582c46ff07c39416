"""Render publication-style figures from a simulator run directory.

Consumes only the documented run-directory formats: `manifest.json`
plus one CSV per snapshot (`x[,y],N,A,D`, row-major nodes).  2D runs
become a 3 x k panel grid (rows: normal cells in blues, tumor cells in
reds, drug in greens; columns: snapshot times).  1D runs become k
panels, one per time, with the three populations overlaid as lines.
The drug scale always spans [0, mu/tau] exactly, so the proved ceiling
is visually checkable.  Rendering never writes into the run directory.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib
import numpy as np

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

__all__ = ["FigureSpec", "RenderResult", "render_run", "MissingSnapshot", "MalformedCsv"]

MANIFEST_NAME = "manifest.json"

POPULATIONS = ("N", "A", "D")
DEFAULT_COLORS = {"N": "tab:blue", "A": "tab:red", "D": "tab:green"}
DEFAULT_CMAPS = {"N": "Blues", "A": "Reds", "D": "Greens"}


class MissingSnapshot(Exception):
    """Run directory lacks the manifest or a requested snapshot."""


class MalformedCsv(Exception):
    """Snapshot file deviates from the documented CSV schema."""


@dataclass
class FigureSpec:
    run_dir: str | Path
    times: tuple[float, ...] | None = None   # None: every manifest snapshot
    out_dir: str | Path | None = None        # None: sibling '<run>_figures'
    colors: dict = field(default_factory=lambda: dict(DEFAULT_COLORS))
    cmaps: dict = field(default_factory=lambda: dict(DEFAULT_CMAPS))
    dpi: int = 130


@dataclass
class RenderResult:
    images: list[Path]
    metadata_path: Path
    panel_grid: tuple[int, int]
    panel_count: int
    lines_per_panel: int          # 0 for heatmap layouts
    d_scale: tuple[float, float]
    times: tuple[float, ...]


def load_manifest(run_dir: Path) -> dict:
    path = run_dir / MANIFEST_NAME
    if not path.exists():
        raise MissingSnapshot(f"{run_dir}: no {MANIFEST_NAME} (incomplete run?)")
    return json.loads(path.read_text())


def read_snapshot_csv(path: Path) -> dict[str, np.ndarray]:
    if not path.exists():
        raise MissingSnapshot(f"missing snapshot file {path}")
    lines = path.read_text().strip().splitlines()
    header = lines[0].split(",")
    if header not in (["x", "N", "A", "D"], ["x", "y", "N", "A", "D"]):
        raise MalformedCsv(f"{path}: unexpected header {lines[0]!r}")
    try:
        rows = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    except ValueError as exc:
        raise MalformedCsv(f"{path}: {exc}") from exc
    if rows.ndim != 2 or rows.shape[1] != len(header):
        raise MalformedCsv(f"{path}: ragged rows")
    return {name: rows[:, k] for k, name in enumerate(header)}


def _select_snapshots(manifest: dict, times: tuple[float, ...] | None):
    entries = manifest.get("snapshots", [])
    if not entries:
        raise MissingSnapshot("manifest lists no snapshots")
    if times is None:
        return entries
    # stored times sit on the nearest solver step of the requested ones
    tol = max(0.51 * manifest.get("solver", {}).get("dt", 0.0), 1e-6)
    chosen = []
    for t in times:
        hits = [e for e in entries if abs(e["time"] - t) <= tol]
        if not hits:
            available = [e["time"] for e in entries]
            raise MissingSnapshot(f"time {t} not in manifest snapshots {available}")
        chosen.append(min(hits, key=lambda e: abs(e["time"] - t)))
    return chosen


def _fields_2d(columns: dict[str, np.ndarray], n: int) -> dict[str, np.ndarray]:
    side = n + 1
    if columns["N"].size != side * side:
        raise MalformedCsv(f"expected {side * side} rows, got {columns['N'].size}")
    return {pop: columns[pop].reshape(side, side) for pop in POPULATIONS}


def render_run(figspec: FigureSpec) -> RenderResult:
    run_dir = Path(figspec.run_dir)
    manifest = load_manifest(run_dir)
    scenario = manifest["scenario"]
    dim = scenario["dim"]
    length = scenario["L"]
    ceiling = manifest["drug_ceiling"]
    entries = _select_snapshots(manifest, figspec.times)
    picked_times = tuple(e["time"] for e in entries)
    snaps = [read_snapshot_csv(run_dir / e["file"]) for e in entries]

    out_dir = Path(figspec.out_dir) if figspec.out_dir is not None \
        else run_dir.parent / f"{run_dir.name}_figures"
    out_dir.mkdir(parents=True, exist_ok=True)

    if dim == 2:
        result = _render_heatmap_grid(figspec, snaps, picked_times, scenario,
                                      length, ceiling, out_dir)
    else:
        result = _render_line_panels(figspec, snaps, picked_times, length,
                                     ceiling, out_dir)

    metadata = {
        "run_dir": str(run_dir),
        "dim": dim,
        "times": list(result.times),
        "panel_grid": list(result.panel_grid),
        "panel_count": result.panel_count,
        "lines_per_panel": result.lines_per_panel,
        "d_scale": list(result.d_scale),
        "colors": figspec.colors,
        "images": [p.name for p in result.images],
    }
    metadata_path = out_dir / "figures.json"
    metadata_path.write_text(json.dumps(metadata, indent=2, sort_keys=True) + "\n")
    result.metadata_path = metadata_path
    return result


def _render_heatmap_grid(figspec, snaps, times, scenario, length, ceiling,
                         out_dir) -> RenderResult:
    n = scenario["n"]
    fields = [_fields_2d(cols, n) for cols in snaps]
    k = len(fields)
    fig, axes = plt.subplots(3, k, figsize=(3.1 * k, 8.4),
                             squeeze=False, constrained_layout=True)
    scales = {
        "N": (0.0, max(f["N"].max() for f in fields)),
        "A": (0.0, max(f["A"].max() for f in fields)),
        "D": (0.0, ceiling),
    }
    for row, pop in enumerate(POPULATIONS):
        vmin, vmax = scales[pop]
        for col, (f, t) in enumerate(zip(fields, times)):
            ax = axes[row][col]
            image = ax.imshow(f[pop].T, origin="lower", extent=(0, length, 0, length),
                              cmap=figspec.cmaps[pop], vmin=vmin, vmax=vmax)
            ax.set_title(f"{pop}, t = {t:g}", fontsize=10)
            ax.set_xlabel("x")
            if col == 0:
                ax.set_ylabel("y")
        fig.colorbar(image, ax=axes[row][-1], shrink=0.85)
    path = out_dir / "figure.png"
    fig.savefig(path, dpi=figspec.dpi)
    plt.close(fig)
    return RenderResult(images=[path], metadata_path=path, panel_grid=(3, k),
                        panel_count=3 * k, lines_per_panel=0,
                        d_scale=(0.0, ceiling), times=times)


def _render_line_panels(figspec, snaps, times, length, ceiling,
                        out_dir) -> RenderResult:
    k = len(snaps)
    cols = min(k, 3)
    rows = (k + cols - 1) // cols
    fig, axes = plt.subplots(rows, cols, figsize=(4.2 * cols, 3.0 * rows),
                             squeeze=False, constrained_layout=True)
    cell_max = max(max(c["N"].max(), c["A"].max()) for c in snaps)
    for idx, (colsnap, t) in enumerate(zip(snaps, times)):
        ax = axes[idx // cols][idx % cols]
        x = colsnap["x"]
        ax.plot(x, colsnap["N"], color=figspec.colors["N"], label="N")
        ax.plot(x, colsnap["A"], color=figspec.colors["A"], label="A")
        ax.set_ylim(0.0, 1.05 * cell_max)
        ax.set_xlim(0.0, length)
        ax.set_xlabel("x")
        ax.set_ylabel("cells")
        # drug on its own axis spanning exactly [0, mu/tau]
        twin = ax.twinx()
        twin.plot(x, colsnap["D"], color=figspec.colors["D"], label="D")
        twin.set_ylim(0.0, ceiling if ceiling > 0.0 else 1.0)
        twin.set_ylabel("drug")
        ax.set_title(f"t = {t:g}", fontsize=10)
        if idx == 0:
            lines = ax.get_lines() + twin.get_lines()
            ax.legend(lines, [ln.get_label() for ln in lines], fontsize=8)
    for idx in range(k, rows * cols):
        axes[idx // cols][idx % cols].axis("off")
    path = out_dir / "figure.png"
    fig.savefig(path, dpi=figspec.dpi)
    plt.close(fig)
    return RenderResult(images=[path], metadata_path=path, panel_grid=(rows, cols),
                        panel_count=k, lines_per_panel=3,
                        d_scale=(0.0, ceiling if ceiling > 0.0 else 1.0), times=times)
