import json
import subprocess
import sys

import numpy as np
import pytest

from chemosim.domain import build_grid
from chemosim.errors import ParseError, UnknownKey, ValidationError
from chemosim.io import (
    MANIFEST_NAME,
    parse_config,
    read_manifest,
    read_snapshot,
    serialize_config,
    snapshot_to_state,
    write_run,
    write_snapshot,
)
from chemosim.params import equilibrium_no_treatment
from chemosim.scenarios import builtin_scenario, run_scenario
from chemosim.solver import SolverConfig, State

TINY_CONFIG = """\
# fast custom setup used by the CLI tests
[domain]
dim = 1
L = 1.0
n = 8

[scenario]
omega = 0, 0.125
t_end = 1.0
snapshots = 0, 0.5, 1.0

[model]
r_N = 1
mu_N = 1
beta_1 = 1.5
r_A = 1
k_A = 1
mu_A = 0.05
eps_A = 0.05
alpha_N = 1
alpha_A = 10
gamma_N = 0.1
gamma_A = 1
mu = 3
tau = 0.9
sigma = 0.1
"""


def test_minimal_builtin_selection():
    spec, cfg = parse_config("[scenario]\nid = 3\n")
    assert spec == builtin_scenario(3)
    assert spec.id == 3
    assert cfg == SolverConfig(t_end=25.0)


def test_override_reproduces_other_row():
    spec, _ = parse_config("[scenario]\nid = 2\n\n[model]\nmu = 6\n")
    assert spec == builtin_scenario(3)


def test_unknown_key_is_an_error():
    with pytest.raises(UnknownKey) as err:
        parse_config("[model]\ntaau = 0.9\n")
    assert "taau" in str(err.value)
    assert err.value.line_no == 2


def test_unknown_section_and_syntax_errors():
    with pytest.raises(ParseError):
        parse_config("[modell]\ntau = 1\n")
    with pytest.raises(ParseError):
        parse_config("tau = 1\n")          # key before any section
    with pytest.raises(ParseError):
        parse_config("[model]\ntau 0.9\n")  # missing '='
    with pytest.raises(ParseError):
        parse_config("[model]\ntau = 0.9\ntau = 1.0\n")


def test_bad_values_reported_with_line():
    with pytest.raises(ParseError) as err:
        parse_config("[model]\ntau = fast\n")
    assert err.value.line_no == 2
    with pytest.raises(ParseError):
        parse_config("[scenario]\nid = 2\nomega = 0, 0.1, 0.2\n")
    with pytest.raises(ParseError):
        parse_config("[scenario]\nid = 2\nt_end = 9\n\n[model]\nT = 9\n")


def test_custom_spec_requires_full_field_set():
    with pytest.raises(ValidationError) as err:
        parse_config("[domain]\ndim = 1\nn = 8\n\n[scenario]\nomega = 0, 0.1\n"
                     "\n[model]\nr_N = 1\n")
    assert "missing" in str(err.value)


def test_custom_config_round_trip():
    spec, cfg = parse_config(TINY_CONFIG)
    assert spec.dim == 1 and spec.n == 8
    assert spec.t_end == 1.0
    text = serialize_config(spec, cfg)
    spec2, cfg2 = parse_config(text)
    assert spec2 == spec
    assert cfg2 == cfg


def test_builtin_serialize_round_trip():
    spec = builtin_scenario(4)
    spec2, _ = parse_config(serialize_config(spec))
    assert spec2 == spec


def test_snapshot_zero_state(tmp_path):
    g = build_grid(1, 1.0, 2)
    path = write_snapshot(State(0.0, g.zeros(), g.zeros(), g.zeros(), g),
                          tmp_path / "snap.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == "x,N,A,D"
    assert len(lines) == 4
    assert lines[1].split(",")[1:] == ["0", "0", "0"]


@pytest.mark.parametrize("dim", [1, 2])
def test_snapshot_round_trip_bit_exact(dim, tmp_path):
    rng = np.random.default_rng(5)
    g = build_grid(dim, 1.0, 6)
    state = State(0.25, rng.uniform(0, 2, g.shape), rng.uniform(0, 1, g.shape),
                  rng.uniform(0, 3, g.shape), g)
    path = write_snapshot(state, tmp_path / "snap.csv")
    cols = read_snapshot(path)
    back = snapshot_to_state(g, 0.25, cols)
    assert np.array_equal(back.N, state.N)
    assert np.array_equal(back.A, state.A)
    assert np.array_equal(back.D, state.D)
    assert "\r" not in path.read_bytes().decode()


def test_snapshot_initial_equilibrium_2d(tmp_path):
    spec = builtin_scenario(1)
    g = build_grid(spec.dim, spec.L, spec.n)
    n2, a2 = equilibrium_no_treatment(spec.params)
    state = State(0.0, g.full(n2), g.full(a2), g.zeros(), g)
    path = write_snapshot(state, tmp_path / "snap.csv")
    lines = path.read_text().splitlines()
    assert len(lines) == 2601 + 1
    cols = read_snapshot(path)
    assert np.all(cols["N"] == n2)
    assert np.all(cols["A"] == 0.9)
    assert np.all(cols["D"] == 0.0)


def run_tiny(tmp_path, name):
    spec, cfg = parse_config(TINY_CONFIG)
    report, traj = run_scenario(spec, cfg)
    out = tmp_path / name
    manifest = write_run(out, spec, cfg, traj, report, seed=0)
    return out, manifest


def test_write_run_manifest_lists_all_files(tmp_path):
    out, manifest = run_tiny(tmp_path, "run1")
    assert (out / MANIFEST_NAME).exists()
    assert manifest == read_manifest(out)
    files = {e["file"] for e in manifest["snapshots"]}
    assert files == {p.name for p in out.glob("snapshot_*.csv")}
    for entry in manifest["snapshots"]:
        assert (out / entry["file"]).exists()
    assert manifest["outcome"] in ("persistence", "extinction")
    assert manifest["audit"]["passed"] is True


def test_reruns_byte_identical_modulo_wall_clock(tmp_path):
    out1, _ = run_tiny(tmp_path, "run1")
    out2, _ = run_tiny(tmp_path, "run2")
    for p1 in sorted(out1.glob("snapshot_*.csv")):
        p2 = out2 / p1.name
        assert p1.read_bytes() == p2.read_bytes()
    m1 = json.loads((out1 / MANIFEST_NAME).read_text())
    m2 = json.loads((out2 / MANIFEST_NAME).read_text())
    m1.pop("wall_clock_s"), m2.pop("wall_clock_s")
    assert m1 == m2


def cli(*args):
    return subprocess.run([sys.executable, "-m", "chemosim", *args],
                          capture_output=True, text=True)


def test_cli_scenarios_listing():
    proc = cli("scenarios")
    assert proc.returncode == 0
    assert len(proc.stdout.strip().splitlines()) == 6  # header + five rows


def test_cli_run_config_and_unknown_scenario(tmp_path):
    cfg_path = tmp_path / "tiny.cfg"
    cfg_path.write_text(TINY_CONFIG)
    out = tmp_path / "out"
    proc = cli("run", str(cfg_path), "--out-dir", str(out))
    assert proc.returncode == 0, proc.stderr
    manifest = read_manifest(out)
    assert manifest["seed"] == 0
    assert (out / manifest["snapshots"][0]["file"]).exists()

    proc = cli("run", "9")
    assert proc.returncode == 2
    assert "scenario" in proc.stderr


def test_cli_run_picard_check(tmp_path):
    cfg_path = tmp_path / "tiny.cfg"
    cfg_path.write_text(TINY_CONFIG)
    out = tmp_path / "out"
    proc = cli("run", str(cfg_path), "--out-dir", str(out), "--picard-check")
    assert proc.returncode == 0, proc.stderr
    manifest = read_manifest(out)
    assert manifest["picard_agreement"] is not None
    assert manifest["picard_agreement"] <= 1e-3
    assert manifest["picard_iterations"] >= 1


def test_cli_run_builtin_doubled_dose(tmp_path):
    out = tmp_path / "out"
    proc = cli("run", "3", "--out-dir", str(out))
    assert proc.returncode == 0, proc.stderr
    manifest = read_manifest(out)
    assert manifest["outcome"] == "extinction"
    assert manifest["audit"]["passed"] is True
    # one data row per node on the 51-node interval
    first = out / manifest["snapshots"][0]["file"]
    assert len(first.read_text().splitlines()) == 52


def test_cli_run_rejects_bad_config(tmp_path):
    cfg_path = tmp_path / "bad.cfg"
    cfg_path.write_text("[model]\ntaau = 0.9\n")
    proc = cli("run", str(cfg_path))
    assert proc.returncode == 2
    assert "taau" in proc.stderr


def test_cli_verify_ratio_deterministic():
    first = cli("verify", "--suite", "ratio", "--seed", "7")
    second = cli("verify", "--suite", "ratio", "--seed", "7")
    assert first.returncode == 0
    assert first.stdout == second.stdout
    assert "ratio-lemma: PASS" in first.stdout


def test_cli_verify_exit_code_on_audit_failure(monkeypatch):
    import chemosim.cli as cli_mod
    from chemosim.verify import AuditCheck, AuditReport

    failing = AuditReport(name="ratio-lemma",
                          checks=[AuditCheck("forced", False, -1.0)])
    monkeypatch.setattr(cli_mod, "audit_ratio_lemma", lambda *a, **k: failing)
    assert cli_mod.main(["verify", "--suite", "ratio"]) == 1


def test_cli_verify_lipschitz():
    proc = cli("verify", "--suite", "lipschitz", "--seed", "3")
    assert proc.returncode == 0
    assert "lipschitz: PASS" in proc.stdout
