import hashlib
import subprocess
import sys

import numpy as np
import pytest

from qmcf import cli
from qmcf.config import ConfigError, parse_config


def run_cli(args):
    proc = subprocess.run([sys.executable, "-m", "qmcf.cli", *args],
                          capture_output=True, text=True)
    return proc


def test_empty_config_is_all_defaults(tmp_path):
    path = tmp_path / "empty.cfg"
    path.write_text("")
    cfg = parse_config(path)
    assert cfg.get("model", "a") == 3.0
    assert cfg.get("model", "b") == 9.0
    assert cfg.get("model", "c") == 1.0
    assert cfg.get("model", "K") == 4
    assert cfg.get("interface", "delta_I") == 0.2
    assert cfg.get("interface", "R0") == 0.4
    assert cfg.get("domain", "L") == 1.0
    assert cfg.pot.s_plus == 3.0


def test_missing_file_rejected():
    with pytest.raises((ConfigError, FileNotFoundError)):
        parse_config("/nonexistent/path.cfg")


def test_noncritical_b_rejected(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("[model]\nb = 10\ncritical = true\n")
    with pytest.raises(ConfigError):
        parse_config(path)
    path.write_text("[model]\nb = 10\ncritical = false\n")
    parse_config(path)  # fine when not declared critical


def test_nonpositive_eps_rejected(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("[model]\neps = -0.5\n")
    with pytest.raises(ConfigError):
        parse_config(path)


def test_unknown_key_rejected(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("[model]\nepsilon = 0.5\n")
    with pytest.raises(ConfigError, match="model.epsilon"):
        parse_config(path)


def test_type_error_names_key(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("[solver]\nsafety = fast\n")
    with pytest.raises(ConfigError, match="solver.safety"):
        parse_config(path)


def test_overrides():
    cfg = parse_config(None, ["model.eps=0.05", "solver.scheme=rk2"])
    assert cfg.eps == 0.05
    assert cfg.get("solver", "scheme") == "rk2"
    with pytest.raises(ConfigError):
        parse_config(None, ["not-a-path"])
    with pytest.raises(ConfigError):
        parse_config(None, ["model.unknown=1"])


def test_interface_must_clear_domain():
    with pytest.raises(ConfigError):
        parse_config(None, ["interface.R0=0.9"])


def test_auto_cells_even():
    cfg = parse_config(None, ["model.eps=0.03"])
    n = cfg.cells()
    assert n % 2 == 0
    assert 2 * cfg.get("domain", "L") / n <= 0.03 / 4 + 1e-12


def test_cli_verify_potential():
    proc = run_cli(["verify-potential", "--out", "/tmp/qmcf-vp"])
    assert proc.returncode == 0
    assert "s_plus = 3.0" in proc.stdout
    assert "FAIL" not in proc.stdout


def test_cli_config_error_exit_code(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("[model]\neps = 0\n")
    proc = run_cli(["simulate", "--config", str(path), "--out", str(tmp_path / "o")])
    assert proc.returncode == cli.EXIT_CONFIG
    assert "configuration error" in proc.stderr


def test_cli_report_missing_input(tmp_path):
    proc = run_cli(["report", "--out", str(tmp_path / "nothing")])
    assert proc.returncode == cli.EXIT_MISSING


def test_cli_build_dtable_deterministic(tmp_path):
    args = ["build-dtable", "--set", "diagnostics.dtable_ns=48",
            "--set", "diagnostics.dtable_nr=48"]
    p1 = run_cli(args + ["--out", str(tmp_path / "a")])
    p2 = run_cli(args + ["--out", str(tmp_path / "b")])
    assert p1.returncode == 0 and p2.returncode == 0
    h1 = hashlib.sha256((tmp_path / "a" / "dtable.txt").read_bytes()).hexdigest()
    h2 = hashlib.sha256((tmp_path / "b" / "dtable.txt").read_bytes()).hexdigest()
    assert h1 == h2
    assert f"sha256 = {h1}" in p1.stdout


@pytest.fixture(scope="module")
def tiny_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    args = ["simulate", "--out", str(out / "run1"),
            "--set", "domain.dim=1", "--set", "domain.cells=64",
            "--set", "interface.R0=0.5", "--set", "interface.center=0",
            "--set", "model.eps=0.05", "--set", "init.preset=constant",
            "--set", "solver.t_end=0.002", "--set", "solver.snapshot_every=0.001",
            "--set", "diagnostics.dtable_ns=48", "--set", "diagnostics.dtable_nr=48"]
    proc = run_cli(args)
    return out, args, proc


def test_cli_simulate_outputs(tiny_run):
    out, args, proc = tiny_run
    assert proc.returncode == 0, proc.stderr
    run_dir = out / "run1"
    assert (run_dir / "manifest.txt").exists()
    series = (run_dir / "series.csv").read_text().splitlines()
    assert len(series) == 1 + 3  # header + floor(t_end/cadence) + 1 rows
    snaps = sorted(run_dir.glob("snap_*.qmcf"))
    assert len(snaps) == 3
    manifest = (run_dir / "manifest.txt").read_text()
    assert "result = PASS" in manifest
    assert "dtable_sha256" in manifest
    assert "model.eps = 0.05" in manifest


def test_cli_simulate_rerun_bit_identical(tiny_run):
    out, args, proc = tiny_run
    args2 = list(args)
    args2[2] = str(out / "run2")
    proc2 = run_cli(args2)
    assert proc2.returncode == 0
    a = (out / "run1" / "series.csv").read_bytes()
    b = (out / "run2" / "series.csv").read_bytes()
    assert a == b


def test_cli_report_runs(tiny_run):
    out, _, _ = tiny_run
    proc = run_cli(["report", "--out", str(out / "run1"),
                    "--set", "model.eps=0.05"])
    assert proc.returncode == 0
    assert "rows = 3" in proc.stdout


def test_cli_simulate_3d_smoke(tmp_path):
    proc = run_cli(["simulate", "--out", str(tmp_path / "r3"),
                    "--set", "domain.dim=3", "--set", "domain.cells=24",
                    "--set", "interface.center=0,0,0", "--set", "model.eps=0.1",
                    "--set", "init.preset=constant",
                    "--set", "solver.t_end=0.0002", "--set", "solver.snapshot_every=0.0001",
                    "--set", "diagnostics.dtable_ns=48", "--set", "diagnostics.dtable_nr=48",
                    "--set", "output.snapshots=false"])
    assert proc.returncode == 0, proc.stderr
    series = (tmp_path / "r3" / "series.csv").read_text().splitlines()
    assert len(series) == 1 + 3
    import math
    last = series[-1].split(",")
    assert math.isfinite(float(last[1]))  # E_gl
    assert float(last[8]) <= np.sqrt(6) + 1e-9  # max_abs_Q


def test_failed_marker_on_instability(tmp_path, monkeypatch):
    from qmcf import solver

    def boom(cfg, out_dir):
        raise solver.StabilityError("synthetic blow-up")

    monkeypatch.setitem(cli.COMMANDS, "simulate", boom)
    code = cli.main(["simulate", "--out", str(tmp_path / "broken")])
    assert code == cli.EXIT_UNSTABLE
    marker = (tmp_path / "broken" / ".failed").read_text()
    assert "synthetic blow-up" in marker


def test_simulator_loads_prebuilt_table(tmp_path):
    build = run_cli(["build-dtable", "--out", str(tmp_path / "tbl"),
                     "--set", "diagnostics.dtable_ns=48",
                     "--set", "diagnostics.dtable_nr=48"])
    assert build.returncode == 0
    table_path = tmp_path / "tbl" / "dtable.txt"
    before = table_path.read_bytes()
    sim = run_cli(["simulate", "--out", str(tmp_path / "run"),
                   "--set", f"diagnostics.dtable_path={table_path}",
                   "--set", "domain.dim=1", "--set", "domain.cells=64",
                   "--set", "interface.R0=0.5", "--set", "interface.center=0",
                   "--set", "model.eps=0.05", "--set", "init.preset=constant",
                   "--set", "solver.t_end=0.001", "--set", "solver.snapshot_every=0.001"])
    assert sim.returncode == 0, sim.stderr
    assert table_path.read_bytes() == before  # loaded read-only
    missing = run_cli(["simulate", "--out", str(tmp_path / "run2"),
                       "--set", "diagnostics.dtable_path=/nonexistent/t.txt"])
    assert missing.returncode == cli.EXIT_MISSING
