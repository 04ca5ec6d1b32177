"""Command line: qmcf <subcommand> --config PATH --out DIR [--set k=v ...].

Exit codes: 0 success, 2 configuration error, 3 numerical instability,
4 a run-level check failed, 5 missing input.  On unexpected failure the
output directory keeps its partial contents next to a `.failed` marker.
"""

import argparse
import os
import sys
import traceback

import numpy as np

from . import diagnostics as diag
from . import experiments, potential, qtensor, quasidistance, solver
from .config import ConfigError, parse_config

EXIT_CONFIG = 2
EXIT_UNSTABLE = 3
EXIT_CHECK_FAILED = 4
EXIT_MISSING = 5


def _mark_failed(out_dir, message):
    try:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, ".failed"), "w") as fh:
            fh.write(message + "\n")
    except OSError:
        pass


def cmd_verify_potential(cfg, out_dir):
    pot = cfg.pot
    rng = np.random.default_rng(cfg.get("output", "seed"))
    print(f"s_plus = {pot.s_plus!r}")
    print(f"s_minus = {pot.s_minus!r}")
    checks = {}
    checks["basis_orthonormal"] = np.allclose(
        np.einsum("aij,bij->ab", qtensor.BASIS, qtensor.BASIS), np.eye(5), atol=1e-14)
    pts = rng.standard_normal((100, 5))
    pts *= (2.5 * rng.random(100) ** 0.2 / np.linalg.norm(pts, axis=1))[:, None]
    h = 1e-6
    worst = 0.0
    for q in pts:
        g = potential.bulk_gradient(q, pot)
        fd = np.array([
            (potential.bulk_energy(q + h * np.eye(5)[j], pot)
             - potential.bulk_energy(q - h * np.eye(5)[j], pot)) / (2 * h)
            for j in range(5)
        ])
        worst = max(worst, np.linalg.norm(g - fd) / max(np.linalg.norm(g), 1e-12))
    checks["gradient_matches_finite_differences"] = worst <= 1e-6
    big = rng.standard_normal((100000, 5))
    big *= (3.0 * rng.random(len(big)) ** 0.2 / np.linalg.norm(big, axis=1))[:, None]
    checks["potential_nonnegative"] = bool(np.min(potential.bulk_energy(big, pot)) >= -1e-12)
    sp = pot.s_plus
    u = np.array([0.0, 0.0, 1.0])
    gn = potential.bulk_gradient(qtensor.project(qtensor.uniaxial(sp, u)), pot)
    checks["gradient_vanishes_on_minimisers"] = bool(np.max(np.abs(gn)) <= 1e-12)
    for name, ok in checks.items():
        print(f"check:{name} = {'PASS' if ok else 'FAIL'}")
    return 0 if all(checks.values()) else EXIT_CHECK_FAILED


def cmd_build_dtable(cfg, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    table = quasidistance.build_table(
        cfg.pot, ns=cfg.get("diagnostics", "dtable_ns"),
        nr=cfg.get("diagnostics", "dtable_nr"))
    path = os.path.join(out_dir, "dtable.txt")
    table.save(path)
    print(f"wrote {path}")
    print(f"sha256 = {experiments.sha256_file(path)}")
    return 0


def cmd_profile_1d(cfg, out_dir):
    # pinned standing-front scenario: a symmetric front pair on [-1, 1]
    cfg.values.update({
        ("domain", "dim"): 1, ("domain", "cells"): 1024,
        ("interface", "R0"): 0.5, ("interface", "center"): (0.0,),
        ("model", "eps"): 0.02, ("init", "preset"): "constant",
        ("solver", "t_end"): 0.01, ("solver", "snapshot_every"): 0.001,
    })
    result = experiments.run_experiment(cfg, out_dir)
    checks, stats = experiments.profile_checks(result, cfg)
    experiments.write_manifest(
        os.path.join(out_dir, "manifest.txt"), cfg, checks,
        extra={"wall_time_s": f"{result['wall_time']:.1f}",
               "l2_drift": repr(stats["drift"]),
               "front_displacement": repr(stats["displacement"]),
               "dtable_sha256": experiments.sha256_file(result["setup"]["table_path"])},
    )
    for name, ok in checks.items():
        print(f"check:{name} = {'PASS' if ok else 'FAIL'}")
    return 0 if all(checks.values()) else EXIT_CHECK_FAILED


def cmd_mcf_benchmark(cfg, out_dir):
    result = experiments.run_experiment(cfg, out_dir)
    checks = experiments.benchmark_checks(result, cfg)
    experiments.write_manifest(
        os.path.join(out_dir, "manifest.txt"), cfg, checks,
        extra={"wall_time_s": f"{result['wall_time']:.1f}",
               "dtable_sha256": experiments.sha256_file(result["setup"]["table_path"])},
    )
    for name, ok in checks.items():
        print(f"check:{name} = {'PASS' if ok else 'FAIL'}")
    return 0 if all(checks.values()) else EXIT_CHECK_FAILED


def cmd_simulate(cfg, out_dir):
    result = experiments.run_experiment(cfg, out_dir)
    checks = {"completed": True}
    experiments.write_manifest(
        os.path.join(out_dir, "manifest.txt"), cfg, checks,
        extra={"wall_time_s": f"{result['wall_time']:.1f}",
               "steps": result["summary"].steps,
               "dtable_sha256": experiments.sha256_file(result["setup"]["table_path"])},
    )
    print(f"completed {result['summary'].steps} steps; series.csv with "
          f"{len(result['records'])} rows in {out_dir}")
    return 0


def cmd_report(cfg, out_dir):
    path = os.path.join(out_dir, "series.csv")
    if not os.path.exists(path):
        print(f"missing {path}", file=sys.stderr)
        return EXIT_MISSING
    records = diag.read_csv(path)
    eps = cfg.eps
    print(f"rows = {len(records)}")
    print(f"E_gl: {records[0].E_gl!r} -> {records[-1].E_gl!r}")
    print(f"E_mod/eps: {records[0].E_mod_over_eps!r} -> {records[-1].E_mod_over_eps!r}")
    finite = [r for r in records if np.isfinite(r.R_fit) and np.isfinite(r.R_exact)]
    if finite:
        worst = max(abs(r.R_fit - r.R_exact) for r in finite)
        print(f"max |R_fit - R_exact| = {worst!r}")
    print(f"final dissipation residual = {records[-1].dissipation_residual!r}")
    if len(records) >= 10:
        rep = diag.gronwall_report(records, eps)
        print(f"growth fit C = {rep['C_fit']!r} ok = {rep['ok']}")
        return 0 if rep["ok"] else EXIT_CHECK_FAILED
    return 0


COMMANDS = {
    "verify-potential": cmd_verify_potential,
    "build-dtable": cmd_build_dtable,
    "profile-1d": cmd_profile_1d,
    "mcf-benchmark": cmd_mcf_benchmark,
    "simulate": cmd_simulate,
    "report": cmd_report,
}


def main(argv=None):
    parser = argparse.ArgumentParser(prog="qmcf", description=__doc__)
    parser.add_argument("subcommand", choices=sorted(COMMANDS))
    parser.add_argument("--config", default=None, help="key=value config file")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--set", action="append", default=[], metavar="SEC.KEY=VAL",
                        help="override a configuration value")
    args = parser.parse_args(argv)
    try:
        cfg = parse_config(args.config, args.set)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = args.out or cfg.get("output", "out_dir")
    try:
        return COMMANDS[args.subcommand](cfg, out_dir)
    except solver.StabilityError as exc:
        _mark_failed(out_dir, f"instability: {exc}")
        print(f"instability: {exc}", file=sys.stderr)
        return EXIT_UNSTABLE
    except FileNotFoundError as exc:
        print(f"missing input: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except Exception:
        _mark_failed(out_dir, traceback.format_exc())
        raise


if __name__ == "__main__":
    sys.exit(main())
