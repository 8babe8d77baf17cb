"""``okflow`` command line: simulation runs, iteration studies and spectral checks."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import sys
from contextlib import nullcontext
from pathlib import Path

import numpy as np

from okflow.config import parse_config
from okflow.errors import ConfigurationError, OkflowError, StepFailure
from okflow.mesh import build_mesh
from okflow.okmodel import Problem, avg_gmres_per_newton, initial_state, run_simulation
from okflow.precond import compute_c
from okflow.spectra import (
    matching_identity_error,
    null_space_eigen_error,
    two_iteration_check,
    verify_lemmas,
)
from okflow.vtk import write_vtk

log = logging.getLogger("okflow")

STATS_HEADER = ["step", "newton_iters", "total_gmres", "avg_gmres", "residual", "mass",
                "energy", "seconds"]

MATCHING_TOL = 1e-12
IMAG_TOL = 1e-8
INTERVAL_SLACK = 1e-8
NULL_SPACE_TOL = 1e-8
TWO_ITERATION_TOL = 1e-10


def fmt(x):
    """Locale-independent 17-significant-digit number formatting."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "%.17g" % x


def _writer(path, header):
    fh = open(path, "w", newline="")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(header)
    fh.flush()
    return fh, w


def _stats_row(s):
    return [fmt(s.step), fmt(s.newton_iters), fmt(s.total_gmres), fmt(s.avg_gmres),
            fmt(s.residual), fmt(s.mass), fmt(s.energy), fmt(s.seconds)]


def _simulate(cfg, outdir, snapshot_every, stats_name="stats.csv"):
    """Run one simulation, streaming stats (and snapshots) to ``outdir``."""
    outdir.mkdir(parents=True, exist_ok=True)
    problem = Problem(cfg)
    fh, writer = _writer(outdir / stats_name, STATS_HEADER)

    def callback(step, state, stats):
        if stats is not None:
            writer.writerow(_stats_row(stats))
            fh.flush()
        if snapshot_every and step % snapshot_every == 0:
            write_vtk(problem.mesh, state.u, state.w, outdir / f"state_{step}.vtk")

    try:
        _, history = run_simulation(cfg, problem=problem, callback=callback)
    finally:
        fh.close()
    return history


def cmd_run(manifest):
    try:
        history = _simulate(manifest.config, manifest.output_dir, manifest.snapshot_every)
    except StepFailure as exc:
        log.error("%s", exc)
        return 1
    if history:
        print(f"{len(history)} steps, average GMRES per Newton "
              f"{avg_gmres_per_newton(history):.2f}")
    return 0


def cmd_mesh_study(manifest):
    cfg = manifest.config
    out = manifest.output_dir
    out.mkdir(parents=True, exist_ok=True)
    if len(manifest.study_n) == 1:
        manifest = dataclasses.replace(
            manifest, config=dataclasses.replace(cfg, n=manifest.study_n[0]))
        return cmd_run(manifest)
    rows = []
    for n in manifest.study_n:
        level_cfg = dataclasses.replace(cfg, n=n)
        try:
            history = _simulate(level_cfg, out, 0, stats_name=f"stats_n{n}.csv")
        except StepFailure as exc:
            log.error("n=%d: %s", n, exc)
            return 1
        dofs = 2 * (n + 1) ** cfg.dim
        rows.append((n, dofs, avg_gmres_per_newton(history)))
    with open(out / "mesh_study.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "dofs", "avg_gmres_per_newton"])
        for n, dofs, avg in rows:
            w.writerow([fmt(n), fmt(dofs), fmt(avg)])
    print(f"{'Degrees of freedom':>20} | {'n':>6} | Iterations")
    for n, dofs, avg in rows:
        print(f"{dofs:>20d} | {n:>6d} | {avg:.1f}")
    return 0


def eps_study_levels(manifest):
    """``(eps, dx, dt, n)`` per study row with ``dx = dx_per_eps * eps`` and ``dt = eps^2``."""
    levels = []
    for eps in manifest.eps_list:
        dx = manifest.dx_per_eps * eps
        n = int(round(1.0 / dx))
        levels.append((eps, dx, eps**2, n))
    return levels


def cmd_eps_study(manifest):
    cfg = manifest.config
    out = manifest.output_dir
    levels = eps_study_levels(manifest)
    for eps, dx, dt, n in levels:
        nv = (n + 1) ** cfg.dim
        if nv > manifest.max_vertices:
            print(f"refusing eps={eps}: mesh n={n} has {nv} vertices "
                  f"(max_vertices={manifest.max_vertices})", file=sys.stderr)
            return 2
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for eps, dx, dt, n in levels:
        level_cfg = dataclasses.replace(cfg, eps=eps, dt=dt, n=n)
        try:
            history = _simulate(level_cfg, out, 0, stats_name=f"stats_eps{eps:g}.csv")
        except StepFailure as exc:
            log.error("eps=%g: %s", eps, exc)
            return 1
        rows.append((eps, dx, dt, avg_gmres_per_newton(history)))
    with open(out / "eps_study.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["eps", "dx", "dt", "avg_gmres_per_newton"])
        for row in rows:
            w.writerow([fmt(v) for v in row])
    print(f"{'eps':>8} | {'dx':>8} | {'dt':>10} | Iterations")
    for eps, dx, dt, avg in rows:
        print(f"{eps:>8g} | {dx:>8g} | {dt:>10g} | {avg:.1f}")
    return 0


def run_verification(manifest, perturb_shat=0.0):
    """Matching identity, spectrum reality and interval checks, and the two-iteration property.

    Returns a JSON-serialisable dict with a ``passed`` flag per check.
    """
    cfg = manifest.config
    scale = 1.0 + perturb_shat
    c = compute_c(cfg.dt, cfg.theta, cfg.sigma)
    checks = []

    for dim, n in ((2, manifest.verify_n), (3, max(1, manifest.verify_n // 2))):
        prob = Problem(dataclasses.replace(cfg, dim=dim, n=n, min_coarse_size=10**6))
        err = matching_identity_error(prob.ops.M, prob.ops.K, c, cfg.eps, shat_scale=scale)
        checks.append({"check": "matching_identity", "dim": dim, "n": n,
                       "relative_error": err, "passed": err <= MATCHING_TOL})

    steps = sorted(set(manifest.verify_steps))
    snap_cfg = dataclasses.replace(cfg, dim=2, n=manifest.verify_n, n_steps=max(steps),
                                   min_coarse_size=10**6)
    snapshots = {}

    def keep(step, state, _stats):
        if step in steps:
            snapshots[step] = state.u.copy()

    problem = Problem(snap_cfg)
    run_simulation(snap_cfg, problem=problem, callback=keep)
    for step in steps:
        u = snapshots[step]
        rep = verify_lemmas(problem.mesh, u, snap_cfg, 0.0, shat_scale=scale, ops=problem.ops)
        checks.append({"check": "real_spectrum", "step": step, "relative_imag": rep.relative_imag,
                       "passed": rep.relative_imag <= IMAG_TOL})
        err = null_space_eigen_error(problem.mesh, u, snap_cfg, shat_scale=scale, ops=problem.ops)
        checks.append({"check": "null_space_eigenvalue", "step": step, "error": err,
                       "passed": err <= NULL_SPACE_TOL})
        for delta in manifest.interval_deltas:
            rep = verify_lemmas(problem.mesh, u, snap_cfg, delta, slack=INTERVAL_SLACK,
                                shat_scale=scale, ops=problem.ops)
            re = rep.eigenvalues.real
            checks.append({"check": "eigenvalue_interval", "step": step, "delta": delta,
                           "lower": rep.lower, "upper": rep.upper,
                           "eig_min": float(re.min()), "eig_max": float(re.max()),
                           "violations": rep.violations, "passed": rep.violations == 0})

    for dim, n in ((2, 4), (3, 2)):
        mesh = build_mesh(dim, n)
        two_cfg = dataclasses.replace(cfg, dim=dim, n=n, min_coarse_size=10**6)
        prob = Problem(two_cfg, mesh)
        u = initial_state(mesh, prob.ops, two_cfg).u
        its, relres = two_iteration_check(mesh, u, two_cfg, "exact", shat_scale=scale,
                                          rel_tol=TWO_ITERATION_TOL, ops=prob.ops)
        checks.append({"check": "two_iteration", "dim": dim, "n": n, "iterations": its,
                       "relative_residual": relres,
                       "passed": its <= 2 and relres <= TWO_ITERATION_TOL})

    return {"perturb_shat": perturb_shat, "deltas": list(manifest.interval_deltas),
            "passed": all(ch["passed"] for ch in checks), "checks": checks}


def cmd_verify(manifest, perturb_shat=0.0):
    report = run_verification(manifest, perturb_shat)
    manifest.output_dir.mkdir(parents=True, exist_ok=True)
    with open(manifest.output_dir / "verify.json", "w") as fh:
        json.dump(report, fh, indent=2)
    for ch in report["checks"]:
        detail = ", ".join(f"{k}={v}" for k, v in ch.items() if k not in ("check", "passed"))
        print(f"{'PASS' if ch['passed'] else 'FAIL'} {ch['check']} ({detail})")
    return 0 if report["passed"] else 1


COMMANDS = {
    "run": cmd_run,
    "mesh-study": cmd_mesh_study,
    "eps-study": cmd_eps_study,
    "verify": cmd_verify,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="okflow", description=__doc__)
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, type=Path)
    parser.add_argument("--output", type=Path, help="output directory (overrides config)")
    parser.add_argument("--threads", type=int, help="BLAS thread limit")
    parser.add_argument("--perturb-shat", type=float, default=0.0,
                        help="verify only: scale S_hat by (1 + X) to self-test the checks")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        manifest = parse_config(args.config, kind=args.command)
    except (ConfigurationError, OSError) as exc:
        print(f"okflow: {exc}", file=sys.stderr)
        return 2
    if args.output is not None:
        manifest.output_dir = args.output
    if args.threads is not None:
        manifest.threads = args.threads

    limits = nullcontext()
    if manifest.threads:
        from threadpoolctl import threadpool_limits

        limits = threadpool_limits(limits=manifest.threads)
    try:
        with limits:
            if args.command == "verify":
                return cmd_verify(manifest, args.perturb_shat)
            return COMMANDS[args.command](manifest)
    except OkflowError as exc:
        print(f"okflow: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
