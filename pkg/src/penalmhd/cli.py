"""Command-line interface: run, check, eta-sweep, interp."""

from __future__ import annotations

import argparse
import os
import sys


def _apply_thread_cap() -> None:
    # must happen before numpy is imported anywhere in this process
    cap = os.environ.get("PENALMHD_THREADS")
    if cap:
        for var in (
            "OMP_NUM_THREADS",
            "OPENBLAS_NUM_THREADS",
            "MKL_NUM_THREADS",
            "NUMEXPR_NUM_THREADS",
        ):
            os.environ.setdefault(var, cap)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="penalmhd",
        description=(
            "Desk-scale simulator for a rigid insulating body moving in an "
            "incompressible electrically conducting fluid"
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario to completion")
    p_run.add_argument("config", help="path to a key=value config file")

    p_check = sub.add_parser("check", help="run the invariant suite; exit code = failures")
    p_check.add_argument("config", help="path to a key=value config file")

    p_sweep = sub.add_parser("eta-sweep", help="rerun a scenario across penalization weights")
    p_sweep.add_argument("config", help="path to a key=value config file")
    p_sweep.add_argument(
        "--etas",
        required=True,
        help="comma-separated penalization weights, e.g. 1e-1,1e-2,1e-3",
    )

    p_interp = sub.add_parser("interp", help="evaluate time interpolants from a run directory")
    p_interp.add_argument("trajectory", help="run output directory containing trajectory.txt")
    p_interp.add_argument("--t", type=float, required=True, help="evaluation time")
    p_interp.add_argument("--out", default="", help="directory for the interpolated snapshots")
    return parser


def _cmd_run(args) -> int:
    from .config import load_config
    from .driver import run

    cfg = load_config(args.config)
    summary = run(cfg)
    print(f"steps run      : {summary.steps_run}")
    print(f"stop reason    : {summary.stop_reason}")
    print(f"final time     : {summary.final_time:.6g}")
    print(f"max |div u|    : {summary.max_div_u:.3e}")
    print(f"max |div B|    : {summary.max_div_B:.3e}")
    print(f"density range  : [{summary.rho_range[0]:.6g}, {summary.rho_range[1]:.6g}]")
    print(f"energy         : {summary.initial_energy:.6e} -> {summary.final_energy:.6e}")
    print(f"penalty misfit : {summary.penalty_residual:.6e}")
    print(f"ledger         : {summary.ledger_path}")
    return 0


def _cmd_check(args) -> int:
    from .checks import run_checks
    from .config import load_config

    cfg = load_config(args.config)
    results = run_checks(cfg)
    failures = 0
    for name, passed, detail in results:
        mark = "PASS" if passed else "FAIL"
        print(f"[{mark}] {name}: {detail}")
        failures += 0 if passed else 1
    print(f"{len(results) - failures}/{len(results)} checks passed")
    return failures


def _cmd_sweep(args) -> int:
    from .config import load_config
    from .driver import eta_sweep

    cfg = load_config(args.config)
    etas = [float(tok) for tok in args.etas.split(",") if tok.strip()]
    result = eta_sweep(cfg, etas)
    print("eta        residual")
    for eta, res in zip(result.etas, result.residuals):
        print(f"{eta:<10.4g} {res:.6e}")
    if result.slope is not None:
        print(f"fitted log-log slope: {result.slope:.4f}")
    print(f"table: {result.csv_path}")
    return 0


def _cmd_interp(args) -> int:
    from pathlib import Path

    from .driver import interpolants
    from .io_vtk import TrajectoryManifest, read_snapshot, write_snapshot
    from .state import SimState

    rundir = Path(args.trajectory)
    meta, entries = TrajectoryManifest.read(rundir / "trajectory.txt")
    if not entries:
        print("trajectory manifest is empty", file=sys.stderr)
        return 1
    states = []
    for e in entries:
        grid, fields = read_snapshot(rundir / e["file"])
        states.append(
            SimState(e["step"], e["time"], fields["rho"], fields["u"], fields["B"], e["body"], fields["chi"])
        )
    affine, const, lagged = interpolants(states, args.t)
    outdir = Path(args.out) if args.out else rundir / "interp"
    outdir.mkdir(parents=True, exist_ok=True)
    for tag, view in (("affine", affine), ("const", const), ("const_lagged", lagged)):
        path = outdir / f"interp_{tag}.vtk"
        write_snapshot(path, view, title=f"{tag} interpolant at t={args.t:.9g}")
        print(f"{tag:13s} -> {path}")
    return 0


def main(argv: list[str] | None = None) -> int:
    _apply_thread_cap()
    args = _build_parser().parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "check": _cmd_check,
        "eta-sweep": _cmd_sweep,
        "interp": _cmd_interp,
    }
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
