"""Command-line front end: ``fskan <command> [flags]``.

Every command writes its artifacts plus a ``manifest.json`` into ``--out``
(or into ``<fixtures-dir>/<command>`` with ``--golden``).  Outputs contain no
timestamps or absolute paths, so reruns with the same flags are byte-identical.

Exit codes: 0 success, 1 usage error, 2 solver failure, 3 verification failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from .errors import BracketError, DegenerateFitError, DomainError, ExtrapolationError, NoConvergentProbeError
from .field import (
    Profile,
    fit_external_velocity,
    pde_residual,
    read_velocity_csv,
    stream_grid,
    write_field_csv,
)
from .integrate import IntegratorConfig, StopKind, integrate, write_trajectory_csv
from .model import FalknerSkanParams, FlowConstants, PseudoParams, pseudo_field
from .phase import (
    basin_map,
    classify_equilibrium,
    classify_trajectory,
    energy_along,
    in_basin,
    write_basin_csv,
    write_basin_pgm,
)
from .shoot import (
    FS_CONFIG,
    analytic_skin_friction_bound,
    falkner_skan_profile,
    interval_from_probes,
    pseudo_profile,
    guaranteed_slope_bound,
    shoot_pseudo_many,
    solve_falkner_skan,
)

EXIT_OK, EXIT_USAGE, EXIT_SOLVER, EXIT_CHECK = 0, 1, 2, 3

# at most this many energy samples go into the solve-pseudo report
ENERGY_SAMPLES = 1000


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse with exit code 1 (not 2) on bad flags."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# -- serialisation ------------------------------------------------------------


def _json_value(obj: Any, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None or obj is True or obj is False:
        return {None: "null", True: "true", False: "false"}[obj]
    if isinstance(obj, (int, np.integer)) and not isinstance(obj, bool):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return "null"
        text = format(x, ".17g")
        # keep floats recognisable as floats for strict readers
        if not any(c in text for c in ".en"):
            text += ".0"
        return text
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{_json_value(str(k), indent, level + 1)}: {_json_value(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [pad + _json_value(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(obj: Any, indent: int = 2) -> str:
    """JSON text with every float written to 17 significant digits (nan/inf -> null)."""
    return _json_value(obj, indent, 0) + "\n"


def write_json(obj: Any, path: Path) -> Path:
    path.write_text(dumps(obj), encoding="utf-8")
    return path


class Run:
    """Collects artifacts of one command and writes the manifest last."""

    def __init__(self, command: str, args: argparse.Namespace):
        self.command = command
        if args.golden:
            self.out = Path(args.fixtures_dir) / command
        else:
            self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.parameters = {
            k: v for k, v in sorted(vars(args).items()) if k not in ("func", "out", "golden", "fixtures_dir", "command")
        }
        self.artifacts: list[str] = []

    def path(self, name: str) -> Path:
        self.artifacts.append(name)
        return self.out / name

    def json(self, name: str, obj: Any) -> Path:
        return write_json(obj, self.path(name))

    def finish(self, code: int) -> int:
        manifest = {
            "command": self.command,
            "parameters": self.parameters,
            "seed_free": True,
            "artifacts": self.artifacts,
            "exit_code": code,
        }
        write_json(manifest, self.out / "manifest.json")
        return code


def _config(args, default: IntegratorConfig = IntegratorConfig()) -> IntegratorConfig:
    h = default.h if args.h is None else args.h
    t_max = default.t_max if args.t_max is None else args.t_max
    # the manifest records the values actually used
    args.h, args.t_max = h, t_max
    try:
        return IntegratorConfig(h=h, t_max=t_max, conv_tol=default.conv_tol, conv_hold=default.conv_hold, div_bound=default.div_bound)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _warn(message: str) -> None:
    print(f"warning: {message}", file=sys.stderr)


def _stop_json(stop) -> dict:
    return {"kind": stop.kind.value, "t": stop.t, "tag": stop.tag}


# -- commands -----------------------------------------------------------------


def cmd_solve_fs(args) -> int:
    config = _config(args, FS_CONFIG)
    if not 0.0 <= args.m <= 1.0:
        _warn(f"m={args.m} is outside [0, 1]; the shooting bracket may fail")
    try:
        params = FalknerSkanParams(args.m)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    run = Run("solve-fs", args)
    report = {"m": args.m, "alpha": params.alpha, "beta": params.beta, "gamma": params.gamma, "h": config.h, "t_max": config.t_max}
    try:
        fpp0 = solve_falkner_skan(params, config)
    except BracketError as exc:
        run.json("solve_fs.json", {**report, "status": "failed", "reason": str(exc), "fpp0": None})
        print(f"solver failure: {exc}", file=sys.stderr)
        return run.finish(EXIT_SOLVER)
    traj = falkner_skan_profile(params, fpp0, config)
    write_trajectory_csv(traj, run.path("fs_profile.csv"))
    report.update(status="converged", reason=None, fpp0=fpp0, fp_far=float(traj.final[1]))
    run.json("solve_fs.json", report)
    print(f"f''(0) = {fpp0:.12g}")
    return run.finish(EXIT_OK)


def cmd_solve_pseudo(args) -> int:
    config = _config(args)
    if args.tau <= 0.0:
        _warn(f"tau={args.tau} <= 0: no nontrivial solution is expected to converge")
    traj = integrate(pseudo_field(args.tau), (args.zeta, args.d), config)
    run = Run("solve-pseudo", args)
    write_trajectory_csv(traj, run.path("pseudo_profile.csv"))
    e = energy_along(traj)
    stride = max(1, math.ceil(len(traj) / ENERGY_SAMPLES))
    idx = np.arange(0, len(traj), stride)
    converged = traj.stop.kind is StopKind.CONVERGED
    report = {
        "tau": args.tau,
        "zeta": args.zeta,
        "d": args.d,
        "h": config.h,
        "t_max": config.t_max,
        "stop": _stop_json(traj.stop),
        "converged": converged,
        "classification": classify_trajectory(traj).value,
        "equilibrium": classify_equilibrium(args.tau).kind.value,
        "in_basin": in_basin(args.zeta, args.d),
        "crossing_count": len(traj.crossings),
        "crossings": [{"t": c.t, "direction": c.direction} for c in traj.crossings],
        "final": {"t": traj.t_end, "theta": float(traj.final[0]), "phi": float(traj.final[1])},
        "energy": {"stride": stride, "t": traj.t[idx].tolist(), "e": e[idx].tolist()},
    }
    run.json("solve_pseudo.json", report)
    print(f"{traj.stop}, {len(traj.crossings)} crossings of theta = 1")
    if args.expect_converge and not converged:
        print(f"solver failure: expected convergence, got {traj.stop}", file=sys.stderr)
        return run.finish(EXIT_SOLVER)
    return run.finish(EXIT_OK)


def cmd_sweep_d(args) -> int:
    config = _config(args)
    if args.n < 3:
        raise UsageError(f"--n must be at least 3, got {args.n}")
    if not args.d_min < args.d_max:
        raise UsageError("--d-min must be below --d-max")
    params = PseudoParams(args.tau, args.zeta)
    ds = np.linspace(args.d_min, args.d_max, args.n)
    results = shoot_pseudo_many(params, ds, config, args.jobs)
    run = Run("sweep-d", args)
    with run.path("sweep.csv").open("w", encoding="utf-8", newline="") as fh:
        fh.write("d,classification,miss,crossings,t_end\n")
        for r in results:
            fh.write(f"{r.d:.17g},{r.classification.value},{r.miss:.17g},{r.crossings},{r.t_end:.17g}\n")
    try:
        bound = analytic_skin_friction_bound(args.zeta)
    except DomainError:
        bound = None
    try:
        guaranteed = guaranteed_slope_bound(args.zeta)
    except DomainError:
        guaranteed = None
    lo = hi = None
    if bound is not None:
        try:
            interval = interval_from_probes(results, args.zeta)
            lo, hi = interval.lo, interval.hi
        except NoConvergentProbeError:
            pass
    elif any(r.converged for r in results):
        conv = [r.d for r in results if r.converged]
        lo, hi = min(conv), max(conv)
    n_conv = sum(r.converged for r in results)
    run.json(
        "interval.json",
        {
            "tau": args.tau,
            "zeta": args.zeta,
            "n_probe": args.n,
            "converged_count": n_conv,
            "empirical_lo": lo,
            "empirical_hi": hi,
            "analytic_lo": None if bound is None else -bound,
            "analytic_hi": bound,
            "guaranteed_bound": guaranteed,
        },
    )
    print(f"{n_conv}/{args.n} probes converged")
    return run.finish(EXIT_OK)


def cmd_basin(args) -> int:
    config = _config(args)
    if not args.tau > 0.0:
        raise UsageError(f"basin analysis needs tau > 0, got {args.tau}")
    if args.nz < 1 or args.nd < 1:
        raise UsageError("grid sizes must be positive")
    bmap = basin_map((args.zeta_min, args.zeta_max), (args.d_min, args.d_max), (args.nz, args.nd), args.tau, config, args.jobs)
    run = Run("basin", args)
    write_basin_csv(bmap, run.path("basin.csv"))
    write_basin_pgm(bmap, run.path("basin.pgm"))
    violations = int(bmap.violations.sum())
    run.json(
        "basin.json",
        {
            "tau": args.tau,
            "grid": [args.nz, args.nd],
            "cells": int(bmap.member.size),
            "members": int(bmap.member.sum()),
            "converged": int(bmap.converged.sum()),
            "violations": violations,
            "passed": violations == 0,
        },
    )
    print(f"{violations} basin violations on {bmap.member.size} cells")
    return run.finish(EXIT_OK if violations == 0 else EXIT_CHECK)


def cmd_field_check(args) -> int:
    config = _config(args)
    zeta = 1.0 if args.trivial else args.zeta
    try:
        constants = FlowConstants.from_similarity(args.tau, zeta, nu=args.nu, U_inf=args.u_inf)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.x_min <= 0.0 or not args.x_min < args.x_max or not args.y_min < args.y_max:
        raise UsageError("grid needs 0 < x-min < x-max and y-min < y-max")
    if args.trivial:
        profile = Profile.trivial(config.t_max)
        stop = None
    else:
        traj = pseudo_profile(PseudoParams(args.tau, zeta), args.d, config)
        stop = traj.stop
        if traj.stop.kind is not StopKind.CONVERGED:
            print(f"solver failure: profile did not converge ({traj.stop})", file=sys.stderr)
            return EXIT_SOLVER
        profile = Profile.from_trajectory(traj)
    if args.perturb:
        profile = profile.perturbed(args.perturb)
    threshold = args.threshold if args.threshold is not None else (1e-10 if args.trivial else 1e-4)
    try:
        residual = pde_residual(profile, constants, (args.x_min, args.x_max), (args.y_min, args.y_max), (args.nx, args.ny), method=args.method)
        samples = stream_grid(profile, constants, np.linspace(args.x_min, args.x_max, args.nx), np.linspace(args.y_min, args.y_max, args.ny))
    except ExtrapolationError as exc:
        raise UsageError(f"grid leaves the profile range: {exc}") from None
    run = Run("field-check", args)
    write_field_csv(samples, run.path("field.csv"))
    passed = residual < threshold
    run.json(
        "field_check.json",
        {
            "tau": args.tau,
            "zeta": zeta,
            "d": args.d,
            "method": args.method,
            "trivial": args.trivial,
            "perturb": args.perturb,
            "profile_stop": None if stop is None else _stop_json(stop),
            "residual": residual,
            "threshold": threshold,
            "passed": passed,
        },
    )
    print(f"max relative residual {residual:.3e} (threshold {threshold:.1e})")
    return run.finish(EXIT_OK if passed else EXIT_CHECK)


def cmd_fit_ue(args) -> int:
    try:
        samples = read_velocity_csv(args.input)
    except (OSError, ValueError, IndexError) as exc:
        raise UsageError(f"cannot read {args.input}: {exc}") from None
    if len(samples) < 4:
        raise UsageError(f"need at least 4 samples, got {len(samples)}")
    run = Run("fit-ue", args)
    try:
        fit = fit_external_velocity(samples)
    except DegenerateFitError as exc:
        run.json("fit.json", {"status": "failed", "reason": str(exc), "n_samples": len(samples)})
        print(f"solver failure: {exc}", file=sys.stderr)
        return run.finish(EXIT_SOLVER)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    run.json(
        "fit.json",
        {"status": "ok", "c1": fit.c1, "c2": fit.c2, "m": fit.m, "rms_residual": fit.rms_residual, "n_samples": len(samples)},
    )
    print(f"U_e^2 = {fit.c1:.10g} x^(2*{fit.m:.10g}) + {fit.c2:.10g}")
    return run.finish(EXIT_OK)


# -- parser -------------------------------------------------------------------


def _common(p: argparse.ArgumentParser, integrator: bool = True) -> None:
    p.add_argument("--out", default=".", help="output directory (default: current directory)")
    p.add_argument("--golden", action="store_true", help="write into <fixtures-dir>/<command> instead of --out")
    p.add_argument("--fixtures-dir", default="tests/fixtures/golden")
    if integrator:
        p.add_argument("--h", type=float, default=None, help="RK4 step")
        p.add_argument("--t-max", type=float, default=None, help="integration horizon")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fskan", description="Falkner-Skan and m = -1 pseudo-similarity solvers.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve-fs", help="wall shear f''(0) of the Falkner-Skan problem")
    p.add_argument("--m", type=float, required=True)
    _common(p)
    p.set_defaults(func=cmd_solve_fs)

    p = sub.add_parser("solve-pseudo", help="integrate theta'' + tau theta' + theta^2 - 1 = 0 from (zeta, d)")
    p.add_argument("--tau", type=float, required=True)
    p.add_argument("--zeta", type=float, required=True)
    p.add_argument("--d", type=float, default=0.0)
    p.add_argument("--expect-converge", action="store_true", help="exit 2 unless the shot converges")
    _common(p)
    p.set_defaults(func=cmd_solve_pseudo)

    p = sub.add_parser("sweep-d", help="probe slopes d = theta'(0) and report the admissible interval")
    p.add_argument("--tau", type=float, required=True)
    p.add_argument("--zeta", type=float, required=True)
    p.add_argument("--d-min", type=float, default=-2.0)
    p.add_argument("--d-max", type=float, default=2.0)
    p.add_argument("--n", type=int, default=41)
    p.add_argument("--jobs", type=int, default=1)
    _common(p)
    p.set_defaults(func=cmd_sweep_d)

    p = sub.add_parser("basin", help="analytic basin membership against empirical convergence")
    p.add_argument("--tau", type=float, default=1.0)
    p.add_argument("--zeta-min", type=float, default=-0.9)
    p.add_argument("--zeta-max", type=float, default=1.9)
    p.add_argument("--d-min", type=float, default=-2.0)
    p.add_argument("--d-max", type=float, default=2.0)
    p.add_argument("--nz", type=int, default=40)
    p.add_argument("--nd", type=int, default=40)
    p.add_argument("--jobs", type=int, default=1)
    _common(p)
    p.set_defaults(func=cmd_basin)

    p = sub.add_parser("field-check", help="stream-function PDE residual of a reconstructed flow")
    p.add_argument("--tau", type=float, default=1.0)
    p.add_argument("--zeta", type=float, default=0.2)
    p.add_argument("--d", type=float, default=0.0)
    p.add_argument("--nu", type=float, default=1.0)
    p.add_argument("--u-inf", type=float, default=1.0)
    p.add_argument("--x-min", type=float, default=1.0)
    p.add_argument("--x-max", type=float, default=2.0)
    p.add_argument("--y-min", type=float, default=0.0)
    p.add_argument("--y-max", type=float, default=2.0)
    p.add_argument("--nx", type=int, default=21)
    p.add_argument("--ny", type=int, default=41)
    p.add_argument("--method", choices=("analytic", "fd"), default="analytic")
    p.add_argument("--perturb", type=float, default=0.0, help="offset added to f' (negative control)")
    p.add_argument("--trivial", action="store_true", help="use f = t (theta = 1, zeta = 1)")
    p.add_argument("--threshold", type=float, default=None)
    _common(p)
    p.set_defaults(func=cmd_field_check)

    p = sub.add_parser("fit-ue", help="fit U_e^2 = c1 x^(2m) + c2 to a two-column x,Ue CSV")
    p.add_argument("input")
    _common(p, integrator=False)
    p.set_defaults(func=cmd_fit_ue)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "jobs", 1) < 1:
        parser.error("--jobs must be at least 1")
    for name in ("tau", "zeta", "d", "m"):
        value = getattr(args, name, None)
        if value is not None and not math.isfinite(value):
            parser.error(f"--{name} must be finite")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"{parser.prog} {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    raise SystemExit(main())
