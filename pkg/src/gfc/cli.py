"""Command line interface: run, verify, probe-regularization, bounds, list-presets.

Exit codes: 0 success, 1 runtime/configuration error, 2 at least one enabled
check failed.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import moment_bounds as mb
from .config import ConfigFileError, ScenarioConfig, load_scenario
from .evolution import (ConfigError, NumericalFailureError, SetupError,
                        duhamel_solve, solve)
from .kernels import KernelConfigError, QuadratureError
from .presets import preset_description, preset_names
from .report import ScenarioContext, run_suites, write_trajectory_csv
from .transport import ParameterDomainError

USER_ERRORS = (ConfigFileError, ConfigError, KernelConfigError, SetupError,
               ParameterDomainError, QuadratureError, NumericalFailureError,
               mb.InfeasibleParamsError)


def _apply_overrides(sc: ScenarioConfig, args) -> ScenarioConfig:
    raw = sc.echo()
    if args.cells is not None:
        raw.setdefault("grid", {})["cells"] = int(args.cells)
    if args.dt is not None:
        raw.setdefault("time", {})["dt"] = float(args.dt)
    if args.seed is not None:
        raw["seed"] = int(args.seed)
    out = load_scenario(raw)
    out.source = sc.source
    return out


def _scenario_name(sc: ScenarioConfig) -> str:
    src = sc.source
    if src.startswith("preset:"):
        return src.split(":", 1)[1]
    return Path(src).stem if src != "<dict>" else "scenario"


def _compute_bounds(ctx: ScenarioContext):
    cond = mb.global_conditions(ctx.ks, ctx.grid.xmax)
    if not cond.any_holds:
        raise mb.InfeasibleParamsError(
            "neither global-existence condition holds; no bound system available")
    traj = ctx.trajectory
    bp = ctx.sc.bounds_params()
    env_max = mb.m1_envelope_max(cond, ctx.ks, traj.M0[0], traj.M1[0], ctx.cfg.t_end)
    par = mb.assemble_bound_params(ctx.ks, ctx.cfg.m, env_max, cond,
                                   sample_hi=10 * ctx.grid.xmax,
                                   mode=bp["mode"], phi_order=bp["phi_order"],
                                   eps_margin=bp["eps_margin"])
    from .grid import moment
    init = {0: traj.M0[0], 1: traj.M1[0], 2: traj.M2[0],
            **{i: moment(traj.fields[0], float(i)) for i in par.orders}}
    return mb.bound_system(par, init, traj.times, ctx.cfg.dt), cond


def cmd_run(args) -> int:
    sc = _apply_overrides(load_scenario(args.config), args)
    ctx = ScenarioContext(sc)
    out_dir = Path(args.out)
    name = _scenario_name(sc)

    if ctx.cfg.scheme == "duhamel":
        traj, rep = duhamel_solve(ctx.f0, ctx.cfg, ctx.ks)
        ctx._traj = traj
        print(f"duhamel: {rep.iterations} iterations, converged={rep.converged}, "
              f"contraction window {rep.contraction_window:g}")
    else:
        traj = ctx.trajectory

    bounds = None
    if "moment-domination" in sc.check_suites:
        try:
            bounds, _ = _compute_bounds(ctx)
        except mb.InfeasibleParamsError as exc:
            print(f"bounds unavailable: {exc}", file=sys.stderr)
    path = write_trajectory_csv(out_dir / f"{name}_trajectory.csv", traj, bounds)
    print(f"trajectory: {path}  (outcome: {traj.outcome})")

    if sc.check_suites:
        report, _ = run_suites(sc)
        report.csv_paths.append(str(path))
        print(report.render(), end="")
        return report.exit_code
    return 0


def cmd_verify(args) -> int:
    sc = _apply_overrides(load_scenario(args.config), args)
    report, ctx = run_suites(sc)
    out_dir = Path(args.out)
    name = _scenario_name(sc)
    path = write_trajectory_csv(out_dir / f"{name}_trajectory.csv", ctx.trajectory,
                                getattr(ctx, "_bounds", None))
    report.csv_paths.append(str(path))
    print(f"scenario: {sc.source}")
    print(report.render(), end="")
    print(f"trajectory: {path}")
    return report.exit_code


def cmd_probe(args) -> int:
    sc = _apply_overrides(load_scenario(args.config), args)
    report, _ = run_suites(sc, suites=["regularization-probe"])
    print(report.render(), end="")
    return report.exit_code


def cmd_bounds(args) -> int:
    sc = _apply_overrides(load_scenario(args.config), args)
    ctx = ScenarioContext(sc)
    bounds, cond = _compute_bounds(ctx)
    dom = mb.check_domination(ctx.trajectory, bounds, ctx.ks,
                              tol=sc.tolerance("domination", 0.05))
    out_dir = Path(args.out)
    path = write_trajectory_csv(out_dir / f"{_scenario_name(sc)}_trajectory.csv",
                                ctx.trajectory, bounds)
    print(f"certified condition: ({cond.certified})")
    for row in dom.rows:
        print(f"{'PASS' if row.ok else 'FAIL'}  domination/{row.name} "
              f"max-ratio={row.max_ratio:.6g}")
    print(f"trajectory: {path}")
    return 0 if dom.ok else 2


def cmd_list_presets(_args) -> int:
    for name in preset_names():
        print(f"{name:24s} {preset_description(name)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="gfc",
        description="growth-fragmentation-coagulation solver and verification harness")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, needs_config=True):
        if needs_config:
            p.add_argument("--config", required=True,
                           help="YAML scenario file or built-in preset name")
        p.add_argument("--out", default="out", help="output directory for CSV files")
        p.add_argument("--cells", type=int, default=None, help="override grid cells")
        p.add_argument("--dt", type=float, default=None, help="override time step")
        p.add_argument("--seed", type=int, default=None, help="override sampling seed")

    p = sub.add_parser("run", help="run the scenario and emit the trajectory CSV")
    common(p)
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("verify", help="execute every enabled invariant suite")
    common(p)
    p.set_defaults(func=cmd_verify)
    p = sub.add_parser("probe-regularization", help="run the moment-regularization probe")
    common(p)
    p.set_defaults(func=cmd_probe)
    p = sub.add_parser("bounds", help="integrate the a priori moment bounds and check domination")
    common(p)
    p.set_defaults(func=cmd_bounds)
    p = sub.add_parser("list-presets", help="list built-in scenario presets")
    p.set_defaults(func=cmd_list_presets)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except USER_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
