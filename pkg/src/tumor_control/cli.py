"""Command-line entry point: ``tumor-control {simulate,optimize,gradcheck,feasibility}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import io
from .config import PRESET_ALIASES, PRESETS, SEED_CONTROLS, ConfigError, Scenario, dump_scenario, load_scenario
from .forward import solve_forward
from .model import check_feasibility
from .optimizer import DivergenceError, IterateRecord, run
from .problem import ControlProblem, gradient_check

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_DIVERGED = 2
EXIT_INFEASIBLE = 3
GRADCHECK_TOL = 1e-3

log = logging.getLogger("tumor_control")


def _parse_times(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.replace(";", ",").split(",") if v.strip())


def _parse_set(items) -> dict:
    out = {}
    for item in items or ():
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        try:
            out[key.strip()] = json.loads(value)
        except json.JSONDecodeError:
            out[key.strip()] = value.strip()
    return out


def build_scenario(args) -> Scenario:
    overrides = _parse_set(args.set)
    if args.seed_control:
        overrides["seed_control"] = args.seed_control
    if args.snapshot_times:
        overrides["snapshot_times"] = _parse_times(args.snapshot_times)
    return load_scenario(args.config, preset=args.preset, **overrides)


def _prepare_out(args, sc: Scenario) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "manifest.json").write_text(dump_scenario(sc))
    return out


def _feasibility_gate(sc: Scenario, allow: bool) -> bool:
    report = check_feasibility(sc.params())
    if report.feasible or allow:
        return True
    print(f"infeasible drug window (constant-dose condition fails): {report}", file=sys.stderr)
    print("rerun with --allow-infeasible to optimize anyway", file=sys.stderr)
    return False


def _write_state(out: Path, sc: Scenario, u, s, state, mesh, grid):
    p = sc.params()
    io.write_control(out / "u.csv", u, mesh)
    io.write_drug(out / "s.csv", s, p, mesh)
    io.write_snapshots(out, state, grid, mesh, sc.snapshot_times)
    io.write_cross_section(out / "cross_section.csv", state, grid, mesh, sc.snapshot_times)


def cmd_simulate(args) -> int:
    sc = build_scenario(args)
    out = _prepare_out(args, sc)
    problem = ControlProblem(sc.params(), sc.grid(), sc.mesh(), sc.y0(), mask=sc.mask(), backend=sc.backend)
    u = sc.initial_control()
    state, s = solve_forward(u, problem.forward)
    _write_state(out, sc, u, s, state, problem.mesh, problem.grid)
    print(f"simulated {sc.nt} steps on a {sc.nx}x{sc.ny or sc.nx} grid; output in {out}")
    return EXIT_OK


def cmd_optimize(args) -> int:
    sc = build_scenario(args)
    if not _feasibility_gate(sc, args.allow_infeasible):
        return EXIT_INFEASIBLE
    out = _prepare_out(args, sc)
    problem = ControlProblem(sc.params(), sc.grid(), sc.mesh(), sc.y0(), mask=sc.mask(), backend=sc.backend)
    u0 = sc.initial_control()
    with io.IterateWriter(out / "iterates.csv", IterateRecord.FIELDS) as writer:
        try:
            result = run(problem, u0, grad_tol=sc.grad_tol, clamp_nonnegative=sc.clamp_nonnegative,
                         callback=writer)
        except DivergenceError as exc:
            print(f"diverged: {exc}", file=sys.stderr)
            return EXIT_DIVERGED
    best = result.best
    _write_state(out, sc, best.u, best.s, best.state, problem.mesh, problem.grid)
    io.write_gradient(out / "gradient.csv", best.gradient, best.adjoint.p2, problem.mesh)
    last = result.records[result.best_k]
    print(f"{len(result.records)} iterates ({result.stop_reason}); best k={result.best_k} "
          f"J_eps={last.J_eps:.8g} J={last.J:.8g} "
          f"violations upper={last.max_violation_upper:.4g} lower={last.max_violation_lower:.4g}")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    sc = build_scenario(args)
    problem = ControlProblem(sc.params(), sc.grid(), sc.mesh(), sc.y0(), mask=sc.mask(), backend=sc.backend)
    check = gradient_check(problem, sc.initial_control(), n_directions=args.directions, h=args.h, seed=args.seed)
    for i, (a, b, e) in enumerate(zip(check.directional, check.finite_difference, check.errors)):
        print(f"direction {i}: adjoint {a:+.12e}  central-diff {b:+.12e}  rel.err {e:.3e}")
    print(f"max relative error {check.max_error:.3e}")
    return EXIT_OK if check.max_error <= GRADCHECK_TOL else EXIT_FAIL


def cmd_feasibility(args) -> int:
    sc = build_scenario(args)
    report = check_feasibility(sc.params())
    print(report)
    return EXIT_OK if report.feasible else EXIT_INFEASIBLE


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tumor-control", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, help="key = value or JSON config file")
        p.add_argument("--preset", choices=sorted(PRESETS) + sorted(PRESET_ALIASES))
        p.add_argument("--seed-control", choices=SEED_CONTROLS)
        p.add_argument("--snapshot-times", help="comma-separated times in days")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key")
        return p

    common(sub.add_parser("simulate", help="forward solve only")).add_argument("--out", default="out")
    opt = common(sub.add_parser("optimize", help="gradient descent on the penalized objective"))
    opt.add_argument("--out", default="out")
    opt.add_argument("--allow-infeasible", action="store_true")
    gc = common(sub.add_parser("gradcheck", help="adjoint gradient vs central differences"))
    gc.add_argument("--directions", type=int, default=5)
    gc.add_argument("--h", type=float, default=1e-5)
    gc.add_argument("--seed", type=int, default=0)
    common(sub.add_parser("feasibility", help="constant-dose feasibility of the drug window"))
    return parser


COMMANDS = {
    "simulate": cmd_simulate,
    "optimize": cmd_optimize,
    "gradcheck": cmd_gradcheck,
    "feasibility": cmd_feasibility,
}


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
