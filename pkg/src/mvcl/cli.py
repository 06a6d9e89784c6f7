"""Command line: ``mvcl simulate|riemann|verify|converge|oracle``.

Exit status is 0 on success, 2 for configuration or usage errors and 3 when
a verification check fails.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import kernels
from .config import ConfigError, RunConfig, load_config, preset_path
from .evolution import CFLError, run, run_synchronized
from .flux import BUILTINS, builtin
from .oracle import ConstantProblem, EquilibriumProblem, ExampleProblem, ExampleSolution, \
    ModifiedRiemannProblem, convergence_study, extinction_error_bar
from .riemann import eval_fan, solve_modified_riemann, solve_standard_riemann
from .runio import load_run, write_run
from .state import Grid, leq
from .verification import (
    TestFunctionFamily,
    VerificationError,
    VerificationReport,
    check_comparison,
    check_contraction,
    default_compat_windows,
    verify_run,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_VERIFY = 3

log = logging.getLogger("mvcl")


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 2 with the usage text
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _config_from_args(args) -> RunConfig:
    if args.preset:
        return load_config(preset_path(args.preset))
    return load_config(args.config)


# -- simulate -----------------------------------------------------------------------


def cmd_simulate(args) -> int:
    cfg = _config_from_args(args)
    out = Path(args.output or cfg.output.get("directory", "run"))
    backend = cfg.solver.backend or kernels.BACKEND
    partner = cfg.partner()
    t0 = time.perf_counter()
    if partner is None:
        trajs = [run(cfg.initial_state(), cfg.flux, cfg.solver)]
    else:
        if partner.solver != cfg.solver:
            raise ConfigError("partner configuration must use the same [solver] settings")
        trajs = run_synchronized([cfg.initial_state(), partner.initial_state()], cfg.flux, cfg.solver)
    wall = time.perf_counter() - t0
    manifest = write_run(trajs[0], cfg, out, wall, backend)
    if partner is not None:
        write_run(trajs[1], partner, out / "partner", wall, backend)
    print(f"wrote {out} ({manifest['n_steps']} steps, extinction times {manifest['extinction_times']})")
    return EXIT_OK


# -- riemann ------------------------------------------------------------------------


def _parse_params(items) -> dict:
    params = {}
    for item in items or []:
        key, _, value = item.partition("=")
        if not _:
            raise ConfigError(f"flux parameter {item!r} is not key=value")
        try:
            params[key] = float(value)
        except ValueError:
            raise ConfigError(f"flux parameter {key} must be numeric") from None
    return params


def cmd_riemann(args) -> int:
    try:
        flux = builtin(args.flux, **_parse_params(args.param))
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    if args.u_minus < 0 or args.u_plus < 0 or args.mass < 0:
        raise ConfigError("states and mass must be nonnegative")
    if args.mass > 0:
        sol = solve_modified_riemann(args.u_minus, args.u_plus, args.mass, flux, u_cap=args.u_cap)
        payload = sol.to_dict()

        def sample(x, t):
            return sol.eval(x, t)
    else:
        fan = solve_standard_riemann(args.u_minus, args.u_plus, flux)
        payload = fan.to_dict()

        def sample(x, t):
            return eval_fan(fan, x / t)
    payload = {"flux": flux.describe(), "u_minus": args.u_minus, "u_plus": args.u_plus,
               "mass": args.mass, "solution": payload}
    print(json.dumps(payload, indent=2, default=float))
    if args.samples:
        if args.t <= 0:
            raise ConfigError("--t must be positive for sampling")
        xs = np.linspace(args.x_lo, args.x_hi, args.n)
        with open(args.samples, "w") as fh:
            fh.write("x,u_r\n")
            for x in xs:
                fh.write(f"{float(x)!r},{float(sample(float(x), args.t))!r}\n")
    return EXIT_OK


# -- verify -------------------------------------------------------------------------


def _family_for(cfg: RunConfig, traj) -> TestFunctionFamily:
    n = int(cfg.verify.get("family_size", 5))
    return TestFunctionFamily.default(cfg.grid.x_lo, cfg.grid.x_hi, float(traj.times[-1]), n)


def _windows_for(cfg: RunConfig, traj) -> dict:
    start, frac = cfg.verify.get("compat_window", [0.1, 0.8])
    return default_compat_windows(traj, float(start), float(frac))


def verify_pair(cfg_u: RunConfig, traj_u, traj_v, report: VerificationReport) -> None:
    relation = cfg_u.verify.get("relation")
    same_atoms = (np.array_equal(traj_u.atom_index, traj_v.atom_index)
                  and np.allclose(traj_u.ledger.initial_mass, traj_v.ledger.initial_mass))
    ordered = leq(traj_u.state_at(0), traj_v.state_at(0), 1e-12)
    if relation == "contraction" or (relation is None and same_atoms):
        window = cfg_u.verify.get("contraction_window")
        if window is None:
            right = float(traj_u.atom_positions[0]) if len(traj_u.atom_positions) else cfg_u.grid.x_hi
            window = [cfg_u.grid.x_lo, right]
        report.add(check_contraction(traj_u, traj_v, tuple(window)))
    if relation == "comparison" or (relation is None and ordered):
        for c in check_comparison(traj_u, traj_v):
            report.add(c)


def cmd_verify(args) -> int:
    try:
        cfg, traj, _ = load_run(args.run)
    except FileNotFoundError as exc:
        raise ConfigError(str(exc)) from exc
    report = verify_run(traj, _family_for(cfg, traj), compat_windows=_windows_for(cfg, traj))
    against = args.against
    if against is None and (Path(args.run) / "partner" / "manifest.json").exists():
        against = str(Path(args.run) / "partner")
    if against is not None:
        try:
            _, traj_v, _ = load_run(against)
        except FileNotFoundError as exc:
            raise ConfigError(str(exc)) from exc
        verify_pair(cfg, traj, traj_v, report)
    out = Path(args.report) if args.report else Path(args.run) / "verification.json"
    out.write_text(report.to_json())
    print(report.summary())
    print(f"report: {out}")
    return EXIT_OK if report.passed else EXIT_VERIFY


# -- converge -----------------------------------------------------------------------


def _problem(args):
    if args.problem == "example":
        return ExampleProblem(args.p, end_time=args.T)
    if args.problem == "constant":
        return ConstantProblem(end_time=args.T)
    if args.problem == "equilibrium":
        return EquilibriumProblem(end_time=args.T)
    return ModifiedRiemannProblem(builtin("bump"), end_time=args.T)


def cmd_converge(args) -> int:
    try:
        problem = _problem(args)
        rows = convergence_study(problem, args.grids, cfl=args.cfl)
    except ValueError as exc:  # e.g. a time outside the range of the exact solution
        raise ConfigError(str(exc)) from exc
    print(f"{'N':>6} {'dx':>10} {'L1 error':>12} {'atom error':>12} {'order':>7}")
    for r in rows:
        order = "" if r.order is None else f"{r.order:7.3f}"
        print(f"{r.n_cells:>6} {r.dx:>10.4g} {r.l1_error:>12.4e} {r.atom_mass_error:>12.4e} {order:>7}")
    bar = extinction_error_bar(rows)
    if bar is not None:
        print(f"extinction time {bar[0]:.6f} +/- {bar[1]:.2e}")
    if args.json:
        Path(args.json).write_text(json.dumps([r.__dict__ for r in rows], indent=2))
    return EXIT_OK


# -- oracle -------------------------------------------------------------------------


def cmd_oracle(args) -> int:
    if args.p <= 0 or args.t < 0:
        raise ConfigError("need p > 0 and t >= 0")
    sol = ExampleSolution(args.p, max(2.0, args.t))
    grid = Grid(args.x_lo, args.x_hi, args.n)
    values = sol.cell_averages(grid, args.t)
    mass = sol.atom_mass(args.t)
    path = Path(args.samples)
    with path.open("w") as fh:
        fh.write("x,u_r\n")
        for x, u in zip(grid.centers, values):
            fh.write(f"{float(x)!r},{float(u)!r}\n")
    atoms = path.with_name(path.stem + "_atoms.csv")
    with atoms.open("w") as fh:
        fh.write("t,atom_index,position,mass\n")
        fh.write(f"{float(args.t)!r},0,0.0,{float(mass)!r}\n")
    xi = sol.left_edge(args.t)
    print(json.dumps({"p": args.p, "t": args.t, "atom_mass": mass, "left_edge": xi,
                      "right_edge": args.p * args.t, "samples": str(path), "atoms": str(atoms)}))
    return EXIT_OK


# -- entry point --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mvcl", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="evolve a configuration and write a run directory")
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", help="TOML configuration file")
    src.add_argument("--preset", help="name of a shipped preset")
    s.add_argument("--output", help="run directory (overrides [output] directory)")
    s.set_defaults(func=cmd_simulate)

    r = sub.add_parser("riemann", help="solve a (modified) Riemann problem")
    r.add_argument("--flux", required=True, choices=sorted(BUILTINS))
    r.add_argument("--param", action="append", help="flux parameter key=value")
    r.add_argument("--u-minus", type=float, required=True)
    r.add_argument("--u-plus", type=float, required=True)
    r.add_argument("--mass", type=float, default=0.0, help="atom mass at the origin (0: no atom)")
    r.add_argument("--u-cap", type=float, default=1e6)
    r.add_argument("--samples", help="write x,u_r samples of the solution at time --t")
    r.add_argument("--t", type=float, default=1.0)
    r.add_argument("--x-lo", type=float, default=-1.0)
    r.add_argument("--x-hi", type=float, default=1.0)
    r.add_argument("--n", type=int, default=201)
    r.set_defaults(func=cmd_riemann)

    v = sub.add_parser("verify", help="residual checks on a run directory")
    v.add_argument("--run", required=True)
    v.add_argument("--against", help="second run directory for contraction/comparison")
    v.add_argument("--report", help="report path (default RUN/verification.json)")
    v.set_defaults(func=cmd_verify)

    c = sub.add_parser("converge", help="grid-refinement study against an exact solution")
    c.add_argument("--problem", choices=["example", "bump", "constant", "equilibrium"], default="example")
    c.add_argument("--p", type=float, default=1.0)
    c.add_argument("--T", type=float, default=0.5)
    c.add_argument("--grids", type=int, nargs="+", default=[100, 200, 400, 800])
    c.add_argument("--cfl", type=float, default=0.45)
    c.add_argument("--json", help="also write the table as JSON")
    c.set_defaults(func=cmd_converge)

    o = sub.add_parser("oracle", help="exact snapshot of the worked example")
    o.add_argument("--p", type=float, required=True)
    o.add_argument("--t", type=float, required=True)
    o.add_argument("--samples", required=True, help="output CSV (x,u_r)")
    o.add_argument("--x-lo", type=float, default=-1.0)
    o.add_argument("--x-hi", type=float, default=3.0)
    o.add_argument("--n", type=int, default=800)
    o.set_defaults(func=cmd_oracle)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, VerificationError, CFLError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
