"""Command line front end: ``vaxctl {simulate,optimize,compare,presets}``.

Exit codes: 0 on success (a run that hit the sweep limit still exits 0 and
is flagged in summary.json), 1 on invalid input, 2 on numerical failure.
"""

from __future__ import annotations

import argparse
import datetime as dt
import logging
import math
import os
import sys
from pathlib import Path

from vaxctl.control import SUPPLY, ControlBounds, ControlSchedule
from vaxctl.errors import DivergenceError, VaxctlError
from vaxctl.fbsm import SolveSettings, objective, solve, summarize
from vaxctl.integrate import integrate_forward
from vaxctl.scenario_io import PRESETS, get_preset, load_scenario, write_comparison, write_outputs
from vaxctl.timeseries import load_timeseries

log = logging.getLogger("vaxctl")

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; 2 is reserved for numerical failures here
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def _add_common(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", metavar="NAME", help=f"built-in scenario ({', '.join(PRESETS)})")
    src.add_argument("--scenario", metavar="PATH", type=Path, help="TOML scenario file")
    p.add_argument("--horizon", type=float, metavar="DAYS", help="simulation length in days")
    p.add_argument("--dt", type=float, metavar="DAYS", help="integration step in days")
    p.add_argument("--out", type=Path, metavar="DIR",
                   help="output directory (default: $VAXCTL_OUT or ./vaxctl-out)")
    p.add_argument("--quiet", action="store_true", help="only print warnings and errors")
    p.add_argument("-v", "--verbose", action="store_true", help="log every sweep")


def _add_solver(p: argparse.ArgumentParser) -> None:
    p.add_argument("--delta", type=float, help="convergence threshold on the relative L1 state change")
    p.add_argument("--damping", type=float, help="weight of the new controls in each update, in (0, 1]")
    p.add_argument("--max-iters", type=int, help="sweep limit")
    p.add_argument("--u-init", type=float, help="initial constant vaccination rate")
    p.add_argument("--split-o", type=float, help="share of daily supply reserved for the over-65 group")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="vaxctl", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="run the model without vaccination")
    _add_common(p)

    p = sub.add_parser("optimize", help="compute the optimal vaccination schedule")
    _add_common(p)
    _add_solver(p)

    p = sub.add_parser("compare", help="optimise under a daily dose supply and compare with observed data")
    _add_common(p)
    _add_solver(p)
    p.add_argument("--supply", type=Path, metavar="PATH", help="date,value CSV of doses available per day")
    p.add_argument("--real", type=Path, metavar="PATH", help="date,value CSV of observed infections")
    p.add_argument("--start-date", metavar="ISO", help="first day of the comparison window")

    sub.add_parser("presets", help="list built-in scenarios")
    return parser


def _scenario(args):
    scen = get_preset(args.preset) if args.preset else load_scenario(args.scenario)
    split = getattr(args, "split_o", None)
    return scen.with_overrides(dt=args.dt, horizon=args.horizon, split_O=split)


def _settings(args) -> SolveSettings:
    kw = {}
    for flag, key in (("delta", "delta"), ("damping", "damping"), ("max_iters", "max_iters"), ("u_init", "u_init")):
        value = getattr(args, flag, None)
        if value is not None:
            kw[key] = value
    return SolveSettings(**kw)


def _out_dir(args) -> Path:
    if args.out is not None:
        return args.out
    return Path(os.environ.get("VAXCTL_OUT", "vaxctl-out"))


def _print_summary(m, say) -> None:
    say(f"{'':14}{'over 65':>16}{'under 65':>16}{'total':>16}")
    rows = [
        ("infected", "infections", "infections_total"),
        ("infected %", "infections_pct", "infections_pct_total"),
        ("protected", "protected", "protected_total"),
        ("protected %", "protected_pct", "protected_pct_total"),
        ("doses", "doses", "doses_total"),
        ("peak I", "peak_infectious", "peak_infectious_total"),
        ("peak day", "peak_day", "peak_day_total"),
    ]
    for label, key, total in rows:
        o, y, t = getattr(m.over65, key), getattr(m.under65, key), getattr(m, total)
        say(f"{label:14}{o:16,.2f}{y:16,.2f}{t:16,.2f}")


def run_simulate(args, say=print) -> int:
    scen = _scenario(args)
    traj = integrate_forward(scen.initial_state, ControlSchedule.constant(scen.grid, 0.0), scen.params, scen.grid)
    metrics = summarize(traj)
    extra = {"scenario": scen.name, "mode": "simulate",
             "objective": objective(traj, traj.controls, scen.W_O, scen.W_Y)}
    paths = write_outputs(traj, metrics, _out_dir(args), extra)
    say(f"scenario {scen.name}: {scen.grid.T - scen.grid.t0:g} days, no vaccination")
    _print_summary(metrics, say)
    say(f"wrote {', '.join(str(p) for p in paths.values())}")
    return EXIT_OK


def _report_solution(sol, say) -> None:
    say(f"sweeps {sol.iterations}, final error {sol.final_error:.3e}, objective {sol.objective:.6g}")
    if not sol.converged:
        log.warning("WARNING: not converged after %d sweeps; results are the last iterate", sol.iterations)


def run_optimize(args, say=print) -> int:
    scen = _scenario(args)
    sol = solve(scen, _settings(args))
    metrics = summarize(sol.trajectory, sol.controls)
    paths = write_outputs(sol, metrics, _out_dir(args), {"scenario": scen.name, "mode": "optimize"})
    say(f"scenario {scen.name}: optimal vaccination over {scen.grid.T - scen.grid.t0:g} days")
    _report_solution(sol, say)
    _print_summary(metrics, say)
    say(f"wrote {', '.join(str(p) for p in paths.values())}")
    return EXIT_OK


def run_compare(args, say=print) -> int:
    scen = _scenario(args)
    supply_path = args.supply or scen.supply_path
    real_path = args.real or scen.real_path
    if supply_path is None or real_path is None:
        raise UsageError("compare needs --supply and --real (or a scenario that names both series)")
    start = args.start_date or scen.start_date
    if isinstance(start, str):
        try:
            start = dt.date.fromisoformat(start)
        except ValueError:
            raise UsageError(f"--start-date: bad ISO date {start!r}") from None
    supply = load_timeseries(supply_path, start)
    real = load_timeseries(real_path, supply.start)
    span = scen.grid.T - scen.grid.t0
    for label, series in (("supply", supply), ("real", real)):
        if len(series) < span - 1e-9:
            raise VaxctlError(f"{label} series has {len(series)} days from {series.start}, "
                              f"shorter than the {span:g}-day horizon")
    bounds = ControlBounds(a=scen.bounds.a, b=scen.bounds.b, mode=SUPPLY, supply=supply,
                           split_O=scen.bounds.split_O)
    scen = scen.with_overrides(bounds=bounds)

    sol = solve(scen, _settings(args))
    metrics = summarize(sol.trajectory, sol.controls)
    out = _out_dir(args)
    days = math.ceil(span - 1e-9)
    comparison = {
        "scenario": scen.name,
        "start_date": supply.start.isoformat(),
        "horizon_days": span,
        "split_O": scen.bounds.split_O,
        "total_optimized_doses": metrics.doses_total,
        "total_supply": supply.total(days),
        "optimized_doses_over65": metrics.over65.doses,
        "optimized_doses_under65": metrics.under65.doses,
        "total_real_infections": real.total(days),
        "converged": sol.converged,
    }
    paths = write_outputs(sol, metrics, out, {"scenario": scen.name, "mode": "compare"})
    paths.update(write_comparison(sol.trajectory, supply, real, out, comparison))
    say(f"scenario {scen.name}: {span:g} days from {supply.start}, supply split {scen.bounds.split_O:g}")
    _report_solution(sol, say)
    say(f"optimized doses {metrics.doses_total:,.0f} of {comparison['total_supply']:,.0f} available")
    _print_summary(metrics, say)
    say(f"wrote {', '.join(str(p) for p in paths.values())}")
    return EXIT_OK


def run_presets(args, say=print) -> int:
    for name in PRESETS:
        s = get_preset(name)
        r = s.r0
        say(f"{name:16} R0 OO={r.R0_OO:g} YY={r.R0_YY:g} OY={r.R0_OY:g} YO={r.R0_YO:g}  "
            f"T={s.grid.T:g} days dt={s.grid.dt:g}")
    return EXIT_OK


COMMANDS = {"simulate": run_simulate, "optimize": run_optimize, "compare": run_compare, "presets": run_presets}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INVALID
    quiet = getattr(args, "quiet", False)
    level = logging.WARNING if quiet else (logging.DEBUG if getattr(args, "verbose", False) else logging.INFO)
    logging.basicConfig(level=level, format="%(message)s", stream=sys.stderr, force=True)
    say = (lambda *a, **k: None) if quiet else print
    try:
        return COMMANDS[args.command](args, say)
    except DivergenceError as exc:
        where = f" (sweep {exc.iteration})" if exc.iteration is not None else ""
        print(f"vaxctl: numerical failure{where}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (VaxctlError, UsageError, ValueError) as exc:
        print(f"vaxctl: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
