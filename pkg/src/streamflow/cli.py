"""Command-line front end.

Commands: ``curves``, ``interpolate``, ``solve`` and ``bench``.
Exit codes: 0 success, 1 input error, 2 numerical failure, 3 determinism
failure.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import io
from .batch import (
    TABLE_SIZES,
    BatchJob,
    ExecutionStrategy,
    ItemFailure,
    SpeedupReport,
    StrategyTiming,
    WorkItem,
    check_shared_beats_partitioned,
    machine_descriptor,
    measure_speedup,
    render_table,
    solve_batch,
    verify_determinism,
)
from .config import load_config
from .errors import DomainError, SolverError, StreamflowError
from .geometry import make_helix, make_lobe, make_tooth, sample_curve
from .hermite import stack_samples
from .ode import GEAR_DOMAIN, InitialConditions, gear_pump_ode, integrate
from .workloads import table_job

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_DETERMINISM = 0, 1, 2, 3

log = logging.getLogger("streamflow")


class DeterminismFailure(StreamflowError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _floats(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise DomainError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise DomainError(f"expected comma-separated integers, got {text!r}") from None


def _domain(text):
    vals = _floats(text)
    if len(vals) != 2:
        raise DomainError(f"domain needs two values lo,hi, got {text!r}")
    return tuple(vals)


# -- curves ----------------------------------------------------------------


def _build_curve(args):
    params = _floats(args.params) if args.params else []
    if args.name == "tooth":
        if len(params) > 1:
            raise DomainError(f"tooth takes one parameter s0, got {len(params)}")
        s0 = params[0] if params else args.s0
        return make_tooth(s0), f"tooth, s0 = {s0:g}"
    if args.name == "lobe":
        if len(params) != 3:
            raise DomainError(f"lobe takes three parameters r,phase,omega, got {len(params)}")
        evo = make_lobe(*params)
        return evo.snapshot(args.time), f"lobe at t = {args.time:g}"
    if len(params) != 4:
        raise DomainError(f"helix takes four parameters a1,a2,a3,a4, got {len(params)}")
    domain = _domain(args.domain) if args.domain else (0.0, 4.0 * math.pi)
    return make_helix(*params, domain=domain), "helix"


def cmd_curves(args):
    if args.samples < 2:
        raise DomainError("--samples must be at least 2")
    curve, title = _build_curve(args)
    s, pts, tans = sample_curve(curve, args.samples)
    io.write_curve_csv(args.out, s, pts, tans)
    if args.plot:
        from .plotting import plot_curve

        plot_curve(args.plot, pts, title)
    return EXIT_OK


# -- interpolate -----------------------------------------------------------


def _samples_job(named, kind, cfg=None):
    items = []
    for _, smp in named:
        if cfg is None:
            items.append(WorkItem(sample=smp))
        else:
            items.append(
                WorkItem(
                    sample=smp,
                    fluid=cfg.fluid(),
                    pressure=cfg.pressure(),
                    init=cfg.initial(),
                    cfg=cfg.solver(),
                    conv=cfg.convention,
                    component=cfg.component,
                )
            )
    return BatchJob(items, kind)


def cmd_interpolate(args):
    named = io.read_streamlines(args.input)
    stack_samples([smp for _, smp in named])  # rejects ragged batches
    strategy = ExecutionStrategy.parse(args.strategy)
    splines = solve_batch(_samples_job(named, "interpolate"), strategy)
    named_splines = [(lid, sp) for (lid, _), sp in zip(named, splines)]
    io.write_coefficients_csv(args.out, named_splines)
    if args.samples_out:
        io.write_spline_samples_csv(args.samples_out, named_splines, args.resolution)
    if args.plot:
        from .plotting import plot_splines

        plot_splines(args.plot, named_splines)
    return EXIT_OK


# -- solve -----------------------------------------------------------------


def _solve_config(args):
    cfg = load_config(args.config)
    return cfg.override(
        rho=args.rho,
        mu=args.mu,
        u0=args.u0,
        udot0=args.udot0,
        s_start=args.s_start,
        method=args.method,
        step=args.step,
        strategy=args.strategy,
        component=args.component,
        convention=args.convention,
    )


def _solve_gear(args, cfg, out):
    lo, hi = _domain(args.domain) if args.domain else (GEAR_DOMAIN[0], GEAR_DOMAIN[1] - 0.01)
    ode = gear_pump_ode(cfg.fluid(), domain=(lo, hi), eps=cfg.eps)
    try:
        sol = integrate(ode, InitialConditions(lo, cfg.u0, cfg.udot0), hi, cfg.solver())
    except SolverError as exc:
        if exc.partial is not None:
            io.write_solutions_csv(out, [("gear-pump", exc.partial)])
        print(f"gear-pump: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    io.write_solutions_csv(out, [("gear-pump", sol)])
    if args.plot:
        from .plotting import plot_solutions

        plot_solutions(args.plot, [("gear-pump", sol)])
    return EXIT_OK


def cmd_solve(args):
    cfg = _solve_config(args)
    out = args.out or cfg.output
    if args.gear_pump:
        return _solve_gear(args, cfg, out)
    source = args.input or cfg.input
    if source is None:
        raise DomainError("solve needs an input file (or --gear-pump)")
    if io.detect_format(source) == "coefficients":
        named = io.read_coefficients(source)
        items = [
            WorkItem(
                spline=sp,
                fluid=cfg.fluid(),
                pressure=cfg.pressure(),
                init=cfg.initial(),
                cfg=cfg.solver(),
                conv=cfg.convention,
                component=cfg.component,
            )
            for _, sp in named
        ]
        job = BatchJob(items, "solve")
    else:
        named = io.read_streamlines(source)
        stack_samples([smp for _, smp in named])
        job = _samples_job(named, "both", cfg)
    results = solve_batch(job, cfg.execution())
    solved, failed = [], []
    for (lid, _), res in zip(named, results):
        if isinstance(res, tuple):
            res = res[1]
        (failed if isinstance(res, ItemFailure) else solved).append((lid, res))
    io.write_solutions_csv(out, solved)
    for lid, fail in failed:
        where = f" at s = {fail.s:.17g}" if fail.s is not None else ""
        print(f"line {lid}: {fail.error_type}{where}: {fail.error}", file=sys.stderr)
    if args.plot and solved:
        from .plotting import plot_solutions

        plot_solutions(args.plot, solved)
    return EXIT_NUMERIC if failed else EXIT_OK


# -- bench -----------------------------------------------------------------


def _strategies(text):
    out = [ExecutionStrategy.serial()]
    for part in (text or "").split(","):
        if part.strip():
            strat = ExecutionStrategy.parse(part)
            if strat not in out:
                out.append(strat)
    return out


def _untimed_report(job, strategies):
    nan = float("nan")
    rows = tuple(StrategyTiming(s, nan, (), nan, False) for s in strategies)
    return SpeedupReport(job.kind, job.m, rows, machine_descriptor(), nan)


def cmd_bench(args):
    cfg = load_config(args.config)
    strategies = _strategies(args.strategies)
    sizes = _ints(args.sizes)
    if not sizes or min(sizes) < 1:
        raise DomainError("--sizes must list positive integers")
    samples = [smp for _, smp in io.read_streamlines(args.input)] if args.input else None
    timed = not args.timings_off
    reports = []
    for m in sizes:
        job = table_job(m, args.kind, args.pairs, args.seed, cfg, samples)
        if len(strategies) > 1:
            det = verify_determinism(job, strategies)
            if not det.ok:
                raise DeterminismFailure(
                    f"M={m}: {det.strategy} differs from {det.reference} at streamline {det.index}: {det.detail}"
                )
        if timed:
            rep = measure_speedup(job, strategies, repeats=args.repeats, memory=not args.no_memory)
            check_shared_beats_partitioned(rep)
        else:
            rep = _untimed_report(job, strategies)
        reports.append(rep)
    io.write_speedup_csv(args.out, reports, timings=timed)
    if args.out not in (None, "-"):
        mach = reports[0].machine
        print(f"{args.kind}, {args.pairs} pairs per streamline; cores: {mach['physical_cores']} physical, "
              f"{mach['logical_cores']} logical")
        if timed:
            print(render_table(reports))
            if 1 in sizes:
                print("note: speedup below 1 at M = 1 is expected (dispatch overhead dominates)")
            if any(not row.reliable for rep in reports for row in rep.rows):
                print("* elapsed time below 100x timer resolution; speedup unreliable")
        else:
            print("timings disabled; determinism verified for all strategies")
    if timed and not args.no_plot:
        from .plotting import plot_speedups

        path = args.plot or (str(Path(args.out).with_suffix(".png")) if args.out not in (None, "-") else None)
        if path:
            plot_speedups(path, reports)
    return EXIT_OK


# -- entry point -----------------------------------------------------------


def build_parser():
    p = _Parser(prog="streamflow", description="Streamline velocity fields from reduced Navier-Stokes ODEs.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("curves", help="sample a catalog streamline curve to CSV")
    c.add_argument("--name", required=True, choices=("tooth", "lobe", "helix"))
    c.add_argument("--s0", type=float, default=1.0, help="tooth lower-bound parameter (default 1.0)")
    c.add_argument("--params", help="comma-separated curve parameters")
    c.add_argument("--time", type=float, default=0.0, help="lobe snapshot time")
    c.add_argument("--domain", help="helix parameter interval lo,hi")
    c.add_argument("--samples", type=int, default=100)
    c.add_argument("--out", default="-")
    c.add_argument("--plot", help="write a figure of the curve")
    c.set_defaults(func=cmd_curves)

    i = sub.add_parser("interpolate", help="Hermite-interpolate sampled streamlines")
    i.add_argument("input")
    i.add_argument("--out", default="-", help="coefficient CSV")
    i.add_argument("--samples-out", help="CSV of the splines sampled in s")
    i.add_argument("--resolution", type=int, default=50)
    i.add_argument("--strategy", default="serial")
    i.add_argument("--plot")
    i.set_defaults(func=cmd_interpolate)

    s = sub.add_parser("solve", help="solve the velocity ODE along streamlines")
    s.add_argument("input", nargs="?", help="samples or coefficient file (chained mode)")
    s.add_argument("--config")
    s.add_argument("--out")
    s.add_argument("--gear-pump", action="store_true", help="solve the tooth-flank gear-pump equation")
    s.add_argument("--domain", help="gear-pump interval lo,hi")
    s.add_argument("--rho", type=float)
    s.add_argument("--mu", type=float)
    s.add_argument("--u0", type=float)
    s.add_argument("--udot0", type=float)
    s.add_argument("--s-start", type=float)
    s.add_argument("--method", choices=("rk4", "adams_moulton_2", "bdf2"))
    s.add_argument("--step", type=float)
    s.add_argument("--strategy")
    s.add_argument("--component", type=int)
    s.add_argument("--convention", choices=("pseudoinverse", "componentwise"))
    s.add_argument("--plot")
    s.set_defaults(func=cmd_solve)

    b = sub.add_parser("bench", help="speedup table over streamline counts")
    b.add_argument("--input", help="streamline samples to replicate (default: synthetic helices)")
    b.add_argument("--config")
    b.add_argument("--kind", choices=("interpolate", "solve", "both"), default="interpolate")
    b.add_argument("--sizes", default=",".join(map(str, TABLE_SIZES)))
    b.add_argument("--pairs", type=int, default=100)
    b.add_argument("--strategies", default="shared_pool:4,partitioned:2:2")
    b.add_argument("--repeats", type=int, default=3)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out", default="-")
    b.add_argument("--plot", help="figure path (default: next to --out)")
    b.add_argument("--no-plot", action="store_true")
    b.add_argument("--no-memory", action="store_true", help="skip the peak-memory run")
    b.add_argument("--timings-off", "--seed-timings-off", dest="timings_off", action="store_true",
                   help="omit timing fields so output is byte-reproducible")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except DeterminismFailure as exc:
        print(f"determinism failure: {exc}", file=sys.stderr)
        return EXIT_DETERMINISM
    except SolverError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (StreamflowError, OSError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
