"""Command-line entry point: ``fracbands solve|sweep|analyze|export``."""
import argparse
from dataclasses import replace
import logging
import math
from pathlib import Path
import sys

from .exceptions import ConvergenceError, FracBandsError
from .harness.config import load_config
from .harness.records import export, read_records, write_record
from .harness.reports import gap_report, inversion_report, mass_report, scaling_report
from .harness.sweep import check_writable, run_sweep, solve_cell
from .solver import SolverSettings

EXIT_OK, EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_IO = 0, 2, 3, 4


def _fmt(x, spec=".6f"):
    return "nan" if x is None or not math.isfinite(x) else format(x, spec)


def cmd_solve(args):
    settings = SolverSettings(energy_tol=args.tol, max_iterations=args.max_iterations,
                              seed=args.seed)
    out = Path(args.out)
    check_writable(out.parent if str(out.parent) else Path("."))
    record = solve_cell(args.q, (args.v0, args.l, args.w), args.n_k, args.n_bands, args.grid,
                        settings, capture_errors=False)
    write_record(record, out)
    derived = record.payload["derived"]
    print(f"q={args.q} geometry=({args.v0}, {args.l}, {args.w}) -> {out}")
    print(f"inversion: {derived['inversion']['classification']} "
          f"k_min={_fmt(derived['inversion']['k_min'])}")
    print(f"m*(k=0) = {_fmt(derived['effective_mass']['m_star'])}")
    return EXIT_OK


def cmd_sweep(args):
    plan = load_config(args.config)
    if args.out is not None:
        plan = replace(plan, output_dir=Path(args.out))
    records = run_sweep(plan, workers=args.workers)
    failed = sum(not r.ok for r in records)
    print(f"{len(records)} records written to {plan.output_dir} ({failed} failed)")
    return EXIT_OK


def _analyze_inversion(records, args):
    for e in inversion_report(records, args.resolution):
        print(f"geometry v0={e.geometry[0]} l={e.geometry[1]} w={e.geometry[2]}")
        print("  q        k_min      e_min")
        for q, k, en in zip(e.track.q_values, e.track.k_min, e.track.e_min):
            print(f"  {q:<8.4f} {k:<10.6f} {en:.10f}")
        note = f" ({e.error})" if e.error else ""
        print(f"  q_inv = {_fmt(e.q_inv, '.4f')}{note}")


def _analyze_scaling(records, args):
    result, families, _ = scaling_report(records, args.resolution)
    for name, summary in result.as_dict().items():
        print(f"{name:>3}: exponent {summary.mean:+.4f} +/- {summary.std:.4f} "
              f"({summary.accepted} accepted, {summary.rejected} rejected, "
              f"{len(families[name])} families)")


def _analyze_mass(records, args):
    for e in mass_report(records, args.k0):
        print(f"geometry v0={e.geometry[0]} l={e.geometry[1]} w={e.geometry[2]} "
              f"(delta_k={e.delta_k:.6f})")
        print("  q        m_star")
        for q, m, flag in zip(e.q_values, e.m_star, e.flagged):
            print(f"  {q:<8.4f} {_fmt(m)}{'  (not a minimum)' if flag else ''}")
        print(f"  decay fit m* = {_fmt(e.amplitude)} * exp({_fmt(e.rate)} q) over q < 2")


def _analyze_gap(records, args):
    for e in gap_report(records):
        print(f"geometry v0={e.geometry[0]} l={e.geometry[1]} w={e.geometry[2]}")
        print("  q        direct       indirect     kind")
        c = e.curve
        for q, d, i, kind in zip(c.q_values, c.direct_gap, c.indirect_gap, c.directness):
            print(f"  {q:<8.4f} {d:<12.8f} {i:<12.8f} {kind.label}")
        if e.kink is None:
            print("  kink: too few q samples")
        elif e.kink.detected:
            print(f"  kink at q = {e.kink.q_kink:.4f} (slope {e.kink.slope_before:.4f} -> "
                  f"{e.kink.slope_after:.4f})")
        else:
            print("  no kink")


ANALYSES = {"inversion": _analyze_inversion, "scaling": _analyze_scaling,
            "mass": _analyze_mass, "gap": _analyze_gap}


def cmd_analyze(args):
    records = read_records(args.input)
    if not records:
        raise FileNotFoundError(f"no records in {args.input}")
    ANALYSES[args.kind](records, args)
    return EXIT_OK


def cmd_export(args):
    records = read_records(args.input)
    path = export(records, args.format, args.out)
    print(f"{len(records)} records exported to {path}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="fracbands",
                                     description="Bloch bands of the fractional Schrodinger equation.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="band structure for one (q, geometry) cell")
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--v0", type=float, required=True)
    p.add_argument("--l", type=float, required=True)
    p.add_argument("--w", type=float, required=True)
    p.add_argument("--n-k", type=int, default=25)
    p.add_argument("--n-bands", type=int, default=2)
    p.add_argument("--grid", type=int, default=512)
    p.add_argument("--tol", type=float, default=1e-13)
    p.add_argument("--max-iterations", type=int, default=200_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", help="run every cell of a sweep config")
    p.add_argument("--config", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default=None, help="override the config's output_dir")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("analyze", help="reports over a directory of records")
    p.add_argument("kind", choices=sorted(ANALYSES))
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--resolution", type=int, default=301)
    p.add_argument("--k0", type=float, default=0.0)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("export", help="write records as JSON or CSV")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--format", choices=("csv", "json"), required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConvergenceError as exc:
        print(f"convergence error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except FracBandsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
