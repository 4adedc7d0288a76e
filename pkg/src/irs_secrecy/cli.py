"""Command-line entry point: `solve`, `sweep` and `convergence`.

Exit codes: 0 success, 2 invalid configuration, 3 numerical failure.
"""

import argparse
import csv
import json
import sys

from .errors import InvalidInputError, NumericalError, UnsupportedConfigurationError
from .experiments import (SCHEMES, SweepSpec, instance_from_config, load_config, report_json,
                          run_scheme, run_sweep)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


def _cmd_solve(args):
    data = load_config(args.config) if args.config else {}
    cfg, scn, ch, opts = instance_from_config(data, args.realization)
    design, report = run_scheme(args.scheme, cfg, ch, opts, scn.amplitude)
    text = report_json(report, args.scheme, cfg, design)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text + "\n")
    print(text)


def _cmd_sweep(args):
    spec = SweepSpec.from_dict(load_config(args.config))
    if args.workers is not None:
        spec.workers = args.workers
    if args.realizations is not None:
        spec.realizations = args.realizations
    result = run_sweep(spec, args.output)
    print(f"wrote {len(result.rows)} rows to {args.output}")


def _cmd_convergence(args):
    data = load_config(args.config) if args.config else {}
    cfg, scn, ch, opts = instance_from_config(data, args.realization)
    with open(args.output, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["scheme", "iteration", "sr_bps_hz"])
        for scheme in args.schemes:
            _, report = run_scheme(scheme, cfg, ch, opts, scn.amplitude)
            for i, sr in enumerate(report.sr_trace):
                w.writerow([scheme, i, f"{sr:.12g}"])
    print(f"wrote convergence traces to {args.output}")


def build_parser():
    p = argparse.ArgumentParser(prog="irs-secrecy",
                                description="Secrecy-rate optimization for IRS-assisted MIMO links.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="solve one channel realization and print the report as JSON")
    s.add_argument("config", nargs="?", help="TOML or JSON file with system/scenario/solver tables")
    s.add_argument("--scheme", default="bcd_mm", choices=SCHEMES)
    s.add_argument("--realization", type=int, default=0)
    s.add_argument("--output", help="also write the JSON report here")
    s.set_defaults(func=_cmd_solve)

    s = sub.add_parser("sweep", help="run a Monte-Carlo sweep and write a CSV")
    s.add_argument("config", help="TOML or JSON file with a [sweep] table")
    s.add_argument("--output", "-o", default="sweep.csv")
    s.add_argument("--workers", type=int)
    s.add_argument("--realizations", type=int)
    s.set_defaults(func=_cmd_sweep)

    s = sub.add_parser("convergence", help="write per-iteration SR traces as CSV")
    s.add_argument("config", nargs="?")
    s.add_argument("--schemes", nargs="+", default=["bcd_mm", "rand_phase"], choices=SCHEMES)
    s.add_argument("--realization", type=int, default=0)
    s.add_argument("--output", "-o", default="convergence.csv")
    s.set_defaults(func=_cmd_convergence)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (InvalidInputError, UnsupportedConfigurationError) as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
