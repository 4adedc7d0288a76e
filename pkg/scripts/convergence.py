"""Per-iteration SR of bcd_mm for a few element counts, as CSV on stdout.

    python3 scripts/convergence.py --m 8 16 32 > convergence.csv
"""

import argparse
import csv
import sys

from irs_secrecy.bcd_driver import SolverOptions, bcd_solve
from irs_secrecy.channel import RngStream, Scenario, build_scenario
from irs_secrecy.experiments import system_config


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--m", type=int, nargs="+", default=[8, 16, 32])
    p.add_argument("--p-dbm", type=float, default=15.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--realization", type=int, default=0)
    args = p.parse_args()
    w = csv.writer(sys.stdout)
    w.writerow(["m", "iteration", "sr_bps_hz"])
    for m in args.m:
        cfg = system_config({"m": m, "p_t_dbm": args.p_dbm})
        ch = build_scenario(Scenario(), cfg, RngStream(args.seed, args.realization))
        _, rep = bcd_solve(cfg, ch, SolverOptions(seed=args.seed))
        for i, sr in enumerate(rep.sr_trace):
            w.writerow([m, i, f"{sr:.10g}"])


if __name__ == "__main__":
    main()
