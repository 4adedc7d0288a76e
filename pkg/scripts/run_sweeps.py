"""Run every sweep config in configs/ and write one CSV per sweep.

    python3 scripts/run_sweeps.py --out results --realizations 20 --workers 4
"""

import argparse
import time
from dataclasses import replace
from pathlib import Path

from irs_secrecy.experiments import SweepSpec, load_config, run_sweep

ROOT = Path(__file__).resolve().parent.parent


def main():
    p = argparse.ArgumentParser()
    p.add_argument("configs", nargs="*", help="sweep files (default: configs/sweep_*.toml)")
    p.add_argument("--out", default="results")
    p.add_argument("--realizations", type=int)
    p.add_argument("--workers", type=int, default=1)
    args = p.parse_args()
    paths = [Path(c) for c in args.configs] or sorted((ROOT / "configs").glob("sweep_*.toml"))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for path in paths:
        spec = replace(SweepSpec.from_dict(load_config(path)), workers=args.workers)
        if args.realizations:
            spec.realizations = args.realizations
        t0 = time.perf_counter()
        res = run_sweep(spec, out / (path.stem + ".csv"))
        print(f"{path.name}: {len(res.rows)} rows in {time.perf_counter() - t0:.1f}s")
        for row in res.rows:
            print(f"  {row['value']!s:>6} {row['scheme']:<11} {row['mean_sr_bps_hz']:7.3f} "
                  f"+/- {row['stderr']:.3f}  ({row['n_failed']} failed)")


if __name__ == "__main__":
    main()
