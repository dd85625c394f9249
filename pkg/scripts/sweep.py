"""Run one ablation sweep on the toy clip and print the table.

    python3 scripts/sweep.py group-size
    python3 scripts/sweep.py sampling --values 0.015625,1.0
"""

import argparse
import logging

from siedd.bench import SWEEPS, format_table, run_sweep


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("sweep", choices=sorted(SWEEPS))
    ap.add_argument("--values")
    ap.add_argument("--out", default="sweep_results")
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    values = [float(v) for v in args.values.split(",")] if args.values else None
    rows = run_sweep(args.sweep, args.out, values=values, workers=args.workers)
    print(format_table(args.sweep, rows))


if __name__ == "__main__":
    main()
