"""Histogram of the first detachment time for a few passenger counts.

    python3 scripts/first_detachment_histogram.py --ns 20 40 --replicas 10000 --output hist.csv

Writes one row per (n, bin) with the bin edges on the n^2 scale and the count.
Censored replicas (no detachment before the horizon) are reported, not binned.
"""

import argparse
import csv

import numpy as np

from detachment.simulator import run_replicas


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--ns", type=int, nargs="+", default=[20, 40])
    ap.add_argument("--replicas", type=int, default=10000)
    ap.add_argument("--horizon", type=int, default=100000)
    ap.add_argument("--bins", type=int, default=40)
    ap.add_argument("--seed", type=int, default=6)
    ap.add_argument("--output", default="first_detachment_hist.csv")
    args = ap.parse_args()
    with open(args.output, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "bin_lo", "bin_hi", "count"])
        for n in args.ns:
            recs = run_replicas(n, args.horizon, args.replicas, args.seed + n, stop_at_first_detachment=True)
            t = np.array([r.first_detachment for r in recs if not r.censored], dtype=float)
            counts, edges = np.histogram(t / n**2, bins=args.bins)
            for lo, hi, c in zip(edges, edges[1:], counts):
                w.writerow([n, f"{lo:.6g}", f"{hi:.6g}", int(c)])
            print(f"n={n}: mean {t.mean():.1f}, median {np.median(t):.0f}, "
                  f"censored {args.replicas - len(t)}/{args.replicas}")


if __name__ == "__main__":
    main()
