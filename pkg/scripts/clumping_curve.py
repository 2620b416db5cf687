"""Mean relative clumping log(M/n) against k/n for one passenger count.

    python3 scripts/clumping_curve.py --n 100 --replicas 2000
"""

import argparse

import numpy as np

from detachment.simulator import ensemble_observables


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=100)
    ap.add_argument("--replicas", type=int, default=2000)
    ap.add_argument("--multiples", type=float, nargs="+", default=[0.01, 0.1, 0.25, 0.5, 1, 2, 3, 5, 10])
    ap.add_argument("--seed", type=int, default=12)
    args = ap.parse_args()
    print("k,k_over_n,mean_rc,sd_rc")
    for m in args.multiples:
        k = max(1, int(m * args.n))
        rc = ensemble_observables(args.n, k, args.replicas, args.seed)["rc"]
        print(f"{k},{k / args.n:g},{rc.mean():.6f},{rc.std(ddof=1):.6f}")


if __name__ == "__main__":
    main()
