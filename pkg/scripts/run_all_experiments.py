"""Run every registered experiment with its defaults and write CSV/JSON files.

    python3 scripts/run_all_experiments.py --output results [--only ie_limit tau_tail]
"""

import argparse
import sys

from detachment.experiments import REGISTRY, ExperimentSpec, run_experiment


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--output", default="results")
    ap.add_argument("--only", nargs="*", choices=sorted(REGISTRY))
    args = ap.parse_args()
    failed = []
    for name in args.only or REGISTRY:
        rep = run_experiment(ExperimentSpec(name, {}, args.output))
        status = "PASS" if rep.passed else "FAIL"
        print(f"{status} {name} ({rep.wall_time:.1f}s)")
        for verdict, ok in rep.verdicts.items():
            print(f"    {'ok ' if ok else 'BAD'} {verdict}")
        if not rep.passed:
            failed.append(name)
    return 2 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
