"""Command line front end.

    detachment exact pi --n 3 --k 3 --exact
    detachment oracle single --n 3 --k 3
    detachment simulate --n 20 --horizon 100000 --replicas 1000 --seed 1
    detachment experiment critical_window --set ns=[1000,10000] --check
    detachment list

Exit codes: 0 success, 1 usage or domain error, 2 failed verdict under --check.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction

import numpy as np

from . import analytics as an
from . import checks, oracle, poissonized
from .combinatorics import stirling2, two_f_zero
from .experiments import REGISTRY, ExperimentSpec, SchemaError, format_value, run_experiment
from .simulator import run_replicas


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


def _ratio(x):
    return Fraction(x) if "/" in x else (int(x) if x.lstrip("-").isdigit() else float(x))


# formula name -> (required options, callable(args, exact))
FORMULAS = {
    "pi": (("n", "k"), lambda a, e: an.pi_detached(a.n, a.k, e)),
    "log-pi": (("n", "k"), lambda a, e: an.log_pi_detached(a.n, a.k)),
    "detachment-time": (("n", "k"), lambda a, e: an.detachment_time_prob(a.n, a.k, e)),
    "joint": (("n", "k", "l"), lambda a, e: an.joint_detached(a.n, a.k, a.l, e)),
    "cond": (("n", "k", "k2"), lambda a, e: an.cond_detached(a.n, a.k, a.k2, e)),
    "cond-given-not": (("n", "k", "k2"), lambda a, e: an.cond_detached_given_not(a.n, a.k, a.k2, e)),
    "triple": (("n", "k", "k2", "k3"), lambda a, e: an.triple_detached(a.n, a.k, a.k2, a.k3, e)),
    "sandwich": (("n", "k", "k2", "k3"), lambda a, e: an.sandwich_prob(a.n, a.k, a.k2, a.k3, e)),
    "tau-cdf": (("n", "k"), lambda a, e: an.tau_cdf(a.n, a.k, e)),
    "tau-tail": (("n", "k"), lambda a, e: an.tau_tail(a.n, a.k, e)),
    "expected-states": (("n", "k"), lambda a, e: an.expected_detachment_states(a.n, a.k, e)),
    "critical-k": (("n", "y"), lambda a, e: an.critical_k(a.n, a.y)),
    "critical-limit": (("y",), lambda a, e: an.critical_limit(a.y)),
    "lonely-moments": (("n", "k"), lambda a, e: an.lonely_moments(a.n, a.k, e)),
    "lonely-pmf": (("n", "k"), lambda a, e: an.lonely_pmf(a.n, a.k, e)),
    "some-lonely": (("n", "k"), lambda a, e: an.prob_some_lonely(a.n, a.k, e)),
    "support-tail": (("n", "k", "m"), lambda a, e: an.support_tail(a.n, a.k, a.m, e)),
    "support-pmf": (("n", "k"), lambda a, e: an.support_pmf(a.n, a.k, e)),
    "support-moments": (("n", "k"), lambda a, e: an.support_moments(a.n, a.k, e)),
    "support-gf": (("n", "k", "z"), lambda a, e: an.support_gf(a.n, a.k, a.z if e else float(a.z))),
    "fidi": (("c",), lambda a, e: an.fidi_limit_value(a.c, a.d, a.kind)),
    "ie-cdf": (("x",), lambda a, e: an.ie_cdf(a.x)),
    "minmax-moments": (("n",), lambda a, e: an.minmax_limit_moments(a.n)),
    "stirling": (("n", "m"), lambda a, e: stirling2(a.n, a.m)),
    "two-f-zero": (("n", "l", "z"), lambda a, e: two_f_zero(a.n, a.l, a.z if e else float(a.z))),
    "full-detachment": (("lam", "k"), lambda a, e: poissonized.full_detachment_prob(a.lam, a.k)),
    "no-lonely": (("lam", "k"), lambda a, e: poissonized.no_lonely_prob(a.lam, a.k)),
    "poissonian-dominance": (("lam", "k", "k2"),
                             lambda a, e: poissonized.poissonian_lonely_dominance(a.lam, a.k, a.k2)),
}


def _render(value) -> str:
    if isinstance(value, dict):
        return "\n".join(f"{k} {format_value(v)}" for k, v in value.items())
    if isinstance(value, (list, tuple)) and not hasattr(value, "_fields") and not hasattr(value, "mean"):
        return " ".join(format_value(v) for v in value)
    if hasattr(value, "mean") and hasattr(value, "variance"):
        return f"mean {format_value(value.mean)}\nvariance {format_value(value.variance)}"
    if isinstance(value, float):
        return repr(value)
    return format_value(value)


def _cmd_exact(args) -> int:
    need, fn = FORMULAS[args.formula]
    missing = [o for o in need if getattr(args, o) is None]
    if missing:
        raise UsageError(f"exact {args.formula} needs --{' --'.join(missing)}")
    print(_render(fn(args, bool(args.exact))))
    return 0


def _cmd_oracle(args) -> int:
    if args.which == "verify":
        verdicts, bad = checks.oracle_equality()
        return _report(verdicts, bad, args.check)
    if args.which == "dominance":
        verdicts, bad = checks.dominance_suite()
        return _report(verdicts, [b for b in bad if b[1]], args.check)
    if args.n is None or args.k is None:
        raise UsageError(f"oracle {args.which} needs --n and --k")
    if args.which == "single":
        for outcome, p in sorted(oracle.enumerate_single_time(args.n, args.k).mass.items()):
            print("L={} N={} clump={}".format(*outcome), format_value(p))
    elif args.which == "two-time":
        law = oracle.enumerate_two_time(args.n, args.k, args.l or 1)
        print("joint_detached", format_value(law.joint_detached))
        for outcome, p in sorted(law.lonely.mass.items()):
            print("L_k={} L_k+l={}".format(*outcome), format_value(p))
    elif args.which == "three-time":
        if args.k2 is None or args.k3 is None:
            raise UsageError("oracle three-time needs --k2 and --k3")
        law = oracle.enumerate_three_time(args.n, args.k, args.k2, args.k3)
        print("triple", format_value(law.triple))
        print("sandwich", format_value(law.sandwich))
    elif args.which == "tau-truncated":
        trunc, exact = oracle.tau_cdf_truncated(args.n, args.k, args.K or 1000 * args.k)
        print("truncated", format_value(trunc), float(trunc))
        print("exact", format_value(exact), float(exact))
    return 0


def _report(verdicts: dict, details, check: bool) -> int:
    for name, ok in verdicts.items():
        print(f"{'PASS' if ok else 'FAIL'} {name}")
    for d in details:
        print(" ", d)
    return 2 if check and not all(verdicts.values()) else 0


def _cmd_simulate(args) -> int:
    times = [int(t) for t in args.sample_times.split(",")] if args.sample_times else []
    recs = run_replicas(args.n, args.horizon, args.replicas, args.seed, times)
    first = np.array([r.first_detachment for r in recs if not r.censored], dtype=float)
    out = {
        "n": args.n,
        "horizon": args.horizon,
        "replicas": args.replicas,
        "seed": args.seed,
        "censored_fraction": float(np.mean([r.censored for r in recs])),
        "mean_first_detachment_uncensored": float(first.mean()) if len(first) else None,
        "mean_detachment_state_count": float(np.mean([r.detachment_state_count for r in recs])),
    }
    for t in times:
        samples = [r.sample_at(t) for r in recs]
        out[f"t{t}"] = {name: float(np.mean([getattr(s, name) for s in samples]))
                        for name in ("lonely", "support", "min_bus", "max_bus", "clump", "rc")}
    print(json.dumps(out, indent=2))
    return 0


def _parse_set(items) -> dict:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        key, raw = item.split("=", 1)
        try:
            out[key] = json.loads(raw)
        except json.JSONDecodeError:
            out[key] = raw
    return out


def _cmd_experiment(args) -> int:
    params, output = {}, args.output
    if args.config:
        with open(args.config) as fh:
            cfg = json.load(fh)
        if cfg.get("name", args.name) != args.name:
            raise UsageError(f"config is for {cfg['name']!r}, not {args.name!r}")
        params.update(cfg.get("parameters", {}))
        output = output or cfg.get("output_path")
    params.update(_parse_set(args.set))
    report = run_experiment(ExperimentSpec(args.name, params, output))
    print(report.csv_text(), end="")
    return _report(report.verdicts, [], args.check)


def _cmd_list(args) -> int:
    for name, exp in REGISTRY.items():
        print(f"{name}: {(exp.run.__doc__ or '').strip().splitlines()[0]}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="detachment", description="Exact and simulated laws of the detachment process.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    e = sub.add_parser("exact", help="evaluate a closed form")
    e.add_argument("formula", choices=sorted(FORMULAS))
    for name in ("n", "k", "l", "m", "k2", "k3"):
        e.add_argument(f"--{name}", type=int)
    for name in ("y", "c", "d", "x", "lam"):
        e.add_argument(f"--{name}", type=float)
    e.add_argument("--z", type=_ratio)
    e.add_argument("--kind", default="single", choices=an.FIDI_KINDS)
    e.add_argument("--exact", action="store_true", help="rational arithmetic")
    e.set_defaults(func=_cmd_exact)

    o = sub.add_parser("oracle", help="brute-force enumeration")
    o.add_argument("which", choices=["single", "two-time", "three-time", "tau-truncated", "verify", "dominance"])
    for name in ("n", "k", "l", "k2", "k3", "K"):
        o.add_argument(f"--{name}", type=int)
    o.add_argument("--check", action="store_true")
    o.set_defaults(func=_cmd_oracle)

    s = sub.add_parser("simulate", help="Monte Carlo trajectories")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--horizon", type=int, required=True)
    s.add_argument("--replicas", type=int, required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--sample-times", default="")
    s.set_defaults(func=_cmd_simulate)

    x = sub.add_parser("experiment", help="run a named experiment")
    x.add_argument("name", choices=sorted(REGISTRY))
    x.add_argument("--config")
    x.add_argument("--set", action="append", metavar="KEY=VALUE")
    x.add_argument("--output")
    x.add_argument("--check", action="store_true")
    x.set_defaults(func=_cmd_experiment)

    li = sub.add_parser("list", help="list experiments")
    li.set_defaults(func=_cmd_list)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, ZeroDivisionError) as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
