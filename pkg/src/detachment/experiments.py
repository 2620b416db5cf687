"""Named, reproducible experiments with CSV/JSON output.

Each experiment declares its parameters with defaults (the defaults double as
the schema: an override must have the same type), runs a desk-scale
computation, and returns a table plus verdicts.  Verdicts use only the
tolerances declared here.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy import stats

from . import analytics as an
from .simulator import (
    Ensemble,
    RngStream,
    batch_observables,
    ensemble_observables,
    mc_estimate,
    run_replicas,
    sample_occupancy_counts,
)

# Kinds of reference value carried in reports.
REF_PUBLISHED = "published"
REF_TRIVIAL = "trivial"
REF_DERIVED = "derived"


class SchemaError(ValueError):
    pass


@dataclass
class ExperimentSpec:
    name: str
    parameters: dict = field(default_factory=dict)
    output_path: str | None = None


@dataclass
class ExperimentReport:
    spec: ExperimentSpec
    columns: list
    rows: list
    references: list
    verdicts: dict
    wall_time: float = 0.0
    assumptions: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(self.verdicts.values())

    def csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.rows:
            w.writerow([format_value(row[c]) for c in self.columns])
        return buf.getvalue()

    def to_json(self) -> dict:
        return {
            "spec": asdict(self.spec),
            "columns": self.columns,
            "references": [{**r, "value": format_value(r["value"])} for r in self.references],
            "verdicts": self.verdicts,
            "assumptions": self.assumptions,
            "passed": self.passed,
            "wall_time_seconds": self.wall_time,
        }

    def write(self, directory) -> tuple[Path, Path]:
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        csv_path = out / f"{self.spec.name}.csv"
        json_path = out / f"{self.spec.name}.json"
        csv_path.write_text(self.csv_text())
        json_path.write_text(json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n")
        return csv_path, json_path


def format_value(v) -> str:
    if isinstance(v, Fraction):
        return f"{v.numerator}/{v.denominator}"
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def _ref(name, value, kind, note=""):
    return {"name": name, "value": value, "kind": kind, "note": note}


def _decreasing(xs) -> bool:
    return all(b < a for a, b in zip(xs, xs[1:]))


def _increasing(xs) -> bool:
    return all(b > a for a, b in zip(xs, xs[1:]))


# -- experiments ----------------------------------------------------------------


def ie_limit(p):
    """Sup distance between the law of tau/n^2 and IE(1) on an x grid."""
    xs = np.arange(p["x_min"], p["x_max"] + p["x_step"] / 2, p["x_step"])
    rows, sups = [], {}
    for n in p["ns"]:
        err = 0.0
        for x in xs:
            k = math.floor(x * n * n)
            F = math.exp(an.log_tau_cdf(n, k)) if k >= n else 0.0
            err = max(err, abs(F - an.ie_cdf(x)))
        sups[n] = err
        rows.append({"n": n, "grid_points": len(xs), "sup_error": err})
    ns = p["ns"]
    verdicts = {
        f"sup_error_below_{p['tol']}_at_n_{p['tol_n']}": sups.get(p["tol_n"], math.inf) < p["tol"],
        f"sup_error_smaller_at_n_{ns[-1]}_than_{ns[0]}": sups[ns[-1]] < sups[ns[0]],
    }
    refs = [_ref("limit_cdf", "exp(-1/x)", REF_DERIVED)]
    return ["n", "grid_points", "sup_error"], rows, refs, verdicts


def critical_window(p):
    """e(n, floor(k(n, y))) along an n grid against the limit e^{-y}/8."""
    rows, verdicts = [], {}
    for y in p["ys"]:
        errs, last = [], None
        for n in p["ns"]:
            k = math.floor(an.critical_k(n, y))
            e = an.expected_detachment_states(n, k, exact=False)
            lim = an.critical_limit(y)
            errs.append(abs(e - lim))
            last = abs(e - lim) / lim
            rows.append({"y": y, "n": n, "k": k, "expected_states": e, "limit": lim,
                         "abs_error": abs(e - lim), "rel_error": abs(e - lim) / lim})
        verdicts[f"abs_error_decreasing_y_{y:g}"] = _decreasing(errs)
        verdicts[f"within_{p['rel_tol']:g}_of_limit_at_last_n_y_{y:g}"] = last < p["rel_tol"]
    refs = [_ref(f"limit_y_{y:g}", an.critical_limit(y), REF_PUBLISHED, "exp(-y)/8") for y in p["ys"]]
    cols = ["y", "n", "k", "expected_states", "limit", "abs_error", "rel_error"]
    return cols, rows, refs, verdicts


def fidi_convergence(p):
    """cond_detached(n, c n^2, d n^2) against exp(-(d-c)/(2 d^2))."""
    rows, ok = [], True
    for c, d in p["pairs"]:
        lim = an.fidi_limit_value(c, d, kind="cond_detached")
        for n in p["ns"]:
            v = an.cond_detached(n, round(c * n * n), round(d * n * n), exact=False)
            bound = p["error_constant"] / n
            ok &= abs(v - lim) < bound
            rows.append({"c": c, "d": d, "n": n, "value": v, "limit": lim,
                         "abs_error": abs(v - lim), "bound": bound})
    verdicts = {"error_below_constant_over_n": bool(ok)}
    cols = ["c", "d", "n", "value", "limit", "abs_error", "bound"]
    return cols, rows, [], verdicts


def concentration_phase(p):
    """Exact concentration ratio R = Var L / (E L)^2 at k = floor(n/(alpha log n))."""
    rows, by_alpha = [], {}
    for a in p["alphas"]:
        rs = []
        for n in p["ns"]:
            k = math.floor(n / (a * math.log(n)))
            m = an.lonely_moments(n, k, exact=False)
            rs.append(m.concentration_ratio)
            rows.append({"alpha": a, "n": n, "k": k, "mean": m.mean, "variance": m.variance,
                         "ratio": m.concentration_ratio})
        by_alpha[a] = dict(zip(p["ns"], rs))
    n0 = p["check_n"]
    lo, hi = p["alphas"][0], p["alphas"][-1]
    verdicts = {
        f"ratio_below_{p['low_tol']:g}_alpha_{lo:g}": by_alpha[lo][n0] < p["low_tol"],
        f"ratio_decreasing_alpha_{lo:g}": _decreasing(list(by_alpha[lo].values())),
        f"ratio_above_{p['high_tol']:g}_alpha_{hi:g}": by_alpha[hi][n0] > p["high_tol"],
        f"ratio_increasing_alpha_{hi:g}": _increasing(list(by_alpha[hi].values())),
    }
    c = p["sparse_c"]
    k = math.floor(n0 / (c * math.log(n0)))
    mean = an.lonely_moments(n0, k, exact=False).mean
    some = an.prob_some_lonely(n0, k, exact=False)
    bound = n0 ** (-(c - 1) + 0.2)
    verdicts["some_lonely_below_mean_below_power"] = some <= mean * (1 + 1e-12) and mean < bound
    refs = [_ref(f"lonely_mean_at_k_{k}", mean, REF_DERIVED), _ref("prob_some_lonely", some, REF_DERIVED),
            _ref("power_bound", bound, REF_DERIVED)]
    return ["alpha", "n", "k", "mean", "variance", "ratio"], rows, refs, verdicts


def _poisson_tv(counts: np.ndarray, mean: float = 1.0) -> float:
    emp = counts / counts.sum()
    pois = stats.poisson.pmf(np.arange(len(emp)), mean)
    return 0.5 * (np.abs(emp - pois).sum() + stats.poisson.sf(len(emp) - 1, mean))


def poisson_approx(p):
    """TV distance between the lonely count at k = floor(n/log(cn)) and Poisson(1)."""
    rows, tvs = [], []
    for i, n in enumerate(p["ns"]):
        k = math.floor(n / math.log(p["c"] * n))
        hist = np.zeros(n + 1, dtype=np.int64)
        for block in sample_occupancy_counts(n, k, p["replicas"], RngStream(p["seed"], i)):
            hist += np.bincount((block == 1).sum(axis=1), minlength=n + 1)
        top = int(np.flatnonzero(hist).max()) + 1
        tv = _poisson_tv(hist[:max(top, 30)])
        exact = an.lonely_pmf(n, k, exact=False)
        tv_exact = _poisson_tv(np.array(exact[:60]) / math.fsum(exact[:60]) * 1.0)
        tvs.append(tv)
        rows.append({"n": n, "k": k, "replicas": p["replicas"], "tv_mc": tv, "tv_exact_law": tv_exact,
                     "mean_lonely": float((hist * np.arange(n + 1)).sum() / hist.sum())})
    verdicts = {
        f"tv_below_{p['tol']:g}_at_n_{p['ns'][0]}": tvs[0] < p["tol"],
        "tv_decreasing_in_n": _decreasing(tvs),
    }
    return ["n", "k", "replicas", "tv_mc", "tv_exact_law", "mean_lonely"], rows, [], verdicts


def almost_detachment(p):
    """MC mean of L/n and N/n at k = ceil(n^exponent)."""
    rows, ls, ns_ = [], [], []
    ok = True
    for i, n in enumerate(p["ns"]):
        k = math.ceil(n ** p["exponent"])
        obs = ensemble_observables(n, k, p["replicas"], p["seed"] + i)
        lf, nf = obs["lonely"].mean() / n, obs["support"].mean() / n
        floor = 1 - 3 * n ** (-0.4)
        ok &= lf > floor and nf > floor
        ls.append(lf)
        ns_.append(nf)
        rows.append({"n": n, "k": k, "lonely_fraction": lf, "support_fraction": nf,
                     "exact_lonely_fraction": an.lonely_moments(n, k, exact=False).mean / n,
                     "floor": floor})
    verdicts = {"fractions_increasing": _increasing(ls) and _increasing(ns_),
                "fractions_above_floor": bool(ok)}
    cols = ["n", "k", "lonely_fraction", "support_fraction", "exact_lonely_fraction", "floor"]
    return cols, rows, [], verdicts


def zero_percent(p):
    """Fraction of detached states up to k below and above the n^2 scale."""
    rows, ok = [], True
    for n in p["ns"]:
        k = math.ceil(n ** p["exponent"])
        frac = an.expected_detachment_states(n, k, exact=False) / k
        ok &= frac < p["tol"]
        rows.append({"n": n, "k": k, "method": "exact", "fraction": frac, "stderr": 0.0})
    n = p["mc_n"]
    k = math.ceil(p["mc_factor"] * n * n)
    est = mc_estimate(n, k, p["replicas"], lambda r: r.detachment_state_count / k, p["seed"])
    rows.append({"n": n, "k": k, "method": "mc", "fraction": est.mean, "stderr": est.stderr})
    exact_mc = an.expected_detachment_states(n, k, exact=False) / k
    verdicts = {f"exact_fraction_below_{p['tol']:g}": bool(ok),
                f"mc_fraction_above_{p['mc_threshold']:g}": est.mean > p["mc_threshold"]}
    refs = [_ref("exact_fraction_mc_point", exact_mc, REF_DERIVED)]
    return ["n", "k", "method", "fraction", "stderr"], rows, refs, verdicts


def first_detachment_hist(p):
    """Mean, spread and histogram of the first detachment time."""
    rows, verdicts, refs = [], {}, []
    for n, target in zip(p["ns"], p["reference_means"]):
        recs = run_replicas(n, p["horizon"], p["replicas"], p["seed"] + n, stop_at_first_detachment=True)
        vals = np.array([r.first_detachment if not r.censored else p["horizon"] + 1 for r in recs], dtype=float)
        cens = float(np.mean([r.censored for r in recs]))
        q = np.quantile(vals, [0.1, 0.5, 0.9])
        rows.append({"n": n, "replicas": len(vals), "mean": vals.mean(),
                     "stderr": vals.std(ddof=1) / math.sqrt(len(vals)), "q10": q[0], "median": q[1],
                     "q90": q[2], "censored_fraction": cens})
        lo, hi = target * (1 - p["rel_tol"]), target * (1 + p["rel_tol"])
        verdicts[f"mean_in_band_n_{n}"] = lo <= vals.mean() <= hi
        verdicts[f"censoring_below_{p['max_censored']:g}_n_{n}"] = cens < p["max_censored"]
        refs.append(_ref(f"mean_first_detachment_n_{n}", target, REF_PUBLISHED,
                         f"band +-{p['rel_tol']:g} relative"))
    cols = ["n", "replicas", "mean", "stderr", "q10", "median", "q90", "censored_fraction"]
    return cols, rows, refs, verdicts


def _ks_to(sample: np.ndarray, cdf) -> float:
    return float(stats.kstest(sample, cdf).statistic)


def beta_limits(p):
    """KS distance of min_bus/k and max_bus/k to the limit laws."""
    n, k = p["n"], p["k"]
    obs = ensemble_observables(n, k, p["replicas"], p["seed"])
    lo, hi = obs["min_bus"] / k, obs["max_bus"] / k
    # same formulas as minmax_limit_cdf, vectorised for kstest
    ks_min = _ks_to(lo, lambda x: 1 - (1 - np.asarray(x)) ** n)
    ks_max = _ks_to(hi, lambda x: np.asarray(x) ** n)
    lim = an.minmax_limit_moments(n)
    rows = [{"statistic": "min_over_k", "ks": ks_min, "mean": lo.mean(), "limit_mean": lim["mean_min"]},
            {"statistic": "max_over_k", "ks": ks_max, "mean": hi.mean(), "limit_mean": lim["mean_max"]},
            {"statistic": "range_over_k", "ks": float("nan"), "mean": (hi - lo).mean(),
             "limit_mean": lim["mean_range"]}]
    verdicts = {f"ks_min_below_{p['tol']:g}": ks_min < p["tol"], f"ks_max_below_{p['tol']:g}": ks_max < p["tol"]}
    return ["statistic", "ks", "mean", "limit_mean"], rows, [], verdicts


def supermartingale_check(n: int, k_max: int, replicas: int, seed: int):
    """Per-k MC increments of E[clump(k ^ tau_lon)] with paired standard errors.

    tau_lon is the first time k >= ceil(n/2) with a lonely passenger."""
    start = math.ceil(n / 2)
    ens = Ensemble(n, replicas, RngStream(seed))
    ens.advance_to(start)
    obs = ens.observables()
    stopped_value = obs["clump"].astype(float)
    stopped = obs["lonely"] > 0
    out = []
    for k in range(start, k_max):
        ens.step()
        obs = ens.observables()
        new = np.where(stopped, stopped_value, obs["clump"])
        diff = new - stopped_value
        out.append((k, float(diff.mean()), float(diff.std(ddof=1) / math.sqrt(replicas))))
        stopped_value = new
        stopped |= obs["lonely"] > 0
    return out


def clumping_drop(p):
    """Mean relative clumping curve, its tail bound, and the supermartingale check."""
    n = p["n"]
    rows, verdicts = [], {}
    init_rc = math.log(n * n / n)
    for i, m in enumerate(p["k_multiples"]):
        k = max(1, round(m * n))
        obs = ensemble_observables(n, k, p["curve_replicas"], p["seed"] + i)
        rows.append({"kind": "curve", "k": k, "x": float("nan"), "value": obs["rc"].mean(),
                     "stderr": obs["rc"].std(ddof=1) / math.sqrt(len(obs["rc"])), "bound": float("nan")})
    first = ensemble_observables(n, 1, 2, p["seed"])
    verdicts["rc_at_1_equals_log_n"] = bool(np.all(first["rc"] == init_rc))
    k5 = [r for r in rows if r["k"] == 5 * n]
    verdicts[f"rc_at_5n_below_{p['rc_5n_max']:g}"] = bool(k5) and k5[0]["value"] < p["rc_5n_max"]

    c = p["c"]
    k = math.floor(c * n)
    obs = ensemble_observables(n, k, p["tail_replicas"], p["seed"] + 1000)
    ok = True
    for x in p["xs"]:
        freq = float((obs["rc"] > x).mean())
        se = math.sqrt(max(freq * (1 - freq), 1e-300) / len(obs["rc"]))
        bound = (1 + 1 / c) * math.exp(-x)
        ok &= freq <= bound + 3 * se
        rows.append({"kind": "tail", "k": k, "x": x, "value": freq, "stderr": se, "bound": bound})
    verdicts["rc_tail_bound_holds"] = bool(ok)

    sm_n = p["sm_n"]
    ok = True
    for kk, mean, se in supermartingale_check(sm_n, p["sm_k_max"], p["sm_replicas"], p["seed"] + 2000):
        ok &= mean <= 3 * se
        rows.append({"kind": "supermartingale_increment", "k": kk, "x": float("nan"), "value": mean,
                     "stderr": se, "bound": 0.0})
    verdicts["supermartingale_increments_nonpositive"] = bool(ok)
    refs = [_ref("rc_at_time_1", init_rc, REF_TRIVIAL, "log n")]
    return ["kind", "k", "x", "value", "stderr", "bound"], rows, refs, verdicts


def large_deviations(p):
    """Exponential rate of detachment at linear times k = c n."""
    c = p["c"]
    lower_rate = -1 / (2 * c) - 1 / (6 * c * c) - p["slack"]
    upper_rate = -1 / (2 * c) + p["slack"]
    rows, ok = [], True
    for n in p["ns"]:
        k = round(c * n)
        single = an.log_pi_detached(n, k) / n
        union = math.log(sum((an.pi_detached(n, j, exact=True) for j in range(n, k + 1)), Fraction(0))) / n
        ok &= lower_rate <= single <= upper_rate
        rows.append({"n": n, "k": k, "single_term_rate": single, "union_rate": union,
                     "lower_rate": lower_rate, "upper_rate": upper_rate})
    verdicts = {"single_term_rate_in_window": bool(ok)}
    cols = ["n", "k", "single_term_rate", "union_rate", "lower_rate", "upper_rate"]
    return cols, rows, [], verdicts


def tau_tail(p):
    """Tail of the permanent detachment time, closed form checks and the
    truncated-product bracket."""
    rows, verdicts = [], {}
    k = p["k"]
    ok = True
    for n in p["ns"]:
        tail = an.tau_tail(n, k, exact=False)
        scaled = k * tail / an.tau_tail_constant(n)
        ok &= abs(scaled - 1) < p["tail_tol"]
        rows.append({"check": "tail", "n": n, "k": k, "value": tail, "scaled": scaled})
    verdicts[f"scaled_tail_within_{p['tail_tol']:g}"] = bool(ok)
    verdicts["two_passenger_closed_form"] = all(
        an.tau_cdf(2, j, exact=True) == Fraction(j - 1, j + 1) for j in range(2, p["closed_form_k_max"] + 1))
    from .oracle import tau_cdf_truncated

    ok = True
    for n in range(1, p["bracket_n_max"] + 1):
        for j in range(n, n + 3):
            trunc, exact = tau_cdf_truncated(n, j, p["bracket_factor"] * j)
            gap = trunc - exact
            ok &= 0 <= gap < Fraction(1, 100)
            rows.append({"check": "bracket", "n": n, "k": j, "value": float(exact), "scaled": float(gap)})
    verdicts["truncated_product_brackets_within_0.01"] = bool(ok)
    return ["check", "n", "k", "value", "scaled"], rows, [], verdicts


@dataclass(frozen=True)
class Experiment:
    run: object
    defaults: dict
    assumptions: tuple = ()


REGISTRY = {
    "ie_limit": Experiment(ie_limit, {"ns": [200, 500, 1000], "x_min": 0.1, "x_max": 10.0, "x_step": 0.05,
                                      "tol": 0.02, "tol_n": 500, "seed": 0}),
    "critical_window": Experiment(critical_window, {"ns": [1000, 10000, 30000], "ys": [0.0, 1.0],
                                                    "rel_tol": 0.25, "seed": 0}),
    "fidi_convergence": Experiment(fidi_convergence, {"pairs": [[1, 2], [1, 4], [2, 3]], "ns": [200, 500, 1000],
                                                      "error_constant": 5.0, "seed": 0},
                                   ("error constant 5 is a safety factor on an O(1/n) rate",)),
    "concentration_phase": Experiment(concentration_phase, {"alphas": [0.5, 2.0], "ns": [100, 1000, 10000, 100000],
                                                            "check_n": 10000, "low_tol": 0.02, "high_tol": 100.0,
                                                            "sparse_c": 2.0, "seed": 0},
                                      ("k is floor(n / (alpha log n))",)),
    "poisson_approx": Experiment(poisson_approx, {"ns": [10000, 100000], "c": 1.0, "replicas": 100000,
                                                  "tol": 0.05, "seed": 14}),
    "almost_detachment": Experiment(almost_detachment, {"ns": [1000, 10000], "exponent": 1.4, "replicas": 1000,
                                                        "seed": 9}),
    "zero_percent": Experiment(zero_percent, {"ns": [100, 1000, 10000], "exponent": 1.9, "tol": 1e-3,
                                              "mc_n": 30, "mc_factor": 20.0, "replicas": 200,
                                              "mc_threshold": 0.8, "seed": 10}),
    "first_detachment_hist": Experiment(first_detachment_hist, {"ns": [20, 40], "reference_means": [322.0, 1270.0],
                                                                "replicas": 10000, "horizon": 100000,
                                                                "rel_tol": 0.05, "max_censored": 1e-3, "seed": 6},
                                        ("reference means come from simulations of unknown size; band is +-5%",)),
    "beta_limits": Experiment(beta_limits, {"n": 4, "k": 10000, "replicas": 100000, "tol": 0.01, "seed": 13}),
    "clumping_drop": Experiment(clumping_drop, {"n": 100, "k_multiples": [0.01, 0.1, 0.25, 0.5, 1, 2, 3, 5],
                                                "curve_replicas": 2000, "c": 1.0, "xs": [0.5, 1.0, 2.0],
                                                "tail_replicas": 100000, "rc_5n_max": 1.0, "sm_n": 6,
                                                "sm_k_max": 31, "sm_replicas": 100000, "seed": 12}),
    "large_deviations": Experiment(large_deviations, {"c": 2.0, "ns": [40, 80], "slack": 0.05, "seed": 0}),
    "tau_tail": Experiment(tau_tail, {"ns": [2, 5, 10], "k": 10**6, "tail_tol": 0.01, "closed_form_k_max": 1000,
                                      "bracket_n_max": 4, "bracket_factor": 1000, "seed": 0}),
}


def validate(spec: ExperimentSpec) -> dict:
    if spec.name not in REGISTRY:
        raise SchemaError(f"unknown experiment {spec.name!r}; known: {', '.join(REGISTRY)}")
    defaults = REGISTRY[spec.name].defaults
    params = dict(defaults)
    for key, value in spec.parameters.items():
        if key not in defaults:
            raise SchemaError(f"{spec.name}: unknown parameter {key!r}; allowed: {', '.join(defaults)}")
        want = type(defaults[key])
        if want is float and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        if want is int and isinstance(value, float) and value.is_integer():
            value = int(value)
        if not isinstance(value, want) or isinstance(value, bool) != isinstance(defaults[key], bool):
            raise SchemaError(f"{spec.name}: parameter {key!r} must be {want.__name__}, got {value!r}")
        params[key] = value
    if "seed" not in params:
        raise SchemaError("seed missing")
    return params


def run_experiment(spec: ExperimentSpec) -> ExperimentReport:
    params = validate(spec)
    exp = REGISTRY[spec.name]
    t0 = time.perf_counter()
    cols, rows, refs, verdicts = exp.run(params)
    report = ExperimentReport(ExperimentSpec(spec.name, params, spec.output_path), cols, rows, refs,
                              {k: bool(v) for k, v in verdicts.items()}, time.perf_counter() - t0,
                              list(exp.assumptions))
    if spec.output_path:
        report.write(spec.output_path)
    return report
