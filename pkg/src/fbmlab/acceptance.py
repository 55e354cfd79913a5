"""The acceptance suite: twelve quantitative checks with fixed tolerances.

Each check returns a :class:`CriterionResult` carrying the measured values,
the tolerance it was judged against and its runtime. The Monte Carlo runs are
shared between checks through a :class:`SuiteContext`, so the suite pays for
each expensive sample set once per worker count.

``fast`` skips the rate-slope fit, the divergence probes and the Edwards and
determinism runs; ``full`` runs everything.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .bounds import capital_xi_bounds_check, power_integral_sweep, xi_bounds_check
from .errors import ConfigError
from .fbm import ModelParams, increment_covariance
from .kernels import log_coefficient, mean_asymptotic, mean_local_time, mu_formula
from .montecarlo import ExperimentSpec, default_workers, epsilon_ladder, run_experiment
from .quadrature import (QuadConfig, brute_force_E, compute_E, divergence_probe,
                         mean_divergence_curve, rate_curve)
from .rng import stream

__all__ = ["CriterionResult", "SuiteContext", "CRITERIA", "SUITES", "run_criterion", "run_suite",
           "format_table"]

MC_SEED = 20240601
BOUND_SEEDS = (11, 12)


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    measured: dict
    tolerance: str
    runtime_s: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.number:>2} {self.name}: {_short(self.measured)} (tol: {self.tolerance}, {self.runtime_s:.1f} s)"

    def to_dict(self) -> dict:
        return {"number": self.number, "name": self.name, "passed": self.passed,
                "measured": self.measured, "tolerance": self.tolerance, "runtime_s": self.runtime_s}


def _short(measured: dict) -> str:
    parts = []
    for k, v in measured.items():
        if isinstance(v, float):
            parts.append(f"{k}={v:.6g}")
        elif isinstance(v, (bool, int, str)):
            parts.append(f"{k}={v}")
    return ", ".join(parts)


@dataclass
class SuiteContext:
    """Shared Monte Carlo runs keyed by worker count."""

    workers: int | None = None
    n_paths: int = 10_000
    cache: dict = field(default_factory=dict)

    def _resolve(self, workers):
        w = self.workers if workers is None else workers
        return default_workers() if w is None else int(w)

    def canonical(self, workers: int | None = None):
        """(d=2, H=0.4, eps=0.1) run with the Edwards couplings {0, 1, 5, 25}."""
        w = self._resolve(workers)
        key = ("canonical", w)
        if key not in self.cache:
            spec = ExperimentSpec(ModelParams(2, 0.4), 0.1, 512, self.n_paths, (0.0, 1.0, 5.0, 25.0),
                                  "none", MC_SEED)
            self.cache[key] = run_experiment(spec, workers=w)
        return self.cache[key]

    def critical_ladder(self, workers: int | None = None):
        """(d=2, H=0.5) centered Edwards weights at g=0.1 along eps = 0.1, 0.05, 0.025."""
        w = self._resolve(workers)
        key = ("critical", w)
        if key not in self.cache:
            spec = ExperimentSpec(ModelParams(2, 0.5), 0.1, 512, self.n_paths, (0.1,),
                                  "quadrature_mean", MC_SEED)
            self.cache[key] = epsilon_ladder(spec, [0.1, 0.05, 0.025], workers=w)
        return self.cache[key]


# ---------------------------------------------------------------------------
# criteria
# ---------------------------------------------------------------------------

def c1_mu_identity(ctx: SuiteContext) -> CriterionResult:
    t0 = time.perf_counter()
    worst = {}
    for k, H in enumerate((0.2, 1 / 3, 0.45, 0.5)):
        u = stream(1, 0, k).random((10_000, 4))
        a = np.sort(u[:, :2], axis=1)
        b = np.sort(u[:, 2:], axis=1)
        m1 = mu_formula(a[:, 0], a[:, 1], b[:, 0], b[:, 1], H)
        m2 = increment_covariance(a[:, 0], a[:, 1], b[:, 0], b[:, 1], H)
        scale = np.sqrt((a[:, 1] - a[:, 0]) ** (2 * H) * (b[:, 1] - b[:, 0]) ** (2 * H))
        worst[f"H={H:.4g}"] = float(np.max(np.abs(m1 - m2) / scale))
    rt = time.perf_counter() - t0
    err = max(worst.values())
    return CriterionResult(1, "mu identity", err <= 1e-12 and rt < 1.0,
                           {"max_rel_err": err, **worst}, "1e-12 relative to sqrt(lambda rho), < 1 s", rt)


def c2_mean_closed_form(ctx: SuiteContext) -> CriterionResult:
    value = mean_local_time(ModelParams(2, 0.5), 0.1)
    exact = (1.1 * math.log(11.0) - 1.0) / (2 * math.pi)
    return CriterionResult(2, "mean closed form", abs(value - exact) <= 1e-6,
                           {"value": value, "closed_form": exact, "abs_err": abs(value - exact)}, "1e-6")


def c3_log_divergence(ctx: SuiteContext) -> CriterionResult:
    t0 = time.perf_counter()
    ladder = list(np.logspace(-4, -8, 9))
    _, s2 = mean_divergence_curve(ModelParams(2, 0.5), ladder)
    _, s3 = mean_divergence_curve(ModelParams(3, 1 / 3), ladder)
    t2, t3 = 1 / (2 * math.pi), 0.095232
    rt = time.perf_counter() - t0
    r2, r3 = abs(s2 / t2 - 1), abs(s3 / t3 - 1)
    return CriterionResult(3, "log-divergence slope", r2 <= 0.05 and r3 <= 0.05 and rt < 10,
                           {"slope_d2": s2, "target_d2": t2, "slope_d3": s3, "target_d3": t3,
                            "coef_d3": log_coefficient(ModelParams(3, 1 / 3))},
                           "5% relative, < 10 s", rt)


def c4_power_divergence(ctx: SuiteContext) -> CriterionResult:
    t0 = time.perf_counter()
    p = ModelParams(2, 0.6)
    ratio = mean_local_time(p, 1e-8) / mean_asymptotic(p, 1e-8)
    rt = time.perf_counter() - t0
    return CriterionResult(4, "power-divergence ratio", 0.98 <= ratio <= 1.02 and rt < 10,
                           {"ratio": ratio}, "[0.98, 1.02] at eps=1e-8, < 10 s", rt)


def c5_reduction_oracle(ctx: SuiteContext) -> CriterionResult:
    t0 = time.perf_counter()
    measured = {}
    ok = True
    for H in (0.4, 0.5):
        p = ModelParams(2, H)
        q = compute_E(0.05, 0.05, p, QuadConfig())
        bf, bf_err = brute_force_E(0.05, 0.05, p, m=24)
        gap = abs(q.value - bf)
        tol = q.abs_error_estimate + bf_err
        ok &= gap <= tol
        measured[f"reduced_H{H}"] = q.value
        measured[f"brute_H{H}"] = bf
        measured[f"gap_over_tol_H{H}"] = gap / tol
    rt = time.perf_counter() - t0
    return CriterionResult(5, "reduction oracle", bool(ok and rt < 120), measured,
                           "|reduced - brute| <= combined error, < 2 min", rt)


def c6_mc_cross_validation(ctx: SuiteContext) -> CriterionResult:
    t0 = time.perf_counter()
    rep = ctx.canonical()
    p = ModelParams(2, 0.4)
    m, v = rep.stat("mean_L"), rep.stat("var_L")
    mq = mean_local_time(p, 0.1)
    vq = compute_E(0.1, 0.1, p).value
    zm = (m.mean - mq) / m.std_error
    zv = (v.mean - vq) / v.std_error
    rt = time.perf_counter() - t0
    return CriterionResult(6, "MC vs quadrature", abs(zm) <= 3 and abs(zv) <= 3 and rt < 120,
                           {"mc_mean": m.mean, "quad_mean": mq, "z_mean": zm,
                            "mc_var": v.mean, "quad_var": vq, "z_var": zv},
                           "|z| <= 3 for mean and variance, < 2 min", rt)


def c7_rate(ctx: SuiteContext) -> CriterionResult:
    t0 = time.perf_counter()
    rc = rate_curve(ModelParams(2, 0.5), [2.0**-k for k in range(2, 11)])
    tail = rc.K_ratios[-4:]
    kr = max(tail) / min(tail) if min(tail) > 0 else math.inf
    rt = time.perf_counter() - t0
    ok = rc.positive and rc.decreasing and rc.slope >= 0.45 and kr < 3 and rt < 600
    return CriterionResult(7, "rate eps^(1/2)", bool(ok),
                           {"slope": rc.slope, "K_max_over_min": kr, "positive": rc.positive,
                            "decreasing": rc.decreasing, "converged": all(rc.converged),
                            "K_max": max(rc.K_ratios)},
                           "positive, decreasing, slope >= 0.45, K ratio < 3, < 10 min", rt)


def c8_sign_inequality(ctx: SuiteContext) -> CriterionResult:
    t0 = time.perf_counter()
    p = ModelParams(2, 0.5)
    measured, ok = {}, True
    for e in (0.1, 0.01):
        ee = compute_E(e, e, p).value
        e0 = compute_E(e, 0.0, p).value
        ok &= ee <= e0
        measured[f"E_ee({e})"] = ee
        measured[f"E_e0({e})"] = e0
    return CriterionResult(8, "sign inequality", bool(ok), measured, "E_ee <= E_e0",
                           time.perf_counter() - t0)


def c9_finiteness_frontier(ctx: SuiteContext) -> CriterionResult:
    t0 = time.perf_counter()
    div = divergence_probe(ModelParams(3, 0.6))
    fin = divergence_probe(ModelParams(2, 0.5))
    ok = div.verdict == "diverging" and fin.verdict == "stabilizing"
    return CriterionResult(9, "finiteness frontier", ok,
                           {"d3_H0.6": div.verdict, "d2_H0.5": fin.verdict,
                            "last_ratio_d3": div.increment_ratios[-1],
                            "last_ratio_d2": fin.increment_ratios[-1]},
                           "diverging vs stabilizing on the same schedule", time.perf_counter() - t0)


def c10_bound_suites(ctx: SuiteContext) -> CriterionResult:
    t0 = time.perf_counter()
    measured = {}
    ok = True
    sweep = power_integral_sweep()
    a_star = max(r["sup_ratio"] for r in sweep)
    ok &= math.isfinite(a_star) and a_star <= 2.5
    measured["power_integral_A*"] = a_star
    failing = []
    for params in (ModelParams(2, 0.45), ModelParams(3, 0.3)):
        runs = []
        for seed in BOUND_SEEDS:
            reports = []
            for region in ("T2", "T3"):
                reports += xi_bounds_check(params, region, 10_000, seed)
                reports += capital_xi_bounds_check(params, region, 10_000, seed)
            runs.append({r["check"]: r["sup_ratio"] for r in reports})
        for check in runs[0]:
            a, b = runs[0][check], runs[1][check]
            spread = abs(a - b) / max(abs(a), abs(b))
            key = f"{check}_d{params.d}_H{params.H}"
            measured[key] = spread
            good = math.isfinite(a) and math.isfinite(b) and spread <= 0.10
            ok &= good
            if not good:
                failing.append(key)
    rt = time.perf_counter() - t0
    measured["failing"] = ",".join(failing) if failing else "none"
    return CriterionResult(10, "kernel bounds", bool(ok and rt < 60), measured,
                           "A* <= 2.5; sup ratios finite, seed spread <= 10%, < 1 min", rt)


def c11_edwards(ctx: SuiteContext) -> CriterionResult:
    t0 = time.perf_counter()
    rep = ctx.canonical()
    g_vals = [rep.stat("edwards", g).mean for g in (0.0, 1.0, 5.0, 25.0)]
    decreasing = all(b < a for a, b in zip(g_vals, g_vals[1:]))
    finite = all(math.isfinite(v) for v in g_vals)
    ladder = ctx.critical_ladder()
    ests = [r.stat("edwards_centered", 0.1) for r in ladder]
    stable = all(x.overlaps(y) for i, x in enumerate(ests) for y in ests[i + 1:])
    measured = {f"E_exp_g{g:g}": v for g, v in zip((0, 1, 5, 25), g_vals)}
    measured.update({f"centered_eps{r.spec['eps']:g}": e.mean for r, e in zip(ladder, ests)})
    measured.update({"decreasing": decreasing, "stable": stable})
    return CriterionResult(11, "Edwards integrability", bool(decreasing and finite and stable),
                           measured, "finite, decreasing in g; 3-SE overlap along eps",
                           time.perf_counter() - t0)


def _strip(report) -> dict:
    d = report.to_dict()
    d.pop("elapsed_ms", None)
    return d


def c12_determinism(ctx: SuiteContext) -> CriterionResult:
    t0 = time.perf_counter()
    same_6 = _strip(ctx.canonical(1)) == _strip(ctx.canonical(8))
    same_11 = [_strip(r) for r in ctx.critical_ladder(1)] == [_strip(r) for r in ctx.critical_ladder(8)]
    return CriterionResult(12, "determinism", bool(same_6 and same_11),
                           {"criterion6_identical": same_6, "criterion11_identical": same_11},
                           "bit-identical at 1 and 8 workers", time.perf_counter() - t0)


CRITERIA: dict[int, Callable[[SuiteContext], CriterionResult]] = {
    1: c1_mu_identity,
    2: c2_mean_closed_form,
    3: c3_log_divergence,
    4: c4_power_divergence,
    5: c5_reduction_oracle,
    6: c6_mc_cross_validation,
    7: c7_rate,
    8: c8_sign_inequality,
    9: c9_finiteness_frontier,
    10: c10_bound_suites,
    11: c11_edwards,
    12: c12_determinism,
}

SUITES = {
    "fast": (1, 2, 3, 4, 5, 6, 8, 10),
    "full": tuple(CRITERIA),
}


def run_criterion(number: int, ctx: SuiteContext | None = None) -> CriterionResult:
    ctx = ctx or SuiteContext()
    t0 = time.perf_counter()
    res = CRITERIA[number](ctx)
    res.runtime_s = time.perf_counter() - t0
    return res


def run_suite(suite: str = "fast", workers: int | None = None, progress=None) -> list:
    if suite not in SUITES:
        raise ConfigError(f"unknown suite {suite!r}; expected one of {sorted(SUITES)}")
    ctx = SuiteContext(workers=workers)
    out = []
    for k in SUITES[suite]:
        res = run_criterion(k, ctx)
        if progress is not None:
            progress(res)
        out.append(res)
    return out


def format_table(results: list) -> str:
    return "\n".join(r.line() for r in results)
