"""Monte Carlo estimates of local-time moments, Edwards expectations and tails.

Paths are split into fixed chunks of consecutive ``path_index`` values. Chunks
may run on any number of threads (path generation and the numba pair kernel
release the GIL), and the results are written back by index, so every
statistic is a function of ``(spec, seed)`` alone.

Standard errors use batch means: the paths are cut into ``n_batches`` equal
consecutive batches, the statistic is computed per batch, and the error is
the standard deviation of the batch values over ``sqrt(n_batches)``.
"""

from __future__ import annotations

import math
import os
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError, DomainError
from .fbm import ModelParams, TimeGrid, generate_paths
from .kernels import mean_local_time
from .localtime import clamped_exp, local_times

__all__ = [
    "ExperimentSpec",
    "McEstimate",
    "ExperimentReport",
    "local_time_samples",
    "batch_estimate",
    "run_experiment",
    "edwards_curve",
    "epsilon_ladder",
    "tail_probe",
    "jensen_check",
    "default_workers",
]

CENTER_MODES = ("none", "quadrature_mean")
CHUNK = 128


def default_workers() -> int:
    return os.cpu_count() or 1


@dataclass(frozen=True)
class ExperimentSpec:
    params: ModelParams
    eps: float
    grid_n: int = 512
    n_paths: int = 10_000
    g_list: tuple = ()
    center_mode: str = "none"
    seed: int = 0
    n_batches: int = 50
    method: str = "fast"

    def __post_init__(self):
        if not self.eps > 0:
            raise DomainError(f"eps must be positive, got {self.eps}")
        if int(self.grid_n) != self.grid_n or self.grid_n < 2:
            raise DomainError(f"grid_n must be an integer >= 2, got {self.grid_n}")
        if int(self.n_paths) != self.n_paths or self.n_paths < 1:
            raise DomainError(f"n_paths must be a positive integer, got {self.n_paths}")
        g = tuple(float(v) for v in self.g_list)
        if any(not v >= 0 for v in g):
            raise DomainError(f"coupling constants must be non-negative, got {g}")
        if self.center_mode not in CENTER_MODES:
            raise ConfigError(f"center_mode must be one of {CENTER_MODES}, got {self.center_mode!r}")
        if self.seed < 0:
            raise DomainError("seed must be non-negative")
        nb = min(int(self.n_batches), int(self.n_paths))
        if nb < 1:
            raise ConfigError("n_batches must be positive")
        object.__setattr__(self, "g_list", g)
        object.__setattr__(self, "eps", float(self.eps))
        object.__setattr__(self, "n_batches", nb)

    def as_dict(self) -> dict:
        out = asdict(self)
        out["params"] = self.params.as_dict()
        out["g_list"] = list(self.g_list)
        return out


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    n_paths: int
    n_batches: int
    seed: int
    saturated_fraction: float = 0.0

    def interval(self, z: float = 3.0) -> tuple:
        return self.mean - z * self.std_error, self.mean + z * self.std_error

    def overlaps(self, other: "McEstimate", z: float = 3.0) -> bool:
        lo1, hi1 = self.interval(z)
        lo2, hi2 = other.interval(z)
        return lo1 <= hi2 and lo2 <= hi1


@dataclass
class ExperimentReport:
    spec: dict
    statistics: list
    floors: dict
    elapsed_ms: float
    centered_samples: np.ndarray = field(default=None, repr=False)
    samples: np.ndarray = field(default=None, repr=False)

    def stat(self, name: str, g: float | None = None) -> McEstimate:
        for s in self.statistics:
            if s["name"] == name and (g is None or s.get("g") == g):
                return McEstimate(s["mean"], s["std_error"], s["n_paths"], s["n_batches"],
                                  s["seed"], s.get("saturated_fraction", 0.0))
        raise KeyError((name, g))

    def to_dict(self) -> dict:
        return {"spec": self.spec, "statistics": self.statistics, "floors": self.floors,
                "elapsed_ms": self.elapsed_ms}


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def local_time_samples(params: ModelParams, eps: Sequence[float], grid_n: int, n_paths: int,
                       seed: int, workers: int | None = None, method: str = "fast") -> np.ndarray:
    """``L_eps`` for paths ``0 .. n_paths-1``; shape ``(n_paths, len(eps))``."""
    eps = [float(e) for e in np.atleast_1d(eps)]
    grid = TimeGrid(grid_n, params.T)
    out = np.empty((n_paths, len(eps)))

    def work(lo):
        hi = min(lo + CHUNK, n_paths)
        paths = generate_paths(params, grid, seed, range(lo, hi), method=method)
        out[lo:hi] = local_times(paths, eps, params.T)

    starts = range(0, n_paths, CHUNK)
    workers = default_workers() if workers is None else max(1, int(workers))
    if workers == 1:
        for lo in starts:
            work(lo)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(work, starts))
    return out


def batch_estimate(values: np.ndarray, n_batches: int, seed: int, statistic: str = "mean",
                   saturated_fraction: float = 0.0) -> McEstimate:
    """Batch-means estimate of the mean (or variance) of ``values``.

    For ``statistic="mean"`` the point estimate is the full-sample mean; for
    ``"var"`` it is the average of the unbiased per-batch variances.
    """
    v = np.asarray(values, dtype=float)
    n = v.size
    nb = min(n_batches, n)
    batches = np.array_split(v, nb)
    if statistic == "mean":
        per = np.array([math.fsum(b) / b.size for b in batches])
        point = math.fsum(v) / n
    elif statistic == "var":
        if n < 2 * nb:
            raise DomainError("variance needs at least two paths per batch")
        per = np.array([np.var(b, ddof=1) for b in batches])
        point = math.fsum(per) / nb
    else:
        raise DomainError(f"unknown statistic {statistic!r}")
    with np.errstate(over="ignore", invalid="ignore"):
        # clamped Edwards weights near the overflow limit give an infinite spread
        se = float(np.std(per, ddof=1) / math.sqrt(nb)) if nb >= 2 else float("nan")
    return McEstimate(float(point), se, int(n), int(nb), int(seed), float(saturated_fraction))


def _stat_row(name: str, est: McEstimate, **extra) -> dict:
    row = {"name": name}
    row.update(extra)
    row.update({"mean": est.mean, "std_error": est.std_error, "n_paths": est.n_paths,
                "n_batches": est.n_batches, "seed": est.seed,
                "saturated_fraction": est.saturated_fraction})
    return row


def _edwards(x: np.ndarray, g: float, spec: ExperimentSpec) -> McEstimate:
    if g == 0.0:
        return McEstimate(1.0, 0.0, x.size, spec.n_batches, spec.seed, 0.0)
    w, sat = clamped_exp(-g * x)
    frac = float(np.mean(sat))
    if frac > 0:
        warnings.warn(f"Edwards exponent clamped for {frac:.2%} of paths at g={g}", RuntimeWarning)
    return batch_estimate(w, spec.n_batches, spec.seed, "mean", frac)


def _report_from_samples(spec: ExperimentSpec, L: np.ndarray, t0: float) -> ExperimentReport:
    ref = mean_local_time(spec.params, spec.eps)
    centered = L - ref
    use_centered = spec.center_mode == "quadrature_mean"
    x = centered if use_centered else L
    stats = [
        _stat_row("mean_L", batch_estimate(L, spec.n_batches, spec.seed, "mean")),
        _stat_row("var_L", batch_estimate(L, spec.n_batches, spec.seed, "var")),
    ]
    label = "edwards_centered" if use_centered else "edwards"
    for g in spec.g_list:
        stats.append(_stat_row(label, _edwards(x, g, spec), g=g))
    floors = {
        "mean_reference": ref,
        "floor": -ref,
        "min_L": float(L.min()),
        "min_centered": float(centered.min()),
        "floor_holds": bool(centered.min() >= -ref - 1e-12),
    }
    return ExperimentReport(spec.as_dict(), stats, floors, 1e3 * (time.perf_counter() - t0),
                            centered_samples=centered, samples=L)


def run_experiment(spec: ExperimentSpec, workers: int | None = None) -> ExperimentReport:
    """Mean and variance of ``L_eps`` and ``E[exp(-g L)]`` for each ``g``.

    With ``center_mode="quadrature_mean"`` the Edwards weights use
    ``L_eps - E(L_eps)`` with the deterministic quadrature mean.
    """
    t0 = time.perf_counter()
    L = local_time_samples(spec.params, [spec.eps], spec.grid_n, spec.n_paths, spec.seed,
                           workers, spec.method)[:, 0]
    return _report_from_samples(spec, L, t0)


def epsilon_ladder(spec: ExperimentSpec, eps_list: Sequence[float],
                   workers: int | None = None) -> list:
    """One report per ``eps`` in ``eps_list``, all computed from the same paths."""
    t0 = time.perf_counter()
    eps_list = [float(e) for e in eps_list]
    L = local_time_samples(spec.params, eps_list, spec.grid_n, spec.n_paths, spec.seed,
                           workers, spec.method)
    return [
        _report_from_samples(ExperimentSpec(spec.params, e, spec.grid_n, spec.n_paths, spec.g_list,
                                            spec.center_mode, spec.seed, spec.n_batches,
                                            spec.method), L[:, k], t0)
        for k, e in enumerate(eps_list)
    ]


def edwards_curve(spec: ExperimentSpec, workers: int | None = None,
                  report: ExperimentReport | None = None) -> dict:
    """``(g, estimate)`` pairs for ``spec.g_list``.

    The uncentered curve is always reported (it is pathwise non-increasing
    in ``g``); the centered curve is added when ``center_mode`` asks for it.
    """
    if report is None:
        report = run_experiment(spec, workers)
    L = report.samples
    out = {"uncentered": [(g, _edwards(L, g, spec)) for g in spec.g_list]}
    if spec.center_mode == "quadrature_mean":
        out["centered"] = [(g, _edwards(report.centered_samples, g, spec)) for g in spec.g_list]
    return out


def tail_probe(spec: ExperimentSpec, N_list: Sequence[float], workers: int | None = None,
               report: ExperimentReport | None = None) -> dict:
    """Empirical ``P(L_{eps,c} <= -N)`` per ``N`` and the pathwise floor ``-E(L_eps)``."""
    if spec.center_mode != "quadrature_mean":
        raise ConfigError("tail_probe needs center_mode='quadrature_mean'")
    if report is None:
        report = run_experiment(spec, workers)
    c = report.centered_samples
    rows = []
    for N in N_list:
        k = int(np.count_nonzero(c <= -float(N)))
        p = k / c.size
        rows.append({"N": float(N), "count": k, "probability": p,
                     "std_error": math.sqrt(p * (1 - p) / c.size)})
    return {"spec": spec.as_dict(), "tails": rows, "floors": report.floors,
            "elapsed_ms": report.elapsed_ms}


def jensen_check(report: ExperimentReport, z: float = 3.0) -> list:
    """``E[exp(-g L)] >= exp(-g E(L))`` within ``z`` standard errors, per ``g``.

    Uses the uncentered samples and the quadrature mean.
    """
    ref = report.floors["mean_reference"]
    spec = report.spec
    out = []
    for g in spec["g_list"]:
        w, _ = clamped_exp(-g * report.samples)
        est = batch_estimate(w, spec["n_batches"], spec["seed"])
        target = math.exp(-g * ref)
        out.append({"g": g, "estimate": est.mean, "std_error": est.std_error,
                    "jensen_floor": target, "holds": est.mean + z * est.std_error >= target})
    return out
