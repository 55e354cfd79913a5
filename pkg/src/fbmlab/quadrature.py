"""Deterministic evaluation of the four-dimensional moment integrals.

The domain ``{s < t, s2 < t2} in [0, T]^4`` is split by the sign of ``s2 - s``.
The half ``{s < s2}`` is the union of the gap regions T1, T2, T3 of
:mod:`fbmlab.kernels`; the other half is its mirror image under
``(s, t) <-> (s2, t2)``, which swaps ``lambda`` and ``rho``. Integrating out
the base time leaves the weight ``T - a - b - c``, so

    E_{eps,gamma} = sum_i int_{a+b+c<T} (T-a-b-c) [f(eps, gamma) + f(gamma, eps)] da db dc

with ``f(x, y) = (2 pi)^{-d} [((lam+x)(rho+y) - mu^2)^{-d/2} - ((lam+x)(rho+y))^{-d/2}]``.

The simplex ``a + b + c < T`` is mapped onto the unit cube with radial
coordinates ``a = r x``, ``b = r (1-x) y``, ``c = r (1-x)(1-y)``, so every
singular face (a, b or c = 0, and the corner) lies on a cube face. Each cube
coordinate is then softened by a power map of order ``kappa`` that flattens
the integrable power singularities there.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .cubature import adapt
from .errors import ConfigError, DivergenceError, DomainError, RegimeError
from .fbm import CRITICAL_TOL, ModelParams
from .kernels import (REGIONS, mean_local_time, mu_formula, region_kernels,
                      stable_e_difference)

__all__ = [
    "QuadConfig",
    "QuadResult",
    "RateCurve",
    "DivergenceReport",
    "compute_E",
    "compute_delta",
    "compute_second_moment",
    "rate_curve",
    "divergence_probe",
    "mean_divergence_curve",
    "brute_force_E",
    "loglog_slope",
]


@dataclass(frozen=True)
class QuadConfig:
    rel_tol: float = 1e-6
    max_cells: int = 2_000_000
    softening_exponent: float = 3.0
    boundary_margin: float = 0.0
    abs_tol: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.rel_tol < 1.0:
            raise ConfigError(f"rel_tol must lie in (0, 1), got {self.rel_tol}")
        if self.max_cells < 1:
            raise ConfigError(f"max_cells must be >= 1, got {self.max_cells}")
        if self.softening_exponent < 1.0:
            raise ConfigError(f"softening_exponent must be >= 1, got {self.softening_exponent}")
        if self.boundary_margin < 0.0 or self.abs_tol < 0.0:
            raise ConfigError("boundary_margin and abs_tol must be non-negative")


@dataclass
class QuadResult:
    value: float
    abs_error_estimate: float
    cells: int
    converged: bool
    region_breakdown: dict = field(default_factory=dict)
    elapsed_ms: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def _soft(u, kappa):
    """Map ``(0,1) -> (0,1)`` with zeros of order ``kappa`` at both ends.

    Returns ``x``, ``1 - x`` (computed directly) and ``dx/du``.
    """
    p = u**kappa
    q = (1.0 - u) ** kappa
    s = p + q
    jac = kappa * u ** (kappa - 1) * (1.0 - u) ** (kappa - 1) / (s * s)
    return p / s, q / s, jac


def _gaps(P: np.ndarray, T: float, kappa: float):
    u, v, w = P[:, 0], P[:, 1], P[:, 2]
    r = T * u**kappa
    jr = T * kappa * u ** (kappa - 1)
    x, xc, jx = _soft(v, kappa)
    y, yc, jy = _soft(w, kappa)
    a = r * x
    b = r * xc * y
    c = r * xc * yc
    weight = (T - r) * r * r * xc * jr * jx * jy
    return a, b, c, weight


def _make_integrand(kind: str, params: ModelParams, eps: float, gamma: float, cfg: QuadConfig):
    d, H, T = params.d, params.H, params.T
    norm = (2 * math.pi) ** (-d)
    kappa = cfg.softening_exponent
    margin = cfg.boundary_margin * T

    @np.errstate(divide="ignore", invalid="ignore", over="ignore")
    def integrand(region_index: int, P: np.ndarray) -> np.ndarray:
        a, b, c, weight = _gaps(P, T, kappa)
        lam, rho, mu, delta = region_kernels(REGIONS[region_index], a, b, c, H)

        def f(x, y):
            return stable_e_difference(lam, rho, mu, d, x, y, delta)

        if kind == "E":
            val = f(eps, gamma) + f(gamma, eps)
        elif kind == "delta":
            val = 2.0 * (f(eps, eps) - f(eps, 0.0) - f(0.0, eps) + f(0.0, 0.0))
        elif kind == "M2":
            val = 2.0 * (delta + eps * (lam + rho) + eps * eps) ** (-0.5 * d)
        else:
            raise ValueError(kind)
        # cells deep enough in a corner for lam*rho to underflow carry no mass
        out = np.where((lam * rho > 0) & (weight > 0), norm * weight * val, 0.0)
        if margin > 0:
            out = np.where(np.minimum(np.minimum(a, b), c) < margin, 0.0, out)
        return out

    return integrand


def _run(kind: str, params: ModelParams, eps: float, gamma: float, cfg: QuadConfig) -> QuadResult:
    t0 = time.perf_counter()
    res = adapt(_make_integrand(kind, params, eps, gamma, cfg), nregions=len(REGIONS), dim=3,
                rel_tol=cfg.rel_tol, abs_tol=cfg.abs_tol, max_cells=cfg.max_cells)
    return QuadResult(
        value=res.value,
        abs_error_estimate=res.error,
        cells=res.cells,
        converged=res.converged,
        region_breakdown=dict(zip(REGIONS, res.region_values)),
        elapsed_ms=1e3 * (time.perf_counter() - t0),
    )


def compute_E(eps: float, gamma: float, params: ModelParams, cfg: QuadConfig = QuadConfig()) -> QuadResult:
    """``E_{eps,gamma} = Cov(L_eps, L_gamma)``, including the limits ``eps`` or ``gamma = 0``."""
    if eps < 0 or gamma < 0:
        raise DomainError("eps and gamma must be non-negative")
    if eps == 0 and gamma == 0 and not params.centered:
        raise DivergenceError(
            f"E_00 is infinite for dH = {params.dH:g} >= 3/2; see divergence_probe")
    return _run("E", params, float(eps), float(gamma), cfg)


def compute_delta(eps: float, params: ModelParams, cfg: QuadConfig = QuadConfig()) -> QuadResult:
    """``E((L_{eps,c} - L_c)^2) = E_{eps,eps} - 2 E_{eps,0} + E_{00}`` as one integral.

    Combining the four terms under the integral sign avoids the cancellation
    of subtracting three separately computed O(1) numbers.
    """
    if not eps > 0:
        raise DomainError("eps must be positive")
    if not params.centered:
        raise DivergenceError(f"L_c does not exist in L^2 for dH = {params.dH:g} >= 3/2")
    return _run("delta", params, float(eps), float(eps), cfg)


def compute_second_moment(eps: float, params: ModelParams, cfg: QuadConfig = QuadConfig()) -> QuadResult:
    """``E(L_eps^2)`` from its Gaussian integral representation."""
    if not eps > 0:
        raise DomainError("eps must be positive")
    return _run("M2", params, float(eps), float(eps), cfg)


def loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


@dataclass
class RateCurve:
    params: dict
    eps: list
    delta: list
    errors: list
    converged: list
    slope: float
    K_ratios: list
    elapsed_ms: float

    @property
    def positive(self) -> bool:
        return all(v > 0 for v in self.delta)

    @property
    def decreasing(self) -> bool:
        return all(b < a for a, b in zip(self.delta, self.delta[1:]))

    def to_dict(self) -> dict:
        out = asdict(self)
        out["positive"] = self.positive
        out["decreasing"] = self.decreasing
        return out


def rate_curve(params: ModelParams, eps_ladder: Sequence[float] | None = None,
               cfg: QuadConfig = QuadConfig()) -> RateCurve:
    """``Delta(eps) = E((L_{eps,c} - L_c)^2)`` along a decreasing ladder.

    Valid for ``(d+1) H < 3/2``; the boundary ``(d+1) H = 3/2`` (within 1e-12)
    is admitted as well, since ``Delta`` is still finite there and it is the
    most interesting case to measure. ``K_ratios`` holds ``Delta / eps^{1/2}``.
    """
    if (params.d + 1) * params.H > 1.5 + CRITICAL_TOL:
        raise RegimeError(f"rate requires (d+1)H < 3/2, got (d+1)H = {(params.d + 1) * params.H:g}")
    if eps_ladder is None:
        eps_ladder = [2.0**-k for k in range(2, 13)]
    eps_ladder = [float(e) for e in eps_ladder]
    if any(e <= 0 for e in eps_ladder) or any(b >= a for a, b in zip(eps_ladder, eps_ladder[1:])):
        raise DomainError("eps ladder must be positive and strictly decreasing")
    t0 = time.perf_counter()
    results = [compute_delta(e, params, cfg) for e in eps_ladder]
    delta = [r.value for r in results]
    slope = loglog_slope(eps_ladder, delta) if all(v > 0 for v in delta) else float("nan")
    return RateCurve(
        params=params.as_dict(),
        eps=eps_ladder,
        delta=delta,
        errors=[r.abs_error_estimate for r in results],
        converged=[r.converged for r in results],
        slope=slope,
        K_ratios=[v / math.sqrt(e) for v, e in zip(delta, eps_ladder)],
        elapsed_ms=1e3 * (time.perf_counter() - t0),
    )


# ---------------------------------------------------------------------------
# divergence probe
# ---------------------------------------------------------------------------

def _log_nodes(lo, hi, cells: int, q: int):
    """Composite Gauss-Legendre nodes in ``log`` scale on ``[lo, hi]`` (arrays broadcast).

    Returns (points, weights) with the ``dx = x dlogx`` Jacobian folded in.
    """
    g, w = np.polynomial.legendre.leggauss(q)
    s = ((np.arange(cells)[:, None] + 0.5 * (g[None, :] + 1.0)) / cells).ravel()
    ws = (np.repeat(w[None, :], cells, axis=0) * 0.5 / cells).ravel()
    llo, lhi = np.log(lo), np.log(hi)
    span = lhi - llo
    x = np.exp(llo[..., None] + span[..., None] * s)
    return x, x * span[..., None] * ws


@dataclass
class DivergenceReport:
    params: dict
    cutoffs: list
    partial: list
    increments: list
    increment_ratios: list
    verdict: str
    elapsed_ms: float

    def to_dict(self) -> dict:
        return asdict(self)


def truncated_E00(params: ModelParams, cutoff: float, nodes_per_octave: int = 6) -> float:
    """``E_00`` restricted to gaps ``a, b, c >= cutoff`` by log-graded tensor Gauss rules."""
    d, H, T = params.d, params.H, params.T
    if not 0 < cutoff < T / 3:
        raise DomainError(f"cutoff must lie in (0, T/3), got {cutoff}")
    cells = max(1, int(math.ceil(math.log2(T / cutoff))))
    q = nodes_per_octave
    eta = np.float64(cutoff)
    a, wa = _log_nodes(np.array(eta), np.array(T - 2 * eta), cells, q)
    a, wa = a.ravel(), wa.ravel()
    b, wb = _log_nodes(np.full(a.shape, eta), T - a - eta, cells, q)
    A = np.broadcast_to(a[:, None], b.shape)
    WA = np.broadcast_to(wa[:, None], b.shape)
    c, wc = _log_nodes(np.full(b.shape, eta), T - A - b, cells, q)
    A = np.broadcast_to(A[..., None], c.shape)
    B = np.broadcast_to(b[..., None], c.shape)
    W = WA[..., None] * wb[..., None] * wc * (T - A - B - c)
    total = []
    for region in REGIONS:
        lam, rho, mu, delta = region_kernels(region, A, B, c, H)
        val = 2.0 * stable_e_difference(lam, rho, mu, d, delta=delta)
        total.append(math.fsum((W * val).ravel()))
    return math.fsum(total) / (2 * math.pi) ** d


def divergence_probe(params: ModelParams, levels: int = 10, nodes_per_octave: int = 6,
                     margin: float = 0.25) -> DivergenceReport:
    """Truncated ``E_00`` on nested cutoffs ``T 2^{-k}``, ``k = 2..levels+1``.

    The partial integrals increase as the cutoff shrinks. They stabilize when
    the increments shrink geometrically, and the integral is judged divergent
    when the last increments do not shrink (ratio >= 1 - margin).
    """
    t0 = time.perf_counter()
    cutoffs = [params.T * 2.0**-k for k in range(2, levels + 2)]
    partial = [truncated_E00(params, e, nodes_per_octave) for e in cutoffs]
    inc = [b - a for a, b in zip(partial, partial[1:])]
    ratios = [b / a if a > 0 else float("inf") for a, b in zip(inc, inc[1:])]
    tail = ratios[-3:]
    monotone = all(i > 0 for i in inc)
    if monotone and all(r >= 1.0 - margin for r in tail):
        verdict = "diverging"
    elif all(r <= 1.0 - margin for r in tail) and inc[-1] < 0.05 * partial[-1]:
        verdict = "stabilizing"
    else:
        verdict = "inconclusive"
    return DivergenceReport(
        params=params.as_dict(),
        cutoffs=cutoffs,
        partial=partial,
        increments=inc,
        increment_ratios=ratios,
        verdict=verdict,
        elapsed_ms=1e3 * (time.perf_counter() - t0),
    )


def mean_divergence_curve(params: ModelParams, eps_ladder: Sequence[float] | None = None):
    """``E(L_eps)`` along the ladder at ``H = 1/d`` and the fitted slope against ``ln(1/eps)``."""
    if not params.critical:
        raise RegimeError(f"mean-divergence requires H = 1/d, got dH = {params.dH:g}")
    if eps_ladder is None:
        eps_ladder = list(np.logspace(-4, -8, 9))
    eps_ladder = [float(e) for e in eps_ladder]
    means = [mean_local_time(params, e) for e in eps_ladder]
    slope = float(np.polyfit(np.log(1.0 / np.array(eps_ladder)), means, 1)[0])
    return list(zip(eps_ladder, means)), slope


# ---------------------------------------------------------------------------
# brute-force oracle
# ---------------------------------------------------------------------------

def _brute(eps: float, gamma: float, params: ModelParams, m: int) -> float:
    T, H, d = params.T, params.H, params.d
    mid = (np.arange(m) + 0.5) * T / m
    i, j = np.triu_indices(m)  # i <= j: s-cell i, t-cell j
    pair_w = np.where(i == j, 0.5, 1.0) * (T / m) ** 2
    s, t = mid[i], mid[j]
    S2, T2 = s[None, :], t[None, :]
    rho = (T2 - S2) ** (2 * H)
    parts = []
    chunk = max(1, 2_000_000 // s.size)
    for k in range(0, s.size, chunk):
        S, Tt = s[k:k + chunk, None], t[k:k + chunk, None]
        lam = (Tt - S) ** (2 * H)
        mu = mu_formula(S, Tt, S2, T2, H)
        val = stable_e_difference(lam, rho, mu, d, eps, gamma) @ pair_w
        parts.append(math.fsum(val * pair_w[k:k + chunk]))
    return math.fsum(parts) / (2 * math.pi) ** d


def brute_force_E(eps: float, gamma: float, params: ModelParams, m: int = 24):
    """Midpoint rule on an ``m^4`` grid over ``[0, T]^4`` (diagonal cells at weight 1/2).

    Needs ``eps, gamma > 0``. Error estimate: difference to the ``m/2`` grid.
    """
    if not (eps > 0 and gamma > 0):
        raise DomainError("brute force needs eps, gamma > 0")
    fine = _brute(eps, gamma, params, m)
    coarse = _brute(eps, gamma, params, m // 2)
    return fine, abs(fine - coarse)
