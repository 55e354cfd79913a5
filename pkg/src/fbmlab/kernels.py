"""Closed-form scalar kernels of the moment integrals.

For a time quadruple ``tau = (s, t, s2, t2)`` with ``s < t`` and ``s2 < t2``:

    lambda = (t - s)^{2H}          variance of B_t - B_s (per coordinate)
    rho    = (t2 - s2)^{2H}        variance of B_t2 - B_s2
    mu     = (|s - t2|^{2H} + |s2 - t|^{2H} - |t - t2|^{2H} - |s - s2|^{2H}) / 2
    delta  = lambda * rho - mu^2

The ordered part ``{s < s2}`` of the domain splits into three regions, each
parametrized by gaps ``(a, b, c)`` above a base time ``s``:

    T1  s < s2 < t < t2      a = s2 - s, b = t - s2, c = t2 - t
    T2  s2 < s < t < t2      a = s - s2, b = t - s,  c = t2 - t   (nested)
    T3  s < t < s2 < t2      a = t - s,  b = s2 - t, c = t2 - s2

For T2 the inner interval is ``(s, t)``, so ``lambda_2 = b^{2H}`` and
``rho_2 = (a+b+c)^{2H}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, special

from .errors import DomainError, RegimeError, SingularityError
from .fbm import ModelParams, increment_covariance

__all__ = [
    "REGIONS",
    "TimeQuad",
    "KernelValues",
    "kernel_values",
    "subregion_map",
    "region_kernels",
    "e_integrand",
    "second_moment_integrand",
    "stable_e_difference",
    "mean_local_time",
    "mean_coefficient",
    "mean_asymptotic",
    "log_coefficient",
]

REGIONS = ("T1", "T2", "T3")


@dataclass(frozen=True)
class TimeQuad:
    s: float
    t: float
    s2: float
    t2: float
    subregion: str = "none"
    abc: tuple | None = None

    def __post_init__(self):
        if not (self.s < self.t and self.s2 < self.t2):
            raise DomainError(f"need s < t and s2 < t2, got {self.as_tuple()}")
        if min(self.s, self.s2) < 0:
            raise DomainError("times must be non-negative")
        if self.subregion not in ("none",) + REGIONS:
            raise DomainError(f"unknown subregion {self.subregion!r}")

    def as_tuple(self) -> tuple:
        return (self.s, self.t, self.s2, self.t2)


@dataclass(frozen=True)
class KernelValues:
    lam: float
    rho: float
    mu: float
    delta: float


def mu_formula(s, t, s2, t2, H):
    h2 = 2.0 * H
    return 0.5 * (np.abs(s - t2) ** h2 + np.abs(s2 - t) ** h2
                  - np.abs(t - t2) ** h2 - np.abs(s - s2) ** h2)


def kernel_values(tau: TimeQuad, H: float) -> KernelValues:
    if not 0.0 < H < 1.0:
        raise DomainError(f"H must lie in (0, 1), got {H}")
    s, t, s2, t2 = tau.as_tuple()
    if t - s <= 0 or t2 - s2 <= 0:
        raise DomainError("degenerate interval")
    h2 = 2.0 * H
    lam = (t - s) ** h2
    rho = (t2 - s2) ** h2
    mu = float(mu_formula(s, t, s2, t2, H))
    return KernelValues(lam, rho, mu, lam * rho - mu * mu)


def subregion_map(abc, region: str, s_base: float = 0.0, T: float = 1.0) -> TimeQuad:
    """Time quadruple of the gaps ``abc`` in ``region`` above base time ``s_base``."""
    a, b, c = (float(v) for v in abc)
    if min(a, b, c) <= 0:
        raise DomainError("gaps a, b, c must be positive")
    if s_base < 0 or s_base + a + b + c >= T:
        raise DomainError(f"s_base + a + b + c = {s_base + a + b + c} must be < T = {T}")
    s = s_base
    if region == "T1":
        quad = (s, s + a + b, s + a, s + a + b + c)
    elif region == "T2":
        quad = (s + a, s + a + b, s, s + a + b + c)
    elif region == "T3":
        quad = (s, s + a, s + a + b, s + a + b + c)
    else:
        raise DomainError(f"unknown region {region!r}")
    return TimeQuad(*quad, subregion=region, abc=(a, b, c))


def _power_step(x, h, p):
    """``(x + h)^p - x^p`` without cancellation for ``h << x``."""
    x = np.asarray(x, dtype=float)
    if p == 1.0:
        return np.broadcast_to(np.asarray(h, dtype=float), np.broadcast(x, h).shape).copy()
    with np.errstate(divide="ignore", invalid="ignore"):
        out = x**p * np.expm1(p * np.log1p(h / x))
    return np.where(x > 0, out, np.asarray(h, dtype=float) ** p)


def _adjacent(p, q, h2):
    """Covariance of adjacent increments of lengths ``p`` and ``q`` (symmetric)."""
    lo = np.minimum(p, q)
    return 0.5 * (_power_step(np.maximum(p, q), lo, h2) - lo**h2)


def _separated(a, b, c, h2):
    """Covariance of increments of lengths ``a`` and ``c`` separated by a gap ``b``.

    A mixed second difference of ``x^{2H}``; it is formed as a difference of
    first differences in the smaller of ``a, c``, shifted by the larger one,
    which keeps the relative error at O(eps_mach * b / max(a, c)).
    """
    lo = np.minimum(a, c)
    hi = np.maximum(a, c)
    return 0.5 * (_power_step(b + hi, lo, h2) - _power_step(b, lo, h2))


def region_kernels(region: str, a, b, c, H: float):
    """Vectorized ``(lambda, rho, mu, delta)`` in gap coordinates.

    ``delta`` is evaluated as the Gram determinant ``lambda Var(Z) - Cov(X, Z)^2``
    with ``X`` the first increment and ``Z = Y - X``. In T1 and T2 the two
    intervals coincide as ``a, c -> 0``, where ``lambda rho - mu^2`` cancels
    catastrophically but this form does not.
    """
    h2 = 2.0 * H
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    if region == "T1":
        lam = (a + b) ** h2
        rho = (b + c) ** h2
        mu = 0.5 * ((a + b + c) ** h2 + b**h2 - c**h2 - a**h2)
        var_z = a**h2 + c**h2 - 2.0 * _separated(a, b, c, h2)
        cov_xz = _adjacent(a + b, c, h2) - 0.5 * (_power_step(b, a, h2) + a**h2)
        delta = lam * var_z - cov_xz**2
    elif region == "T2":
        lam = b**h2
        rho = (a + b + c) ** h2
        mu = 0.5 * (_power_step(c, b, h2) + _power_step(a, b, h2))
        var_z = a**h2 + c**h2 + 2.0 * _separated(a, b, c, h2)
        cov_xz = _adjacent(a, b, h2) + _adjacent(b, c, h2)
        delta = lam * var_z - cov_xz**2
    elif region == "T3":
        lam = a**h2
        rho = c**h2
        mu = _separated(a, b, c, h2)
        delta = lam * rho - mu * mu
    else:
        raise DomainError(f"unknown region {region!r}")
    return lam, rho, mu, delta


def stable_e_difference(lam, rho, mu, d: int, x=0.0, y=0.0, delta=None):
    """``((lam+x)(rho+y) - mu^2)^{-d/2} - ((lam+x)(rho+y))^{-d/2}`` without cancellation.

    Pass ``delta = lam rho - mu^2`` when it is known more accurately than the
    difference itself.
    """
    P = (lam + x) * (rho + y)
    q = mu * mu / P
    if delta is None:
        log_ratio = np.log1p(-q)
    else:
        dprime = delta + lam * y + x * rho + x * y
        with np.errstate(divide="ignore", invalid="ignore"):
            log_ratio = np.where(q < 0.5, np.log1p(-q), np.log(dprime / P))
    return P ** (-0.5 * d) * np.expm1(-0.5 * d * log_ratio)


def e_integrand(tau: TimeQuad, eps: float, gamma: float, params: ModelParams) -> float:
    """Integrand of the covariance integral ``E_{eps,gamma}`` at ``tau``."""
    if eps < 0 or gamma < 0:
        raise DomainError("eps and gamma must be non-negative")
    k = kernel_values(tau, params.H)
    P = (k.lam + eps) * (k.rho + gamma)
    if P - k.mu**2 <= 0:
        raise SingularityError(f"(lam+eps)(rho+gamma) - mu^2 = {P - k.mu ** 2} <= 0 at {tau}")
    d = params.d
    return float(stable_e_difference(k.lam, k.rho, k.mu, d, eps, gamma)) / (2 * math.pi) ** d


def second_moment_integrand(tau: TimeQuad, eps: float, params: ModelParams) -> float:
    """Integrand of ``E(L_eps^2)`` at ``tau``."""
    if eps < 0:
        raise DomainError("eps must be non-negative")
    k = kernel_values(tau, params.H)
    det = (k.lam + eps) * (k.rho + eps) - k.mu**2
    if det <= 0:
        raise SingularityError(f"determinant {det} <= 0 at {tau}")
    return det ** (-params.d / 2) / (2 * math.pi) ** params.d


def _mean_integral(d: int, H: float, T: float, eps: float) -> float:
    f = lambda u: (T - u) * (u ** (2 * H) + eps) ** (-d / 2)
    scale = eps ** (1.0 / (2 * H))
    cuts = [0.0]
    x = scale
    while x < T:
        cuts.append(x)
        x *= 8.0
    cuts.append(T)
    parts = [integrate.quad(f, lo, hi, epsabs=0.0, epsrel=1e-13, limit=200)[0]
             for lo, hi in zip(cuts[:-1], cuts[1:])]
    return math.fsum(parts)


def mean_local_time(params: ModelParams, eps: float) -> float:
    """``E(L_eps) = (2 pi)^{-d/2} int_0^T (T - u) (u^{2H} + eps)^{-d/2} du``."""
    if not eps > 0:
        raise DomainError(f"eps must be positive, got {eps}")
    d, H, T = params.d, params.H, params.T
    return _mean_integral(d, H, T, eps) / (2 * math.pi) ** (d / 2)


@lru_cache(maxsize=None)
def mean_coefficient(d: int, H: float) -> float:
    """``C_{H,d} = (2 pi)^{-d/2} int_0^inf (1 + v^{2H})^{-d/2} dv`` (needs dH > 1)."""
    if not d * H > 1:
        raise RegimeError(f"C_(H,d) is finite only for dH > 1, got dH={d * H}")
    f = lambda v: (1.0 + v ** (2 * H)) ** (-d / 2)
    head = integrate.quad(f, 0.0, 1.0, epsabs=0.0, epsrel=1e-13)[0]
    # tail: v = w^{-1/(dH-1)} turns the v^{-dH} decay into a bounded integrand on (0, 1]
    p = 1.0 / (d * H - 1.0)
    g = lambda w: f(w ** -p) * p * w ** (-p - 1) if w > 0 else 0.0
    tail = integrate.quad(g, 0.0, 1.0, epsabs=0.0, epsrel=1e-13, limit=200)[0]
    return (head + tail) / (2 * math.pi) ** (d / 2)


def log_coefficient(params: ModelParams) -> float:
    """Slope of ``E(L_eps)`` against ``ln(1/eps)`` at ``H = 1/d``: ``T / (2H (2 pi)^{d/2})``."""
    return params.T / (2 * params.H * (2 * math.pi) ** (params.d / 2))


def mean_asymptotic(params: ModelParams, eps: float) -> float:
    """Leading small-eps term of ``E(L_eps)``.

    Power law ``T C_{H,d} eps^{-d/2 + 1/(2H)}`` for ``1/d < H < 3/(2d)``;
    ``T / (2H (2 pi)^{d/2}) ln(1/eps)`` for ``H = 1/d``.
    """
    if not eps > 0:
        raise DomainError(f"eps must be positive, got {eps}")
    d, H = params.d, params.H
    if params.critical:
        return log_coefficient(params) * math.log(1.0 / eps)
    if 1.0 < d * H < 1.5:
        return params.T * mean_coefficient(d, H) * eps ** (-d / 2 + 1 / (2 * H))
    raise RegimeError(f"no divergence asymptotics for dH={d * H}; need H = 1/d or 1/d < H < 3/(2d)")


def mean_coefficient_beta(d: int, H: float) -> float:
    """Beta-function form of :func:`mean_coefficient` (independent check)."""
    p, q = 2 * H, d / 2
    return special.beta(1 / p, q - 1 / p) / p / (2 * math.pi) ** (d / 2)


def mu_from_covariance(tau: TimeQuad, H: float) -> float:
    return float(increment_covariance(tau.s, tau.t, tau.s2, tau.t2, H))
