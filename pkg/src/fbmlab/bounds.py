"""Numerical checks of the kernel inequalities used in the rate proof.

Every inequality is of the form ``F(point) <= K G(point)`` with an unspecified
constant ``K``. The checks sample points, evaluate ``F / G`` and report the
supremum, so ``K`` is an output of the sweep rather than an input. Reports
are plain dicts ``{check, H, d, samples, sup_ratio, arg_sup, seed}`` (plus a
few informational keys) ready for JSON.

Time quadruples are drawn uniformly on ``{0 < s < t < T, 0 < s' < t' < T}``
and quadruples whose smallest gap is below ``1e-6 T`` are rejected. The three
relative positions of two intervals (interleaved, nested, separated) map to
the regions T1, T2, T3 in gap coordinates ``(a, b, c)``.

With ``D = d + 1`` and ``m = (D + 1) / 2``,

    xi_i(x) = (delta_i + x rho_i)^{-m} - ((lambda_i + x) rho_i)^{-m}
    Xi_i(eps) = rho_i int_0^eps xi_i(x) dx
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate

from .errors import DomainError
from .fbm import ModelParams
from .kernels import REGIONS, region_kernels, stable_e_difference
from .rng import stream

__all__ = [
    "MIN_GAP",
    "sample_gaps",
    "power_integral",
    "power_integral_ratio",
    "power_integral_sweep",
    "xi",
    "xi_values",
    "capital_xi",
    "capital_xi_values",
    "xi_bounds_check",
    "capital_xi_bounds_check",
    "kernel_checks",
    "run_all",
]

MIN_GAP = 1e-6

# stream coordinates used for the different samplers (path_index slot = purpose)
_TAU_STREAM = 1
_X_STREAM = 2


def _report(check, params, samples, ratios, points, seed, **extra) -> dict:
    ratios = np.asarray(ratios, dtype=float)
    ok = np.isfinite(ratios)
    if not ok.any():
        sup, arg = float("nan"), []
    else:
        i = int(np.flatnonzero(ok)[np.argmax(ratios[ok])])
        sup, arg = float(ratios[i]), [float(v) for v in np.atleast_1d(points[i])]
    out = {
        "check": check,
        "H": params.H,
        "d": params.d,
        "samples": int(samples),
        "sup_ratio": sup,
        "arg_sup": arg,
        "seed": int(seed),
    }
    out.update(extra)
    return out


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def _classify(q: np.ndarray):
    """Region index (0, 1, 2) and consecutive gaps of the sorted quadruples.

    ``q`` has columns ``(s, t, s', t')``; the pair starting first plays the
    role of ``[s, t]`` (the integrand is symmetric under swapping the pairs).
    """
    swap = q[:, 2] < q[:, 0]
    first = np.where(swap[:, None], q[:, 2:], q[:, :2])
    second = np.where(swap[:, None], q[:, :2], q[:, 2:])
    s, t = first[:, 0], first[:, 1]
    s2, t2 = second[:, 0], second[:, 1]
    region = np.where(t <= s2, 2, np.where(t2 <= t, 1, 0))
    pts = np.sort(q, axis=1)
    return region, np.diff(pts, axis=1)


def sample_gaps(region: str, n: int, params: ModelParams, seed: int,
                min_gap: float = MIN_GAP, condition=None) -> np.ndarray:
    """``(n, 3)`` gap triples of uniform quadruples that land in ``region``.

    ``condition(abc) -> bool mask`` restricts the samples further (rejection).
    """
    if region not in REGIONS:
        raise DomainError(f"unknown region {region!r}")
    want = REGIONS.index(region)
    rng = stream(seed, _TAU_STREAM, want)
    T = params.T
    found = []
    total = 0
    chunk = max(4 * n, 4096)
    for _ in range(10_000):
        q = np.empty((chunk, 4))
        u = rng.random((chunk, 4)) * T
        q[:, :2] = np.sort(u[:, :2], axis=1)
        q[:, 2:] = np.sort(u[:, 2:], axis=1)
        reg, gaps = _classify(q)
        keep = (reg == want) & (gaps.min(axis=1) >= min_gap * T)
        abc = gaps[keep]
        if condition is not None and abc.size:
            abc = abc[condition(abc)]
        found.append(abc)
        total += abc.shape[0]
        if total >= n:
            break
    else:
        raise DomainError(f"rejection sampler found only {total} of {n} points in {region}")
    return np.concatenate(found)[:n]


# ---------------------------------------------------------------------------
# elementary integral bound
# ---------------------------------------------------------------------------

def power_integral(alpha, beta, m, eps):
    """``int_0^eps (alpha + beta x)^{-m} dx`` in closed form."""
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    eps = np.asarray(eps, dtype=float)
    t = beta * eps / alpha
    if m == 1:
        return np.log1p(t) / beta
    return alpha ** (1.0 - m) * np.expm1((1.0 - m) * np.log1p(t)) / (beta * (1.0 - m))


def power_integral_ratio(alpha: float, beta: float, m: float, eps: float) -> float:
    """Integral over the envelope ``eps^{1/2} alpha^{1/2-m} beta^{-1/2}`` (constant 1)."""
    if not (alpha > 0 and beta > 0 and eps > 0):
        raise DomainError("alpha, beta and eps must be positive")
    if not m > 0.5:
        raise DomainError(f"m must exceed 1/2, got {m}")
    bound = math.sqrt(eps) * alpha ** (0.5 - m) / math.sqrt(beta)
    return float(power_integral(alpha, beta, m, eps)) / bound


def power_integral_sweep(ms=(0.6, 1.0, 1.5, 2.0), grid=np.logspace(-6, 6, 25)) -> list:
    """Sup of :func:`power_integral_ratio` over ``alpha, beta, eps`` on ``grid`` per ``m``.

    The ratio depends on ``beta eps / alpha`` only; Cauchy-Schwarz bounds it
    by ``(2m - 1)^{-1/2}``, reported as ``cs_bound``.
    """
    A, B, E = np.meshgrid(grid, grid, grid, indexing="ij")
    A, B, E = A.ravel(), B.ravel(), E.ravel()
    out = []
    for m in ms:
        r = power_integral(A, B, m, E) / (np.sqrt(E) * A ** (0.5 - m) / np.sqrt(B))
        i = int(np.argmax(r))
        out.append({
            "check": "power_integral",
            "m": float(m),
            "samples": int(r.size),
            "sup_ratio": float(r[i]),
            "arg_sup": [float(A[i]), float(B[i]), float(E[i])],
            "cs_bound": 1.0 / math.sqrt(2.0 * m - 1.0),
        })
    return out


# ---------------------------------------------------------------------------
# xi and Xi
# ---------------------------------------------------------------------------

def _exponent(params: ModelParams) -> float:
    return 0.5 * (params.d + 2)


def _region_kernels(region: str, abc, params: ModelParams, eps_shift: float = 0.0):
    if region not in ("T2", "T3"):
        raise DomainError(f"xi is defined on T2 and T3, got {region!r}")
    abc = np.asarray(abc, dtype=float)
    lam, rho, mu, delta = region_kernels(region, abc[..., 0], abc[..., 1], abc[..., 2], params.H)
    if eps_shift:
        # rho -> rho + eps_shift; delta follows
        delta = delta + lam * eps_shift
        rho = rho + eps_shift
    return lam, rho, mu, delta


def xi_values(x, region: str, abc, params: ModelParams, eps_shift: float = 0.0):
    """Vectorized ``xi_i(x)``; ``abc`` has shape ``(..., 3)`` broadcasting with ``x``."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError("x must be non-negative")
    lam, rho, mu, delta = _region_kernels(region, abc, params, eps_shift)
    return stable_e_difference(lam, rho, mu, params.d + 2, x=x, delta=delta)


def xi(x: float, region: str, abc, eps_shift: float = 0.0, params: ModelParams | None = None) -> float:
    """``xi_i(x) = (delta_i + x rho_i)^{-m} - ((lambda_i + x) rho_i)^{-m}``, ``m = (d+2)/2``.

    ``eps_shift`` replaces ``rho`` by ``rho + eps_shift`` (a regularized second
    interval); the default 0 gives the plain function.
    """
    if params is None:
        raise DomainError("params are required")
    return float(xi_values(x, region, abc, params, eps_shift))


def capital_xi(eps: float, region: str, abc, params: ModelParams) -> float:
    """``rho_i int_0^eps xi_i(x) dx`` by adaptive quadrature (relative tolerance 1e-8).

    The integral is taken in ``u = log(delta/rho + x)``, the natural scale of
    the first term, which keeps the integrand smooth for any ``eps``.
    """
    if not eps > 0:
        raise DomainError(f"eps must be positive, got {eps}")
    lam, rho, mu, delta = (float(v) for v in _region_kernels(region, abc, params))
    if mu == 0.0:
        return 0.0
    s0 = delta / rho
    d2 = params.d + 2

    def f(u):
        x = s0 * math.expm1(u - math.log(s0))
        val = stable_e_difference(lam, rho, mu, d2, x=max(x, 0.0), delta=delta)
        return float(val) * (x + s0)

    lo, hi = math.log(s0), math.log(s0 + eps)
    val, _ = integrate.quad(f, lo, hi, epsabs=0.0, epsrel=1e-8, limit=200)
    return rho * val


_GL = np.polynomial.legendre.leggauss(24)


def capital_xi_values(eps, region: str, abc, params: ModelParams, panels: int = 12):
    """Vectorized ``Xi_i(eps)`` with composite Gauss-Legendre in ``log(delta/rho + x)``.

    ``abc`` is ``(n, 3)`` and ``eps`` a 1-d array; returns ``(n, len(eps))``.
    """
    abc = np.atleast_2d(np.asarray(abc, dtype=float))
    eps = np.atleast_1d(np.asarray(eps, dtype=float))
    lam, rho, mu, delta = (v[:, None, None] for v in _region_kernels(region, abc, params))
    s0 = delta / rho
    lo = np.log(s0)
    span = np.log1p(eps[None, :, None] / s0) / panels
    g, w = _GL
    frac = ((np.arange(panels)[:, None] + 0.5 * (g[None, :] + 1.0))).ravel()
    wts = np.repeat(w[None, :], panels, axis=0).ravel() * 0.5
    x = s0 * np.expm1(span * frac)
    vals = stable_e_difference(lam, rho, mu, params.d + 2, x=x, delta=delta) * (x + s0)
    return rho[:, :, 0] * span[:, :, 0] * np.sum(vals * wts, axis=-1)


def xi_bounds_check(params: ModelParams, region: str, n: int = 10_000, seed: int = 0) -> list:
    """Sup ratios of ``xi_i(x)`` against the two envelopes

    * ``mu_i^2 ((lambda_i + x) rho_i)^{-m-1}``   (``xi_mu2``)
    * ``((lambda_i + x) rho_i)^{-m}``           (``xi_plain``)

    over ``n`` random ``(abc, x)`` with ``x = T^{2H} 10^U``, ``U ~ U(-6, 1)``.
    """
    abc = sample_gaps(region, n, params, seed)
    u = stream(seed, _X_STREAM, REGIONS.index(region)).random(n)
    x = params.T ** (2 * params.H) * 10.0 ** (-6.0 + 7.0 * u)
    lam, rho, mu, delta = _region_kernels(region, abc, params)
    m = _exponent(params)
    val = stable_e_difference(lam, rho, mu, params.d + 2, x=x, delta=delta)
    P = (lam + x) * rho
    r_mu2 = val / (mu * mu * P ** (-m - 1.0))
    r_plain = val / P ** (-m)
    pts = np.column_stack([abc, x])
    one_minus_k = float(np.max(mu * mu / (lam * rho)))
    return [
        _report(f"xi_mu2_{region}", params, n, r_mu2, pts, seed, max_corr2=one_minus_k),
        _report(f"xi_plain_{region}", params, n, r_plain, pts, seed, max_corr2=one_minus_k),
    ]


def capital_xi_bounds_check(params: ModelParams, region: str, n: int = 10_000, seed: int = 0,
                            eps_levels=tuple(2.0**-k for k in range(1, 13))) -> list:
    """Sup ratios of ``Xi_i(eps)`` against

    * ``eps^{1/2} rho_i^{1/2} mu_i^2 (lambda_i rho_i)^{-(D+2)/2}``   (``Xi_mu2``)
    * ``eps^{1/2} rho_i^{1/2} (lambda_i rho_i)^{-D/2}``             (``Xi_plain``)

    over ``n`` random ``abc`` and every ``eps`` in ``eps_levels``.
    """
    abc = sample_gaps(region, n, params, seed)
    eps = np.asarray(eps_levels, dtype=float)
    D = params.d + 1
    lam, rho, mu, _ = (v[:, None] for v in _region_kernels(region, abc, params))
    vals = np.empty((n, eps.size))
    for lo in range(0, n, 1000):
        vals[lo:lo + 1000] = capital_xi_values(eps, region, abc[lo:lo + 1000], params)
    env = np.sqrt(eps)[None, :] * np.sqrt(rho)
    r_mu2 = vals / (env * mu * mu * (lam * rho) ** (-(D + 2) / 2.0))
    r_plain = vals / (env * (lam * rho) ** (-D / 2.0))
    pts = np.column_stack([np.repeat(abc, eps.size, axis=0), np.tile(eps, n)])
    return [
        _report(f"Xi_mu2_{region}", params, n, r_mu2.ravel(), pts, seed, eps_levels=eps.tolist()),
        _report(f"Xi_plain_{region}", params, n, r_plain.ravel(), pts, seed, eps_levels=eps.tolist()),
    ]


# ---------------------------------------------------------------------------
# pointwise kernel inequalities
# ---------------------------------------------------------------------------

def kernel_checks(params: ModelParams, n: int = 100_000, seed: int = 0) -> list:
    """Local nondeterminism, Cauchy-Schwarz and the small-gap envelopes.

    ``lnd_Ti``: sup of ``lambda rho / delta`` (finite iff ``delta >= k lambda rho``).
    ``cs_Ti``: sup of ``mu^2 / (lambda rho)`` (must stay below 1).
    ``t1_lower``: sup of ``(abc)^{4H/3} / delta_1``.
    ``t3_small_b``: sup of ``|mu_3| / (b^{2H-2} a c)`` on ``a, c < b/10``.
    ``t2_small_b``: sup of ``|mu_2| / ((a^{2H-1} + c^{2H-1}) b)`` on ``b < min(a, c)/10``.

    ``mu_3`` is negative for ``H < 1/2``, hence the absolute values.
    """
    H = params.H
    out = []
    per_region = max(1, n // 3)
    for region in REGIONS:
        abc = sample_gaps(region, per_region, params, seed)
        lam, rho, mu, delta = region_kernels(region, abc[:, 0], abc[:, 1], abc[:, 2], H)
        out.append(_report(f"lnd_{region}", params, per_region, lam * rho / delta, abc, seed,
                           min_delta=float(delta.min())))
        out.append(_report(f"cs_{region}", params, per_region, mu * mu / (lam * rho), abc, seed))
        if region == "T1":
            a, b, c = abc.T
            out.append(_report("t1_lower", params, per_region, (a * b * c) ** (4 * H / 3) / delta,
                               abc, seed))
    m_small = max(1, n // 100)
    abc = sample_gaps("T3", m_small, params, seed + 1,
                      condition=lambda g: np.maximum(g[:, 0], g[:, 2]) < g[:, 1] / 10)
    a, b, c = abc.T
    mu = region_kernels("T3", a, b, c, H)[2]
    out.append(_report("t3_small_b", params, m_small, np.abs(mu) / (b ** (2 * H - 2) * a * c), abc, seed))
    abc = sample_gaps("T2", m_small, params, seed + 1,
                      condition=lambda g: g[:, 1] < np.minimum(g[:, 0], g[:, 2]) / 10)
    a, b, c = abc.T
    mu = region_kernels("T2", a, b, c, H)[2]
    out.append(_report("t2_small_b", params, m_small,
                       np.abs(mu) / ((a ** (2 * H - 1) + c ** (2 * H - 1)) * b), abc, seed))
    return out


def run_all(params: ModelParams, n: int = 10_000, seed: int = 0) -> list:
    """Every xi and Xi bound check for ``params`` (xi and Xi on T2 and T3)."""
    out = []
    for region in ("T2", "T3"):
        out += xi_bounds_check(params, region, n, seed)
        out += capital_xi_bounds_check(params, region, n, seed)
    return out
