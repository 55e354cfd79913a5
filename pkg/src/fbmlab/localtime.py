"""Pathwise self-intersection local time and Edwards weights.

For a path sampled at ``t_k = kh`` the smoothed local time
``L_eps = int_0^T dt int_0^t ds p_eps(B_t - B_s)`` is approximated by

    h^2 * ( sum_{0 <= j < i <= n-1} p_eps(B_i - B_j) + (n / 2) p_eps(0) )

i.e. the off-diagonal cells of the lower triangle plus the diagonal cells,
which are only half inside the triangle, at weight 1/2. This integrates
constants exactly. The pair sum is Kahan-compensated and runs sequentially in
a fixed order, so it does not depend on how paths are scheduled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numba as nb
import numpy as np

from .errors import DomainError
from .fbm import Path

__all__ = [
    "LocalTimeEstimate",
    "EdwardsWeight",
    "heat_kernel",
    "local_time_approx",
    "local_times",
    "center",
    "edwards_weight",
    "EXPONENT_CLAMP",
]

EXPONENT_CLAMP = 700.0


@dataclass(frozen=True)
class LocalTimeEstimate:
    epsilon: float
    value: float
    centered: float
    mean_reference: float
    discretization_n: int


@dataclass(frozen=True)
class EdwardsWeight:
    g: float
    weight: float
    centered_flag: bool
    saturated: bool = False


def heat_kernel(x, epsilon: float, d: int | None = None) -> float:
    """Gaussian density ``(2 pi eps)^{-d/2} exp(-|x|^2 / (2 eps))``."""
    if not epsilon > 0:
        raise DomainError(f"epsilon must be positive, got {epsilon}")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if d is None:
        d = x.shape[-1]
    elif x.shape[-1] != d:
        raise DomainError(f"x has dimension {x.shape[-1]}, kernel dimension is {d}")
    r2 = float(np.dot(x, x))
    return (2.0 * math.pi * epsilon) ** (-d / 2.0) * math.exp(-r2 / (2.0 * epsilon))


@nb.njit(cache=True, nogil=True)
def _pair_sums(X, inv2eps):
    """Kahan sums of ``exp(-|X_i - X_j|^2 inv2eps[k])`` over ``j < i < len(X)``."""
    m, d = X.shape
    K = inv2eps.shape[0]
    s = np.zeros(K)
    comp = np.zeros(K)
    for i in range(1, m):
        for j in range(i):
            r2 = 0.0
            for c in range(d):
                diff = X[i, c] - X[j, c]
                r2 += diff * diff
            for k in range(K):
                y = math.exp(-r2 * inv2eps[k]) - comp[k]
                t = s[k] + y
                comp[k] = (t - s[k]) - y
                s[k] = t
    return s


@nb.njit(cache=True, nogil=True)
def _batch_pair_sums(paths, inv2eps):
    out = np.empty((paths.shape[0], inv2eps.shape[0]))
    for p in range(paths.shape[0]):
        out[p] = _pair_sums(paths[p], inv2eps)
    return out


def _assemble(pair_sums: np.ndarray, eps: np.ndarray, n: int, T: float, d: int) -> np.ndarray:
    h = T / n
    norm = (2.0 * np.pi * eps) ** (-d / 2.0)
    return h * h * norm * (pair_sums + 0.5 * n)


def local_times(values: np.ndarray, eps: Sequence[float], T: float) -> np.ndarray:
    """Discrete ``L_eps`` for a stack of paths.

    ``values`` has shape ``(N, n+1, d)`` (or ``(n+1, d)``); returns ``(N, len(eps))``.
    """
    eps = np.atleast_1d(np.asarray(eps, dtype=float))
    if np.any(eps <= 0):
        raise DomainError("epsilon must be positive")
    v = np.asarray(values, dtype=float)
    if v.ndim == 2:
        v = v[None]
    n = v.shape[1] - 1
    if n < 2:
        raise DomainError(f"local time needs n >= 2 steps, got {n}")
    sums = _batch_pair_sums(np.ascontiguousarray(v[:, :n, :]), 1.0 / (2.0 * eps))
    return _assemble(sums, eps[None, :], n, T, v.shape[2])


def local_time_approx(path: Path, epsilon: float, d: int | None = None) -> LocalTimeEstimate:
    """Riemann-sum estimate of ``L_eps`` for one path (``mean_reference`` = 0)."""
    if d is not None and d != path.d:
        raise DomainError(f"path has dimension {path.d}, kernel dimension is {d}")
    if not epsilon > 0:
        raise DomainError(f"epsilon must be positive, got {epsilon}")
    value = float(local_times(path.values, [epsilon], path.grid.T)[0, 0])
    return LocalTimeEstimate(float(epsilon), value, value, 0.0, path.grid.n)


def center(estimate: LocalTimeEstimate, mean: float) -> LocalTimeEstimate:
    return replace(estimate, centered=estimate.value - mean, mean_reference=float(mean))


def clamped_exp(exponent):
    """``exp`` with the exponent clipped to ``[-700, 700]``; returns (value, saturated)."""
    x = np.asarray(exponent, dtype=float)
    sat = np.abs(x) > EXPONENT_CLAMP
    return np.exp(np.clip(x, -EXPONENT_CLAMP, EXPONENT_CLAMP)), sat


def edwards_weight(estimate: LocalTimeEstimate, g: float, use_centered: bool = False) -> EdwardsWeight:
    """``exp(-g L)`` with ``L`` the raw or centered estimate."""
    if not g >= 0:
        raise DomainError(f"coupling g must be non-negative, got {g}")
    x = estimate.centered if use_centered else estimate.value
    w, sat = clamped_exp(-g * x)
    return EdwardsWeight(float(g), float(w), bool(use_centered), bool(sat))
