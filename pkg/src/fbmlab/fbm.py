"""Exact simulation of d-dimensional fractional Brownian motion.

Two samplers are provided on a uniform grid ``t_k = kT/n``:

* ``dense``: Cholesky factor of the covariance matrix of ``(B_{t_1}, ..., B_{t_n})``,
  cached per ``(H, T, n)``.
* ``fast``: circulant embedding of the fractional Gaussian noise covariance,
  followed by a cumulative sum.

Both are exact in law. Coordinates are independent copies drawn from the
counter-based streams in :mod:`fbmlab.rng`.
"""

from __future__ import annotations

import csv
import io
import math
import struct
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError, EmbeddingError, FactorizationError
from .rng import standard_normals

__all__ = [
    "ModelParams",
    "TimeGrid",
    "Path",
    "fbm_covariance",
    "increment_covariance",
    "covariance_matrix",
    "generate_path",
    "generate_paths",
    "path_to_csv",
    "path_to_bytes",
    "path_from_bytes",
    "DENSE_CAP",
]

DENSE_CAP = 4096
CRITICAL_TOL = 1e-12

BINARY_MAGIC = b"FBMP"
BINARY_VERSION = 1
_HEADER = struct.Struct("<4sHHIddQ")


@dataclass(frozen=True)
class ModelParams:
    """Dimension ``d``, Hurst exponent ``H`` and horizon ``T``."""

    d: int
    H: float
    T: float = 1.0

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise DomainError(f"d must be a positive integer, got {self.d}")
        if not 0.0 < self.H < 1.0:
            raise DomainError(f"H must lie in (0, 1), got {self.H}")
        if not self.T > 0.0:
            raise DomainError(f"T must be positive, got {self.T}")
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "H", float(self.H))
        object.__setattr__(self, "T", float(self.T))

    @property
    def dH(self) -> float:
        return self.d * self.H

    @property
    def strong(self) -> bool:
        """dH < 1: the uncentered L_eps converges."""
        return self.dH < 1.0 and not self.critical

    @property
    def critical(self) -> bool:
        """dH = 1: logarithmic divergence of the mean."""
        return abs(self.dH - 1.0) <= CRITICAL_TOL

    @property
    def centered(self) -> bool:
        """dH < 3/2: the centered L_eps converges in L^2."""
        return self.dH < 1.5

    @property
    def rate_regime(self) -> bool:
        """(d+1)H < 3/2: the eps^{1/2} rate bound applies."""
        return (self.d + 1) * self.H < 1.5

    def as_dict(self) -> dict:
        return {"d": self.d, "H": self.H, "T": self.T}


@dataclass(frozen=True)
class TimeGrid:
    n: int
    T: float = 1.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise DomainError(f"grid needs n >= 1 steps, got {self.n}")
        if not self.T > 0.0:
            raise DomainError(f"T must be positive, got {self.T}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "T", float(self.T))

    @property
    def step(self) -> float:
        return self.T / self.n

    @property
    def points(self) -> np.ndarray:
        return np.arange(self.n + 1) * self.T / self.n


@dataclass(frozen=True)
class Path:
    """One sampled trajectory; ``values`` has shape ``(n + 1, d)`` and starts at 0."""

    grid: TimeGrid
    values: np.ndarray = field(repr=False)
    seed: int
    path_index: int
    H: float = float("nan")
    method: str = "fast"

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != self.grid.n + 1:
            raise DomainError(f"values must have shape (n+1, d), got {v.shape}")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def d(self) -> int:
        return self.values.shape[1]


def _check_H(H: float) -> None:
    if not 0.0 < H < 1.0:
        raise DomainError(f"H must lie in (0, 1), got {H}")


def fbm_covariance(s, t, H: float):
    """Per-coordinate covariance ``E[B_s B_t] = (t^{2H} + s^{2H} - |t-s|^{2H}) / 2``.

    Accepts scalars or broadcastable arrays.
    """
    _check_H(H)
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(s < 0) or np.any(t < 0):
        raise DomainError("fbm_covariance needs s, t >= 0")
    h2 = 2.0 * H
    out = 0.5 * (t**h2 + s**h2 - np.abs(t - s) ** h2)
    return float(out) if out.ndim == 0 else out


def increment_covariance(s, t, s2, t2, H: float):
    """Covariance of the increments ``B_t - B_s`` and ``B_t2 - B_s2`` (one coordinate)."""
    R = fbm_covariance
    return R(t, t2, H) - R(t, s2, H) - R(s, t2, H) + R(s, s2, H)


def covariance_matrix(grid: TimeGrid, H: float) -> np.ndarray:
    """Covariance of ``(B_{t_1}, ..., B_{t_n})``; ``t_0 = 0`` is left out."""
    t = grid.points[1:]
    return fbm_covariance(t[:, None], t[None, :], H)


@lru_cache(maxsize=16)
def _cholesky(H: float, T: float, n: int) -> np.ndarray:
    C = covariance_matrix(TimeGrid(n, T), H)
    scale = np.trace(C) / n
    jitter = 0.0
    for _ in range(6):
        try:
            L = np.linalg.cholesky(C + jitter * np.eye(n))
        except np.linalg.LinAlgError:
            jitter = 1e-15 * scale if jitter == 0.0 else jitter * 10.0
            if jitter > 1e-10 * scale * (1 + 1e-9):
                break
            continue
        L.flags.writeable = False
        return L
    raise FactorizationError(
        f"covariance of fBm (H={H}, n={n}) not positive definite with jitter <= 1e-10 trace/n"
    )


def fgn_autocovariance(n: int, H: float, step: float = 1.0) -> np.ndarray:
    """Autocovariance ``gamma(0..n)`` of increments of size ``step``."""
    k = np.arange(n + 1, dtype=float)
    h2 = 2.0 * H
    return 0.5 * step**h2 * (np.abs(k + 1) ** h2 - 2.0 * k**h2 + np.abs(k - 1) ** h2)


@lru_cache(maxsize=16)
def _circulant_sqrt(H: float, T: float, n: int) -> np.ndarray:
    gamma = fgn_autocovariance(n, H, T / n)
    row = np.concatenate([gamma, gamma[-2:0:-1]])
    lam = np.fft.fft(row).real
    if lam.min() < -1e-10 * lam.max():
        raise EmbeddingError(f"negative circulant eigenvalue {lam.min():.3e} for H={H}, n={n}")
    root = np.sqrt(np.clip(lam, 0.0, None) / row.size)
    root.flags.writeable = False
    return root


def _validate_method(method: str, n: int, dense_cap: int) -> None:
    if method not in ("dense", "fast"):
        raise DomainError(f"unknown method {method!r}; expected 'dense' or 'fast'")
    if method == "dense" and n > dense_cap:
        raise DomainError(f"dense method is capped at n <= {dense_cap}, got n={n}")


def _sample_values(params: ModelParams, grid: TimeGrid, seed: int, path_index: int,
                   method: str) -> np.ndarray:
    n, d = grid.n, params.d
    out = np.zeros((n + 1, d))
    if method == "dense":
        L = _cholesky(params.H, grid.T, n)
        Z = standard_normals(seed, path_index, d, n)
        out[1:] = (L @ Z.T)
    else:
        root = _circulant_sqrt(params.H, grid.T, n)
        m = root.size
        Z = standard_normals(seed, path_index, d, 2 * m)
        W = root * (Z[:, :m] + 1j * Z[:, m:])
        incr = np.fft.fft(W, axis=1).real[:, :n]
        out[1:] = np.cumsum(incr, axis=1).T
    return out


def generate_path(params: ModelParams, grid: TimeGrid, seed: int, path_index: int = 0,
                  method: str = "fast", dense_cap: int = DENSE_CAP) -> Path:
    """Draw one fBm path on ``grid``.

    The draw is a pure function of ``(params, grid, seed, path_index, method)``.
    """
    if abs(grid.T - params.T) > 1e-12 * params.T:
        raise DomainError(f"grid horizon {grid.T} differs from params.T={params.T}")
    _validate_method(method, grid.n, dense_cap)
    values = _sample_values(params, grid, seed, path_index, method)
    return Path(grid, values, int(seed), int(path_index), params.H, method)


def generate_paths(params: ModelParams, grid: TimeGrid, seed: int,
                   indices: Iterable[int], method: str = "fast",
                   dense_cap: int = DENSE_CAP) -> np.ndarray:
    """Stack of paths, shape ``(len(indices), n + 1, d)``; row ``k`` equals
    ``generate_path(..., path_index=indices[k]).values``."""
    _validate_method(method, grid.n, dense_cap)
    idx = list(indices)
    out = np.empty((len(idx), grid.n + 1, params.d))
    for k, i in enumerate(idx):
        out[k] = _sample_values(params, grid, seed, i, method)
    return out


def path_to_csv(path: Path) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t"] + [f"x_{i + 1}" for i in range(path.d)])
    for t, row in zip(path.grid.points, path.values):
        w.writerow([repr(float(t))] + [repr(float(x)) for x in row])
    return buf.getvalue()


def path_to_bytes(path: Path) -> bytes:
    """Header ``<4sHHIddQ`` (magic, version, d, n, H, T, seed) then column-major float64."""
    head = _HEADER.pack(BINARY_MAGIC, BINARY_VERSION, path.d, path.grid.n,
                        float(path.H), path.grid.T, int(path.seed))
    return head + np.asarray(path.values, dtype="<f8").tobytes(order="F")


def path_from_bytes(blob: bytes, path_index: int = 0) -> Path:
    magic, version, d, n, H, T, seed = _HEADER.unpack_from(blob)
    if magic != BINARY_MAGIC:
        raise DomainError(f"bad magic {magic!r}")
    if version != BINARY_VERSION:
        raise DomainError(f"unsupported version {version}")
    data = np.frombuffer(blob, dtype="<f8", offset=_HEADER.size)
    if data.size != (n + 1) * d:
        raise DomainError(f"payload holds {data.size} values, expected {(n + 1) * d}")
    values = data.reshape((n + 1, d), order="F")
    return Path(TimeGrid(n, T), values, seed, path_index, H)


def empirical_covariance_check(samples: np.ndarray, target: np.ndarray) -> float:
    """Max over entries of ``|cov_hat - target| / se``, with the Gaussian
    standard error ``sqrt((C_ii C_jj + C_ij^2) / N)``."""
    N = samples.shape[0]
    C = samples.T @ samples / N
    diag = np.diag(target)
    se = np.sqrt((np.outer(diag, diag) + target**2) / N)
    se = np.where(se > 0, se, math.inf)
    return float(np.max(np.abs(C - target) / se))
