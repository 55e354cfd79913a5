"""Counter-based random streams.

Every stream is a Philox generator keyed by ``(seed, path_index, coordinate)``,
so a given path coordinate can be regenerated in isolation and the draws do not
depend on the order in which streams are consumed.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def stream_key(seed: int, path_index: int, coordinate: int) -> np.ndarray:
    """128-bit Philox key for one stream."""
    if seed < 0 or path_index < 0 or coordinate < 0:
        raise ValueError("seed, path_index and coordinate must be non-negative")
    ss = np.random.SeedSequence([seed & _MASK64, seed >> 64, path_index, coordinate])
    return ss.generate_state(2, np.uint64)


def stream(seed: int, path_index: int, coordinate: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=stream_key(seed, path_index, coordinate)))


def standard_normals(seed: int, path_index: int, d: int, size: int) -> np.ndarray:
    """``(d, size)`` standard normals, row ``i`` drawn from stream ``(seed, path_index, i)``."""
    out = np.empty((d, size))
    for i in range(d):
        out[i] = stream(seed, path_index, i).standard_normal(size)
    return out
