"""Adaptive cubature on unions of unit cubes.

Degree-7 Genz-Malik rule with an embedded degree-5 rule for the error estimate.
Cells are halved along the axis with the largest fourth divided difference.
Refinement happens in rounds: each round splits the highest-error cells that
together carry half of the outstanding error, with ties broken by cell id, so
the refinement path is fully deterministic. Final values are summed with
``math.fsum`` and therefore do not depend on cell order.

Several integrands ("regions") can share one adaptive pool; the error budget
is global, so refinement goes where the error is regardless of region.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = ["CubatureResult", "genz_malik_points", "adapt"]


def genz_malik_points(dim: int):
    """Offsets (in units of the half-width) and the weight vectors of the 7/5 rule
    on ``[-1, 1]^dim``, normalized to unit volume."""
    l2 = math.sqrt(9.0 / 70.0)
    l4 = math.sqrt(9.0 / 10.0)
    l5 = math.sqrt(9.0 / 19.0)
    n = dim
    pts = [np.zeros(n)]
    kinds = [1]
    for i in range(n):
        for sgn in (1.0, -1.0):
            e = np.zeros(n)
            e[i] = sgn * l2
            pts.append(e)
            kinds.append(2)
    for i in range(n):
        for sgn in (1.0, -1.0):
            e = np.zeros(n)
            e[i] = sgn * l4
            pts.append(e)
            kinds.append(3)
    for i in range(n):
        for j in range(i + 1, n):
            for si in (1.0, -1.0):
                for sj in (1.0, -1.0):
                    e = np.zeros(n)
                    e[i] = si * l4
                    e[j] = sj * l4
                    pts.append(e)
                    kinds.append(4)
    for k in range(2**n):
        pts.append(np.array([l5 if (k >> i) & 1 else -l5 for i in range(n)]))
        kinds.append(5)
    pts = np.array(pts)
    kinds = np.array(kinds)
    w7 = {
        1: (12824 - 9120 * n + 400 * n * n) / 19683.0,
        2: 980.0 / 6561.0,
        3: (1820 - 400 * n) / 19683.0,
        4: 200.0 / 19683.0,
        5: 6859.0 / 19683.0 / 2**n,
    }
    w5 = {
        1: (729 - 950 * n + 50 * n * n) / 729.0,
        2: 245.0 / 486.0,
        3: (265 - 100 * n) / 1458.0,
        4: 25.0 / 729.0,
        5: 0.0,
    }
    W7 = np.array([w7[k] for k in kinds])
    W5 = np.array([w5[k] for k in kinds])
    # indices for the fourth-difference split heuristic
    plus2 = np.array([1 + 2 * i for i in range(n)])
    minus2 = plus2 + 1
    plus4 = np.array([1 + 2 * n + 2 * i for i in range(n)])
    minus4 = plus4 + 1
    return pts, W7, W5, (plus2, minus2, plus4, minus4)


@dataclass
class CubatureResult:
    value: float
    error: float
    cells: int
    converged: bool
    rounds: int
    region_values: list = field(default_factory=list)
    region_errors: list = field(default_factory=list)


def _initial_cells(dim: int, nregions: int, per_axis: int):
    g = (np.arange(per_axis) + 0.5) / per_axis
    mesh = np.stack(np.meshgrid(*([g] * dim), indexing="ij"), axis=-1).reshape(-1, dim)
    centers = np.tile(mesh, (nregions, 1))
    halfw = np.full_like(centers, 0.5 / per_axis)
    regions = np.repeat(np.arange(nregions), mesh.shape[0])
    return centers, halfw, regions


def adapt(
    integrand: Callable[[int, np.ndarray], np.ndarray],
    nregions: int,
    dim: int = 3,
    rel_tol: float = 1e-6,
    abs_tol: float = 0.0,
    max_cells: int = 2_000_000,
    initial_per_axis: int = 2,
    split_share: float = 0.5,
    max_batch: int = 200_000,
) -> CubatureResult:
    """Integrate ``integrand(region, points)`` over ``[0, 1]^dim`` for each region.

    ``points`` has shape ``(m, dim)`` and the integrand returns ``(m,)`` values.
    Points never lie on cell faces, so integrable singularities on the faces
    of the unit cube are never evaluated.
    """
    offs, W7, W5, (p2, m2, p4, m4) = genz_malik_points(dim)
    ratio = (9.0 / 70.0) / (9.0 / 10.0)
    npts = offs.shape[0]

    def evaluate(centers, halfw, regions):
        vol = np.prod(2.0 * halfw, axis=1)
        vals = np.empty((centers.shape[0], npts))
        for r in range(nregions):
            sel = np.flatnonzero(regions == r)
            if sel.size == 0:
                continue
            P = centers[sel, None, :] + offs[None, :, :] * halfw[sel, None, :]
            vals[sel] = np.asarray(integrand(r, P.reshape(-1, dim)), dtype=float).reshape(sel.size, npts)
        bad = ~np.isfinite(vals)
        if bad.any():
            raise FloatingPointError(f"non-finite integrand value in {bad.any(axis=1).sum()} cells")
        i7 = vol * (vals @ W7)
        i5 = vol * (vals @ W5)
        f0 = vals[:, :1]
        d2 = vals[:, p2] + vals[:, m2] - 2 * f0
        d4 = vals[:, p4] + vals[:, m4] - 2 * f0
        axis = np.argmax(np.abs(d2 - ratio * d4), axis=1)
        return i7, np.abs(i7 - i5), axis

    centers, halfw, regions = _initial_cells(dim, nregions, initial_per_axis)
    value, err, axis = evaluate(centers, halfw, regions)
    ids = np.arange(centers.shape[0])
    next_id = ids.size
    rounds = 0
    converged = False
    while True:
        total = math.fsum(value)
        total_err = float(np.sum(err))
        if total_err <= max(rel_tol * abs(total), abs_tol):
            converged = True
            break
        room = max_cells - ids.size
        if room <= 0:
            break
        order = np.lexsort((ids, -err))
        cum = np.cumsum(err[order])
        k = int(np.searchsorted(cum, split_share * (total_err - max(rel_tol * abs(total), abs_tol)))) + 1
        k = max(1, min(k, room, max_batch, order.size))
        chosen = order[:k]
        keep = np.ones(ids.size, dtype=bool)
        keep[chosen] = False

        c = centers[chosen]
        hw = halfw[chosen].copy()
        ax = axis[chosen]
        rows = np.arange(k)
        hw[rows, ax] *= 0.5
        lo = c.copy()
        hi = c.copy()
        lo[rows, ax] -= hw[rows, ax]
        hi[rows, ax] += hw[rows, ax]
        new_c = np.concatenate([lo, hi])
        new_hw = np.concatenate([hw, hw])
        new_r = np.concatenate([regions[chosen], regions[chosen]])
        new_ids = next_id + np.arange(2 * k)
        next_id += 2 * k
        nv, ne, na = evaluate(new_c, new_hw, new_r)

        centers = np.concatenate([centers[keep], new_c])
        halfw = np.concatenate([halfw[keep], new_hw])
        regions = np.concatenate([regions[keep], new_r])
        value = np.concatenate([value[keep], nv])
        err = np.concatenate([err[keep], ne])
        axis = np.concatenate([axis[keep], na])
        ids = np.concatenate([ids[keep], new_ids])
        rounds += 1

    region_values = [math.fsum(value[regions == r]) for r in range(nregions)]
    region_errors = [float(np.sum(err[regions == r])) for r in range(nregions)]
    return CubatureResult(
        value=math.fsum(value),
        error=float(np.sum(err)),
        cells=int(ids.size),
        converged=converged,
        rounds=rounds,
        region_values=region_values,
        region_errors=region_errors,
    )
