"""Balanced match sampling from a dense warp.

Downstream pose solvers want a sparse, well-spread set of correspondences,
but certainty-weighted sampling piles matches onto confidently matched
regions. Reweighting each candidate by the reciprocal of a kernel density
estimate over match coordinates evens the draw out: candidates in crowded
parts of match space are discounted, under-represented ones boosted.

Candidates are the warp cells with positive certainty and an in-extent
target; the KDE runs over their joint 4D coordinates (source, target) by
default, or source-only 2D coordinates with ``joint_coords=False``.
"""

from __future__ import annotations

import numpy as np

from .grids import CorrespondenceSet, WarpField, in_extent

WEIGHT_FLOOR = 1e-12


def kde_density(points: np.ndarray, h: float) -> np.ndarray:
    """Gaussian-kernel density at each point, self-inclusive.

    The density is ``sum_j exp(-||p_i - p_j||^2 / (2 h^2)) / (2 pi h^2)^(d/2)``
    over all points, so an isolated point has density ``(2 pi h^2)^(-d/2)``
    and duplicated points scale it up by their multiplicity.
    """
    if h <= 0:
        raise ValueError("bandwidth must be positive")
    points = np.atleast_2d(np.asarray(points, dtype=float))
    m, d = points.shape
    if m < 1:
        raise ValueError("need at least one point")
    norm = (2.0 * np.pi * h * h) ** (d / 2.0)
    out = np.empty(m)
    sq = (points**2).sum(axis=1)
    block = max(1, int(2e6 // max(m, 1)))  # cap the pairwise block at ~2e6 entries
    for start in range(0, m, block):
        stop = min(start + block, m)
        d2 = sq[start:stop, None] - 2.0 * points[start:stop] @ points.T + sq[None, :]
        out[start:stop] = np.exp(-0.5 * np.maximum(d2, 0.0) / (h * h)).sum(axis=1)
    return out / norm


def _candidates(warp: WarpField):
    coords_a = warp.grid.cell_centers()
    coords_b = warp.target_coords.reshape(-1, 2)
    cert = warp.certainty.reshape(-1)
    keep = (cert > 0) & in_extent(coords_b)
    return coords_a[keep], coords_b[keep], cert[keep]


def _draw_without_replacement(rng: np.random.Generator, weights: np.ndarray, n: int) -> np.ndarray:
    """Sequential weighted draws, renormalizing after each pick."""
    weights = weights.astype(float).copy()
    picks = np.empty(n, dtype=int)
    for i in range(n):
        total = weights.sum()
        if total <= 0:
            raise ValueError("ran out of positive-weight candidates")
        picks[i] = rng.choice(weights.size, p=weights / total)
        weights[picks[i]] = 0.0
    return picks


def balanced_sample(
    warp: WarpField, n: int, h: float = 0.15, seed: int = 0, joint_coords: bool = True
) -> CorrespondenceSet:
    """Sample n matches with certainty / KDE weighting, without replacement.

    Returned weights are the certainties of the chosen cells. Deterministic
    for a fixed seed.
    """
    coords_a, coords_b, cert = _candidates(warp)
    if n > coords_a.shape[0]:
        raise ValueError(f"requested {n} matches but only {coords_a.shape[0]} candidates")
    pts = np.concatenate([coords_a, coords_b], axis=1) if joint_coords else coords_a
    dens = kde_density(pts, h)
    weights = cert / np.maximum(dens, WEIGHT_FLOOR)
    picks = _draw_without_replacement(np.random.default_rng(seed), weights, n)
    return CorrespondenceSet(coords_a[picks], coords_b[picks], cert[picks])


def certainty_sample(warp: WarpField, n: int, seed: int = 0) -> CorrespondenceSet:
    """Baseline sampler: weights are the certainties alone (no KDE)."""
    coords_a, coords_b, cert = _candidates(warp)
    if n > coords_a.shape[0]:
        raise ValueError(f"requested {n} matches but only {coords_a.shape[0]} candidates")
    picks = _draw_without_replacement(np.random.default_rng(seed), cert.copy(), n)
    return CorrespondenceSet(coords_a[picks], coords_b[picks], cert[picks])


def spatial_entropy(cs: CorrespondenceSet, bins: int = 4) -> float:
    """Shannon entropy (nats) of sampled source points over a bins x bins grid."""
    ix = np.clip(((cs.xa[:, 0] + 1.0) / 2.0 * bins).astype(int), 0, bins - 1)
    iy = np.clip(((cs.xa[:, 1] + 1.0) / 2.0 * bins).astype(int), 0, bins - 1)
    counts = np.bincount(iy * bins + ix, minlength=bins * bins).astype(float)
    p = counts / counts.sum()
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum())
