"""Exact match distributions, their diffusion over scale, and multimodality.

A scene is a partition of the source extent into regions, each moving by its
own affine map. Rasterizing a scene gives the exact joint match distribution
at infinite resolution: one unit of mass per visible source cell, placed in
the target cell its region maps it to. Observing the scene at a coarser scale
``s`` corresponds to convolving that joint with an isotropic Gaussian of
standard deviation ``s`` over all four coordinates (two source, two target),
truncated at radius ``4 s`` and renormalized.

Where two regions meet, the source-side blur mixes populations moving
differently, so conditionals near such motion boundaries become multimodal as
``s`` grows. ``multimodality_sweep`` quantifies this, and ``fit_comparison``
measures how much better an anchor mixture fits a given conditional than the
best single discretized Gaussian.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .anchors import AnchorGrid
from .grids import GridSpec, JointMatchDistribution, in_extent, normalize_joint


@dataclass(frozen=True)
class AffineRegion:
    """A membership predicate over the source extent plus an affine motion."""

    contains: Callable[[np.ndarray], np.ndarray]  # (N, 2) -> bool (N,)
    linear: np.ndarray  # (2, 2)
    offset: np.ndarray  # (2,)

    def map_points(self, pts: np.ndarray) -> np.ndarray:
        return np.asarray(pts, dtype=float) @ np.asarray(self.linear, dtype=float).T + np.asarray(
            self.offset, dtype=float
        )


@dataclass(frozen=True)
class SceneSpec:
    """Piecewise-affine motion: regions must partition the source extent."""

    regions: tuple[AffineRegion, ...]

    def __post_init__(self) -> None:
        if not self.regions:
            raise ValueError("scene needs at least one region")

    def region_index(self, pts: np.ndarray) -> np.ndarray:
        """Region id per point; raises if the partition property fails."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        member = np.stack([np.asarray(r.contains(pts), dtype=bool) for r in self.regions])
        counts = member.sum(axis=0)
        if np.any(counts == 0):
            raise ValueError("regions do not cover the source extent")
        if np.any(counts > 1):
            raise ValueError("regions overlap")
        return np.argmax(member, axis=0)

    def map_points(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        idx = self.region_index(pts)
        out = np.empty_like(pts)
        for i, region in enumerate(self.regions):
            sel = idx == i
            if np.any(sel):
                out[sel] = region.map_points(pts[sel])
        return out


def identity_scene() -> SceneSpec:
    return SceneSpec((AffineRegion(lambda p: np.ones(len(p), bool), np.eye(2), np.zeros(2)),))


def translation_scene(offset: Sequence[float]) -> SceneSpec:
    off = np.asarray(offset, dtype=float)
    return SceneSpec((AffineRegion(lambda p: np.ones(len(p), bool), np.eye(2), off),))


def affine_scene(linear: np.ndarray, offset: Sequence[float]) -> SceneSpec:
    return SceneSpec(
        (
            AffineRegion(
                lambda p: np.ones(len(p), bool),
                np.asarray(linear, dtype=float),
                np.asarray(offset, dtype=float),
            ),
        )
    )


def two_translation_scene(
    offset_left: Sequence[float] = (-0.3, 0.0), offset_right: Sequence[float] = (0.3, 0.0)
) -> SceneSpec:
    """The canonical motion-boundary scene: half planes split at x = 0."""
    return SceneSpec(
        (
            AffineRegion(lambda p: p[:, 0] < 0.0, np.eye(2), np.asarray(offset_left, float)),
            AffineRegion(lambda p: p[:, 0] >= 0.0, np.eye(2), np.asarray(offset_right, float)),
        )
    )


def rasterize_scene(spec: SceneSpec, src: GridSpec, tgt: GridSpec) -> JointMatchDistribution:
    """Exact joint at scale zero: unit mass per source cell at its mapped cell.

    Source cells whose image falls outside the target extent contribute no
    mass (occlusion by the frame); the remaining mass is renormalized.
    """
    centers = src.cell_centers()
    mapped = spec.map_points(centers)
    visible = in_extent(mapped)
    if not np.any(visible):
        raise ValueError("scene maps every source cell outside the target extent")
    joint = np.zeros((src.n_cells, tgt.n_cells))
    tcols = np.clip(
        np.floor((mapped[visible, 0] + 1.0) / tgt.cell_width), 0, tgt.width - 1
    ).astype(int)
    trows = np.clip(
        np.floor((mapped[visible, 1] + 1.0) / tgt.cell_height), 0, tgt.height - 1
    ).astype(int)
    joint[np.flatnonzero(visible), trows * tgt.width + tcols] = 1.0
    return normalize_joint(joint, src, tgt)


@dataclass(frozen=True)
class DiffusedJoint:
    """A joint distribution observed at scale ``sigma`` (already diffused)."""

    joint: JointMatchDistribution
    sigma: float


def _gaussian_taps(sigma_extent: float, cell_side: float) -> np.ndarray:
    """Sampled 1D Gaussian kernel, truncated at radius 4*sigma, sum 1."""
    radius = int(math.floor(4.0 * sigma_extent / cell_side))
    if radius < 1:
        return np.array([1.0])
    offs = np.arange(-radius, radius + 1) * cell_side
    taps = np.exp(-0.5 * (offs / sigma_extent) ** 2)
    return taps / taps.sum()


def _convolve_axis(arr: np.ndarray, taps: np.ndarray, axis: int) -> np.ndarray:
    """Zero-padded 1D convolution along one axis (mass may leak at edges)."""
    if len(taps) == 1:
        return arr * taps[0]
    moved = np.moveaxis(arr, axis, 0)
    out = np.zeros_like(moved)
    n = moved.shape[0]
    radius = len(taps) // 2
    for tap_idx, weight in enumerate(taps):
        off = tap_idx - radius
        lo = max(0, -off)
        hi = min(n, n - off)
        if lo < hi:
            out[lo:hi] += weight * moved[lo + off : hi + off]
    return np.moveaxis(out, 0, axis)


def diffuse(j: JointMatchDistribution, s: float, axes: str = "joint") -> DiffusedJoint:
    """Convolve the joint with an isotropic Gaussian of std ``s``.

    The default blurs all four coordinates (two source, two target) with
    separable 1D passes; ``axes="source"`` or ``axes="target"`` restrict the
    blur for exploration. Kernels are truncated at radius ``4 s`` and the
    result is renormalized, so mass stays exactly one.
    """
    if s < 0:
        raise ValueError("scale must be nonnegative")
    if axes not in ("joint", "source", "target"):
        raise ValueError(f"unknown diffusion axes {axes!r}")
    if s == 0:
        return DiffusedJoint(j, 0.0)
    vol = j.as_4d().copy()
    sides = [
        j.source.cell_height,
        j.source.cell_width,
        j.target.cell_height,
        j.target.cell_width,
    ]
    active = {"joint": (0, 1, 2, 3), "source": (0, 1), "target": (2, 3)}[axes]
    for axis in active:
        vol = _convolve_axis(vol, _gaussian_taps(s, sides[axis]), axis)
    return DiffusedJoint(normalize_joint(vol, j.source, j.target), s)


def conditional_of(q: DiffusedJoint | JointMatchDistribution, x_a: int) -> np.ndarray:
    """Normalized conditional row for source cell ``x_a`` (flat index)."""
    joint = q.joint if isinstance(q, DiffusedJoint) else q
    row = joint.probs[x_a]
    total = row.sum()
    if total <= 0:
        raise ValueError(f"source cell {x_a} has no match mass (fully occluded)")
    return row / total


@dataclass(frozen=True)
class Mode:
    value: float
    centroid: tuple[float, float]  # (row, col), plateau centroid
    cells: tuple[tuple[int, int], ...]


def find_modes(cond: np.ndarray, rel_threshold: float) -> list[Mode]:
    """Strict local maxima of a 2D grid under 8-connectivity.

    Equal-valued plateaus collapse to a single mode via connected components;
    a component counts only if every outside neighbor is strictly smaller and
    its value reaches ``rel_threshold`` times the global maximum.
    """
    if not (0.0 < rel_threshold < 1.0):
        raise ValueError("rel_threshold must lie in (0, 1)")
    cond = np.asarray(cond, dtype=float)
    h, w = cond.shape
    peak = float(cond.max())
    if peak <= 0:
        return []
    seen = np.zeros((h, w), dtype=bool)
    modes: list[Mode] = []
    neighborhood = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]
    for r0 in range(h):
        for c0 in range(w):
            if seen[r0, c0]:
                continue
            value = cond[r0, c0]
            # Flood-fill the equal-valued plateau containing (r0, c0).
            stack = [(r0, c0)]
            seen[r0, c0] = True
            component = []
            is_max = True
            while stack:
                r, c = stack.pop()
                component.append((r, c))
                for dr, dc in neighborhood:
                    rr, cc = r + dr, c + dc
                    if not (0 <= rr < h and 0 <= cc < w):
                        continue
                    if cond[rr, cc] == value:
                        if not seen[rr, cc]:
                            seen[rr, cc] = True
                            stack.append((rr, cc))
                    elif cond[rr, cc] > value:
                        is_max = False
            if is_max and value >= rel_threshold * peak:
                rows = [rc[0] for rc in component]
                cols = [rc[1] for rc in component]
                modes.append(
                    Mode(
                        value=float(value),
                        centroid=(sum(rows) / len(rows), sum(cols) / len(cols)),
                        cells=tuple(sorted(component)),
                    )
                )
    return modes


def count_modes(cond: np.ndarray, rel_threshold: float) -> int:
    return len(find_modes(cond, rel_threshold))


def boundary_distances(spec: SceneSpec, grid: GridSpec) -> np.ndarray:
    """Distance from each source cell center to the region boundary.

    The boundary is located at midpoints between 4-adjacent cell centers with
    different region memberships; single-region scenes return +inf everywhere.
    """
    centers = grid.cell_centers()
    ids = spec.region_index(centers).reshape(grid.height, grid.width)
    pts = centers.reshape(grid.height, grid.width, 2)
    midpoints = []
    diff_h = ids[:, :-1] != ids[:, 1:]
    if np.any(diff_h):
        midpoints.append(0.5 * (pts[:, :-1][diff_h] + pts[:, 1:][diff_h]))
    diff_v = ids[:-1, :] != ids[1:, :]
    if np.any(diff_v):
        midpoints.append(0.5 * (pts[:-1, :][diff_v] + pts[1:, :][diff_v]))
    if not midpoints:
        return np.full((grid.height, grid.width), np.inf)
    boundary = np.concatenate(midpoints, axis=0)
    d = np.linalg.norm(centers[:, None, :] - boundary[None, :, :], axis=-1)
    return d.min(axis=1).reshape(grid.height, grid.width)


@dataclass(frozen=True)
class SweepCell:
    scale: float
    cell: int  # flat source index
    boundary_distance: float
    n_modes: int  # 0 for occluded (zero-mass) cells
    has_mass: bool


@dataclass(frozen=True)
class SweepResult:
    cells: tuple[SweepCell, ...]
    cell_side: float

    def fraction_multimodal(self, scale: float, dist_lo: float = 0.0, dist_hi: float = np.inf):
        """(fraction multimodal, n cells) among cells with mass in a distance band."""
        rows = [
            c
            for c in self.cells
            if c.scale == scale and c.has_mass and dist_lo <= c.boundary_distance <= dist_hi
        ]
        if not rows:
            return 0.0, 0
        multi = sum(1 for c in rows if c.n_modes >= 2)
        return multi / len(rows), len(rows)

    def table(self) -> list[tuple[float, int, float, int]]:
        """Rows of (scale, distance bin in cells, fraction multimodal, n cells)."""
        out = []
        scales = sorted({c.scale for c in self.cells})
        max_bin = 1 + int(
            max(
                (c.boundary_distance / self.cell_side)
                for c in self.cells
                if np.isfinite(c.boundary_distance)
            )
            if any(np.isfinite(c.boundary_distance) for c in self.cells)
            else 0
        )
        for s in scales:
            for b in range(1, max_bin + 1):
                frac, n = self.fraction_multimodal(
                    s, dist_lo=(b - 1) * self.cell_side, dist_hi=b * self.cell_side * (1 - 1e-12)
                )
                if n:
                    out.append((s, b, frac, n))
        return out


def multimodality_sweep(
    spec: SceneSpec,
    src: GridSpec,
    tgt: GridSpec,
    scales: Sequence[float],
    rel_threshold: float = 0.1,
) -> SweepResult:
    """Mode-count every conditional at every scale, keyed by boundary distance."""
    base = rasterize_scene(spec, src, tgt)
    dists = boundary_distances(spec, src).ravel()
    records: list[SweepCell] = []
    for s in scales:
        q = diffuse(base, s)
        probs = q.joint.probs
        row_mass = probs.sum(axis=1)
        for cell in range(src.n_cells):
            if row_mass[cell] <= 0:
                records.append(SweepCell(s, cell, float(dists[cell]), 0, False))
                continue
            cond = (probs[cell] / row_mass[cell]).reshape(tgt.height, tgt.width)
            records.append(
                SweepCell(s, cell, float(dists[cell]), count_modes(cond, rel_threshold), True)
            )
    return SweepResult(tuple(records), min(src.cell_width, src.cell_height))


def entropy(p: np.ndarray) -> float:
    """Shannon entropy in nats; zero entries contribute nothing."""
    p = np.asarray(p, dtype=float).ravel()
    nz = p[p > 0]
    return float(-(nz * np.log(nz)).sum())


def _discrete_gaussian(tgt: GridSpec, mu: np.ndarray, sigma: float) -> np.ndarray:
    cx = tgt.axis_centers_x()
    cy = tgt.axis_centers_y()
    gx = np.exp(-0.5 * ((cx - mu[0]) / sigma) ** 2)
    gy = np.exp(-0.5 * ((cy - mu[1]) / sigma) ** 2)
    g = np.outer(gy, gx)
    return g / g.sum()


def _kl(p: np.ndarray, q: np.ndarray) -> float:
    mask = p > 0
    return float((p[mask] * (np.log(p[mask]) - np.log(np.maximum(q[mask], 1e-300)))).sum())


def fit_comparison(cond: np.ndarray, anchor_grid: AnchorGrid) -> tuple[float, float]:
    """KL of a conditional against its best anchor mixture and best Gaussian.

    The anchor mixture projects the conditional onto anchor cells (block sums
    are the exact KL minimizer); the unimodal reference is the best
    discretized isotropic Gaussian found by grid search over all cell centers
    and 16 log-spaced sigmas in [0.01, 1], refined by coordinate descent.
    Returns ``(kl_mixture, kl_unimodal)`` in nats.
    """
    cond = np.asarray(cond, dtype=float)
    h, w = cond.shape
    if h % anchor_grid.rows or w % anchor_grid.cols:
        raise ValueError("anchor grid must evenly divide the conditional grid")
    tgt = GridSpec(h, w)
    total = cond.sum()
    if total <= 0:
        raise ValueError("conditional has no mass")
    cond = cond / total

    fh, fw = h // anchor_grid.rows, w // anchor_grid.cols
    block = cond.reshape(anchor_grid.rows, fh, anchor_grid.cols, fw).sum(axis=(1, 3))
    mix = np.repeat(np.repeat(block / (fh * fw), fh, axis=0), fw, axis=1)
    kl_mixture = _kl(cond, mix)

    log_sigmas = np.linspace(math.log(0.01), math.log(1.0), 16)
    centers = tgt.cell_centers()
    best = (np.inf, None, None)
    for ls in log_sigmas:
        sig = math.exp(ls)
        for mu in centers:
            kl = _kl(cond, _discrete_gaussian(tgt, mu, sig))
            if kl < best[0]:
                best = (kl, mu.copy(), ls)
    kl_best, mu, ls = best
    mu = np.asarray(mu, dtype=float)

    def objective(params: np.ndarray) -> float:
        return _kl(cond, _discrete_gaussian(tgt, params[:2], math.exp(params[2])))

    params = np.array([mu[0], mu[1], ls])
    steps = np.array(
        [tgt.cell_width, tgt.cell_height, log_sigmas[1] - log_sigmas[0]]
    )
    value = kl_best
    for _ in range(8):  # coordinate descent with ternary line searches
        for axis in range(3):
            lo = params[axis] - steps[axis]
            hi = params[axis] + steps[axis]
            for _ in range(40):
                m1 = lo + (hi - lo) / 3
                m2 = hi - (hi - lo) / 3
                p1, p2 = params.copy(), params.copy()
                p1[axis], p2[axis] = m1, m2
                if objective(p1) <= objective(p2):
                    hi = m2
                else:
                    lo = m1
            params[axis] = 0.5 * (lo + hi)
        new_value = objective(params)
        if value - new_value < 1e-12:
            value = min(value, new_value)
            break
        value = new_value
    return kl_mixture, float(min(kl_best, value))
