"""Coarse classification loss and robust fine regression loss, with gradients.

The coarse loss treats matching as classification over anchors: each
correspondence contributes the negative log probability of the anchor closest
to its target point, and a binary cross-entropy term supervises the per-cell
matchability against a covisibility mask (weighted by ``marginal_weight``).

The fine loss scores refined warps with a generalized Charbonnier penalty
``(||mu - x||^2 + s)^(1/4)`` whose scale doubles per refinement octave,
``s = 2^i * c``. Its gradient behaves quadratically near zero error and
decays like ``r^(-1/2)`` for large errors, so gross outliers stop dominating.

Analytic gradients are returned alongside every loss so they can be checked
against finite differences; scales are treated independently (no gradient
flows from one refinement stage into another).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .anchors import AnchorGrid, AnchorProbs, closest_anchor
from .grids import CorrespondenceSet, GridSpec, WarpField, bilinear_weights, containing_cells

LOG_EPS = 1e-12


@dataclass(frozen=True)
class CoarseLossConfig:
    """marginal_weight scales the matchability BCE against the anchor term."""

    marginal_weight: float
    anchor_grid: AnchorGrid

    def __post_init__(self) -> None:
        if self.marginal_weight <= 0:
            raise ValueError("marginal weight must be positive")


@dataclass(frozen=True)
class FineLossConfig:
    c: float = 0.03
    scales: tuple[int, ...] = (0, 1, 2, 3)

    def __post_init__(self) -> None:
        if self.c <= 0:
            raise ValueError("base scale c must be positive")
        if any((int(i) != i or i < 0) for i in self.scales):
            raise ValueError("scale exponents must be nonnegative integers")

    def scale_value(self, i: int) -> float:
        return (2.0**i) * self.c


def charbonnier_nll(mu: np.ndarray, x: np.ndarray, s: float) -> np.ndarray:
    """Generalized Charbonnier penalty (||mu - x||^2 + s)^(1/4)."""
    if s <= 0:
        raise ValueError("scale s must be positive")
    mu = np.asarray(mu, dtype=float)
    x = np.asarray(x, dtype=float)
    r2 = ((mu - x) ** 2).sum(axis=-1)
    return (r2 + s) ** 0.25


def charbonnier_grad(mu: np.ndarray, x: np.ndarray, s: float) -> np.ndarray:
    """Gradient of :func:`charbonnier_nll` with respect to ``mu``.

    Equals ``0.5 * (||mu - x||^2 + s)^(-3/4) * (mu - x)``: linear in the
    residual near zero, decaying like ``0.5 * r^(-1/2)`` far away.
    """
    if s <= 0:
        raise ValueError("scale s must be positive")
    mu = np.asarray(mu, dtype=float)
    x = np.asarray(x, dtype=float)
    diff = mu - x
    r2 = (diff**2).sum(axis=-1)
    return 0.5 * ((r2 + s) ** -0.75)[..., None] * diff


def _bce_mean(p: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean binary cross-entropy and its gradient w.r.t. ``p``.

    Probabilities are clamped to [LOG_EPS, 1 - LOG_EPS] before the logs; the
    gradient is zero where the clamp is active.
    """
    p = np.asarray(p, dtype=float)
    y = np.asarray(y, dtype=float)
    pc = np.clip(p, LOG_EPS, 1.0 - LOG_EPS)
    value = float(np.mean(-(y * np.log(pc) + (1.0 - y) * np.log(1.0 - pc))))
    interior = (p > LOG_EPS) & (p < 1.0 - LOG_EPS)
    grad = np.where(interior, (-y / pc + (1.0 - y) / (1.0 - pc)) / p.size, 0.0)
    return value, grad


@dataclass(frozen=True)
class CoarseLossResult:
    value: float
    conditional_term: float
    marginal_term: float
    d_pi: np.ndarray  # (source cells, K)
    d_matchability: np.ndarray  # (source cells,)


def coarse_loss_raw(
    pi: np.ndarray,
    matchability: np.ndarray,
    source: GridSpec,
    matchable_mask: np.ndarray,
    corr: CorrespondenceSet,
    cfg: CoarseLossConfig,
) -> CoarseLossResult:
    """Coarse loss on raw arrays (no normalization assumed).

    Exposed separately so gradients can be verified by finite differences on
    arbitrary perturbations of ``pi`` and ``matchability``.
    """
    if len(corr) == 0:
        raise ValueError("correspondence set is empty")
    pi = np.asarray(pi, dtype=float)
    matchability = np.asarray(matchability, dtype=float)
    mask = np.asarray(matchable_mask, dtype=float).reshape(-1)
    if mask.shape != (source.n_cells,):
        raise ValueError("matchable mask must have one entry per source cell")

    rows, cols = containing_cells(corr.xa, source)
    cells = rows * source.width + cols
    kdag = closest_anchor(cfg.anchor_grid, corr.xb)
    w = corr.weights
    wsum = float(w.sum())
    if wsum <= 0:
        raise ValueError("correspondence weights sum to zero")

    picked = pi[cells, kdag]
    clamped = np.maximum(picked, LOG_EPS)
    conditional = float(np.sum(w * -np.log(clamped)) / wsum)

    d_pi = np.zeros_like(pi)
    live = picked > LOG_EPS
    np.add.at(d_pi, (cells[live], kdag[live]), -(w[live] / wsum) / clamped[live])

    marginal, d_match_unit = _bce_mean(matchability, mask)
    value = conditional + cfg.marginal_weight * marginal
    return CoarseLossResult(
        value=value,
        conditional_term=conditional,
        marginal_term=marginal,
        d_pi=d_pi,
        d_matchability=cfg.marginal_weight * d_match_unit,
    )


def coarse_loss(
    probs: AnchorProbs,
    matchable_mask: np.ndarray,
    corr: CorrespondenceSet,
    cfg: CoarseLossConfig,
) -> CoarseLossResult:
    """Anchor classification loss plus weighted matchability cross-entropy.

    The conditional term is the weighted mean over correspondences of
    ``-log pi_{k_dag(x_B)}(cell(x_A))`` where ``k_dag`` indexes the anchor
    closest to the target point. It vanishes exactly when all probability
    mass sits on the closest anchors and matchability matches the mask.
    """
    return coarse_loss_raw(probs.pi, probs.matchability, probs.source, matchable_mask, corr, cfg)


@dataclass(frozen=True)
class FineScaleResult:
    value: float
    charbonnier_term: float
    bce_term: float
    d_coords: np.ndarray  # (H, W, 2) gradient w.r.t. warp target coordinates
    d_certainty: np.ndarray  # (H, W)


@dataclass(frozen=True)
class FineLossResult:
    value: float
    scales: Mapping[int, FineScaleResult] = field(default_factory=dict)


def fine_loss(
    warps: Mapping[int, WarpField],
    corr: CorrespondenceSet,
    masks: Mapping[int, np.ndarray],
    cfg: FineLossConfig,
) -> FineLossResult:
    """Sum of per-scale robust regression losses plus certainty cross-entropy.

    For scale exponent ``i`` the warp is sampled bilinearly at each
    correspondence source point, scored by the Charbonnier penalty at
    ``s = 2^i * c``, and the warp certainty is scored with BCE against the
    scale's matchable mask. Scales are independent: each scale's gradients
    touch only that scale's warp, mirroring stage-isolated refinement.
    """
    if len(corr) == 0:
        raise ValueError("correspondence set is empty")
    results: dict[int, FineScaleResult] = {}
    total = 0.0
    w = corr.weights
    wsum = float(w.sum())
    if wsum <= 0:
        raise ValueError("correspondence weights sum to zero")
    for i in cfg.scales:
        if i not in warps:
            raise ValueError(f"missing warp for scale exponent {i}")
        if i not in masks:
            raise ValueError(f"missing matchable mask for scale exponent {i}")
        fld = warps[i]
        s = cfg.scale_value(i)
        rows, cols, bw = bilinear_weights(fld.grid, corr.xa)
        mu = (bw[..., None] * fld.target_coords[rows, cols]).sum(axis=-2)
        nll = charbonnier_nll(mu, corr.xb, s)
        charb = float(np.sum(w * nll) / wsum)
        # Chain rule through the bilinear sampling: scatter each pair's
        # Charbonnier gradient onto its four supporting cells.
        g_mu = charbonnier_grad(mu, corr.xb, s) * (w / wsum)[:, None]
        d_coords = np.zeros_like(fld.target_coords)
        np.add.at(d_coords, (rows.ravel(), cols.ravel()), (bw[..., None] * g_mu[:, None, :]).reshape(-1, 2))
        mask = np.asarray(masks[i], dtype=float).reshape(fld.grid.height, fld.grid.width)
        bce, d_cert = _bce_mean(fld.certainty, mask)
        results[i] = FineScaleResult(
            value=charb + bce,
            charbonnier_term=charb,
            bce_term=bce,
            d_coords=d_coords,
            d_certainty=d_cert,
        )
        total += charb + bce
    return FineLossResult(value=total, scales=results)


def total_loss(coarse: float, fine: float) -> float:
    """Combined objective: the stages are decoupled, so no cross-weighting."""
    return float(coarse) + float(fine)


def gradient_sweep(
    c: float = 0.03, rmin: float = 1e-4, rmax: float = 100.0, steps: int = 200
) -> np.ndarray:
    """Rows of ``(r, loss, grad_magnitude)`` for the scale-``c`` penalty.

    Starts at r = 0 and continues log-spaced from ``rmin`` to ``rmax``; used
    by the CLI to emit robustness curves.
    """
    if rmin <= 0 or rmax <= rmin or steps < 2:
        raise ValueError("need 0 < rmin < rmax and steps >= 2")
    r = np.concatenate([[0.0], np.geomspace(rmin, rmax, steps)])
    loss = (r**2 + c) ** 0.25
    grad = 0.5 * r * (r**2 + c) ** -0.75
    return np.stack([r, loss, grad], axis=1)
