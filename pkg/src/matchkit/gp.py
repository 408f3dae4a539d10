"""Gaussian-process match encoder: kernel regression over descriptors.

Source descriptors are regressed onto embedded target coordinates through an
exponential cosine kernel. The posterior mean ``K_*X (K_XX + sigma^2 I)^-1 E``
is computed with a Cholesky factorization (never an explicit inverse), and a
prepared solver caches the factorization for repeated queries.

Coordinate embeddings default to the identity (the posterior is then directly
a coordinate estimate); a random Fourier embedding is available for
experiments with higher-dimensional embedding spaces, decoded by nearest
neighbor against embedded anchor centers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grids import _readonly


@dataclass(frozen=True)
class KernelSpec:
    """Exponential cosine kernel parameters.

    ``beta`` is the inverse temperature applied to the cosine similarity;
    ``noise_variance`` is the observation jitter added to the Gram diagonal.
    """

    beta: float = 10.0
    noise_variance: float = 1e-4

    def __post_init__(self) -> None:
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.noise_variance < 0:
            raise ValueError("noise variance must be nonnegative")


@dataclass(frozen=True)
class SupportSet:
    """Target-image features paired with embedded target coordinates."""

    features: np.ndarray  # (N, D_f)
    embeddings: np.ndarray  # (N, D_e)

    def __post_init__(self) -> None:
        f = _readonly(np.atleast_2d(self.features))
        e = _readonly(np.atleast_2d(self.embeddings))
        if f.shape[0] < 1 or f.shape[0] != e.shape[0]:
            raise ValueError("features and embeddings must share a nonempty first axis")
        if not (np.all(np.isfinite(f)) and np.all(np.isfinite(e))):
            raise ValueError("support entries must be finite")
        if np.any(np.linalg.norm(f, axis=1) == 0):
            raise ValueError("support features must have nonzero norm")
        object.__setattr__(self, "features", f)
        object.__setattr__(self, "embeddings", e)


def exp_cos_kernel(f: np.ndarray, g: np.ndarray, beta: float = 10.0) -> float:
    """exp(beta * cos(f, g)); symmetric, maximal for parallel inputs."""
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    nf, ng = np.linalg.norm(f), np.linalg.norm(g)
    if nf == 0 or ng == 0:
        raise ValueError("kernel inputs must have nonzero norm")
    return float(np.exp(beta * float(f @ g) / (nf * ng)))


def kernel_matrix(a: np.ndarray, b: np.ndarray, beta: float) -> np.ndarray:
    """Pairwise exponential cosine kernel between rows of ``a`` and ``b``."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    na = np.linalg.norm(a, axis=1)
    nb = np.linalg.norm(b, axis=1)
    if np.any(na == 0) or np.any(nb == 0):
        raise ValueError("kernel inputs must have nonzero norm")
    cos = (a @ b.T) / np.outer(na, nb)
    return np.exp(beta * cos)


class PreparedGP:
    """Cached Cholesky solve for one support set; immutable and shareable."""

    def __init__(self, support: SupportSet, spec: KernelSpec):
        self.support = support
        self.spec = spec
        gram = kernel_matrix(support.features, support.features, spec.beta)
        gram[np.diag_indices_from(gram)] += spec.noise_variance
        try:
            chol = np.linalg.cholesky(gram)
        except np.linalg.LinAlgError as exc:
            raise ValueError(
                "kernel system is ill-conditioned (non-positive pivot); "
                "add noise variance or remove duplicate support features"
            ) from exc
        pivots = np.diag(chol)
        if (pivots.min() / pivots.max()) ** 2 < 1e-14:
            raise ValueError(
                "kernel system is ill-conditioned (pivot ratio below 1e-14); "
                "add noise variance or remove duplicate support features"
            )
        # (K_XX + sigma^2 I)^-1 E via two triangular solves.
        self._weights = np.linalg.solve(chol.T, np.linalg.solve(chol, support.embeddings))

    def posterior_mean(self, queries: np.ndarray) -> np.ndarray:
        k_star = kernel_matrix(queries, self.support.features, self.spec.beta)
        return k_star @ self._weights


def gp_posterior_mean(
    queries: np.ndarray, support: SupportSet, spec: KernelSpec = KernelSpec()
) -> np.ndarray:
    """Posterior mean of embedded coordinates at each query descriptor."""
    return PreparedGP(support, spec).posterior_mean(queries)


def fourier_frequencies(dim: int, seed: int, scale: float = np.pi) -> np.ndarray:
    """Random fixed 2D frequencies for a [sin | cos] coordinate embedding."""
    if dim < 2 or dim % 2 != 0:
        raise ValueError("fourier embedding dimension must be even and >= 2")
    rng = np.random.default_rng(seed)
    return rng.normal(0.0, scale, size=(dim // 2, 2))


def fourier_embed(coords: np.ndarray, freqs: np.ndarray) -> np.ndarray:
    """[sin(coords @ F^T) | cos(coords @ F^T)] feature map."""
    phases = np.atleast_2d(np.asarray(coords, dtype=float)) @ np.asarray(freqs).T
    return np.concatenate([np.sin(phases), np.cos(phases)], axis=1)


def embed_coords(
    coords: np.ndarray, mode: str = "identity", dim: int = 512, seed: int = 0
) -> np.ndarray:
    """Embed 2D coordinates; ``identity`` returns them unchanged.

    ``fourier`` mode uses ``dim // 2`` random frequencies fixed by ``seed``,
    so repeated calls with the same seed are bitwise identical.
    """
    coords = np.atleast_2d(np.asarray(coords, dtype=float))
    if mode == "identity":
        return coords.copy()
    if mode == "fourier":
        return fourier_embed(coords, fourier_frequencies(dim, seed))
    raise ValueError(f"unknown embedding mode {mode!r}")


def decode_embedding(
    embedded: np.ndarray, candidate_coords: np.ndarray, candidate_embeddings: np.ndarray
) -> np.ndarray:
    """Map embedded vectors back to coordinates by nearest candidate embedding."""
    embedded = np.atleast_2d(np.asarray(embedded, dtype=float))
    cand = np.atleast_2d(np.asarray(candidate_embeddings, dtype=float))
    d2 = (
        (embedded**2).sum(axis=1)[:, None]
        - 2.0 * embedded @ cand.T
        + (cand**2).sum(axis=1)[None, :]
    )
    return np.asarray(candidate_coords)[np.argmin(d2, axis=1)]
