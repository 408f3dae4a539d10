import numpy as np
import pytest
from scipy.stats import chisquare

from matchkit import (
    GridSpec,
    WarpField,
    balanced_sample,
    certainty_sample,
    kde_density,
    spatial_entropy,
)


def test_kde_single_point():
    h = 0.3
    got = kde_density(np.zeros((1, 4)), h)
    assert np.isclose(got[0], (2 * np.pi * h * h) ** -2)


def test_kde_coincident_points_double():
    h = 0.25
    pts = np.zeros((2, 4))
    got = kde_density(pts, h)
    single = (2 * np.pi * h * h) ** -2
    assert np.allclose(got, 2 * single)


def test_kde_matches_brute_force_double_loop():
    rng = np.random.default_rng(70)
    pts = rng.uniform(-1, 1, (100, 4))
    h = 0.4
    got = kde_density(pts, h)
    want = np.zeros(100)
    for i in range(100):
        for j in range(100):
            d2 = float(((pts[i] - pts[j]) ** 2).sum())
            want[i] += np.exp(-0.5 * d2 / (h * h))
    want /= (2 * np.pi * h * h) ** 2
    assert np.max(np.abs(got - want)) < 1e-10


def test_kde_rejects_bad_bandwidth():
    with pytest.raises(ValueError):
        kde_density(np.zeros((3, 4)), 0.0)


def uniform_warp(n=10):
    g = GridSpec(n, n)
    centers = g.cell_centers().reshape(n, n, 2)
    return WarpField(g, centers, np.full((n, n), 0.7))


def cluster_warp(seed, n=40):
    """90/10 two-cluster candidate set; everything else has certainty 0.

    Each cluster is a compact source block mapping to a tight target blob, so
    the joint-space KDE sees two well-separated clusters of very different
    population. Blocks are aligned with the 4x4 entropy binning.
    """
    rng = np.random.default_rng(seed)
    g = GridSpec(n, n)
    coords = np.zeros((n, n, 2))
    cert = np.zeros((n, n))
    blob_a = np.array([-0.7, -0.7])
    blob_b = np.array([0.7, 0.75])
    for r in range(0, 10):
        for c in range(0, 9):
            coords[r, c] = blob_a + 0.03 * rng.normal(size=2)
            cert[r, c] = 0.8
    for r in range(34, 36):
        for c in range(34, 39):
            coords[r, c] = blob_b + 0.03 * rng.normal(size=2)
            cert[r, c] = 0.8
    return WarpField(g, np.clip(coords, -1, 1), cert)


def in_small_cluster(xa):
    return (xa[:, 0] > 0.5) & (xa[:, 1] > 0.5)


def test_uniform_candidates_sample_uniformly():
    # With a bandwidth far below the cell spacing every density reduces to the
    # self-kernel, so selection is exactly uniform; pooled counts over 30
    # seeds against 20 index bins pass a chi-square test.
    counts = np.zeros(100)
    for seed in range(30):
        cs = balanced_sample(uniform_warp(), 30, h=0.02, seed=seed)
        cols = ((cs.xa[:, 0] + 1) / 0.2).astype(int)
        rows = ((cs.xa[:, 1] + 1) / 0.2).astype(int)
        for cell in rows * 10 + cols:
            counts[cell] += 1
    binned = counts.reshape(20, 5).sum(axis=1)
    _, p = chisquare(binned)
    assert p > 0.01


def test_two_cluster_rebalancing():
    shares = []
    for seed in range(30):
        cs = balanced_sample(cluster_warp(seed), 20, h=0.6, seed=seed)
        shares.append(1.0 - float(np.mean(in_small_cluster(cs.xa))))
    assert np.mean(shares) <= 0.65
    assert np.mean(shares) < 0.9  # strictly more balanced than the 90/10 pool


def test_balanced_entropy_beats_certainty_only():
    wins = 0
    seeds = 50
    for seed in range(seeds):
        warp = cluster_warp(seed)
        bal = balanced_sample(warp, 20, h=0.6, seed=seed)
        base = certainty_sample(warp, 20, seed=seed)
        wins += spatial_entropy(bal) >= spatial_entropy(base)
    assert wins >= 0.9 * seeds


def test_zero_certainty_cells_never_sampled():
    g = GridSpec(6, 6)
    centers = g.cell_centers().reshape(6, 6, 2)
    cert = np.full((6, 6), 0.5)
    cert[2:4, 2:4] = 0.0
    warp = WarpField(g, centers, cert)
    cs = balanced_sample(warp, 30, h=0.2, seed=1)
    inside_dead_zone = (np.abs(cs.xa[:, 0]) < 0.34) & (np.abs(cs.xa[:, 1]) < 0.34)
    assert not np.any(inside_dead_zone)


def test_sample_weights_are_certainties():
    rng = np.random.default_rng(71)
    g = GridSpec(5, 5)
    cert = rng.uniform(0.1, 1.0, (5, 5))
    warp = WarpField(g, g.cell_centers().reshape(5, 5, 2), cert)
    cs = balanced_sample(warp, 10, h=0.3, seed=2)
    for i in range(10):
        row = int((cs.xa[i, 1] + 1) / g.cell_height)
        col = int((cs.xa[i, 0] + 1) / g.cell_width)
        assert np.isclose(cs.weights[i], cert[row, col])


def test_sampling_deterministic_per_seed():
    warp = cluster_warp(3)
    a = balanced_sample(warp, 15, h=0.6, seed=11)
    b = balanced_sample(warp, 15, h=0.6, seed=11)
    assert np.array_equal(a.xa, b.xa) and np.array_equal(a.xb, b.xb)
    c = balanced_sample(warp, 15, h=0.6, seed=12)
    assert not np.array_equal(a.xa, c.xa)


def test_insufficient_candidates_raise():
    warp = uniform_warp(4)
    with pytest.raises(ValueError, match="candidates"):
        balanced_sample(warp, 17, h=0.2, seed=0)


def test_weights_always_finite():
    # Extremely concentrated candidates drive the KDE high; the weight floor
    # keeps everything finite.
    g = GridSpec(8, 8)
    coords = np.tile(np.array([0.3, -0.2]), (8, 8, 1))
    warp = WarpField(g, coords, np.full((8, 8), 0.9))
    cs = balanced_sample(warp, 20, h=0.05, seed=5)
    assert np.all(np.isfinite(cs.weights))
