import numpy as np
import pytest

from matchkit import (
    RotationAction,
    SteeringMatrix,
    apply_steering,
    fit_steering_l1,
    fit_steering_lsq,
    mutual_nn_match,
    random_c4_steering,
    rotate_keypoints,
    rotation_matching_eval,
    synth_equivariant,
)
from matchkit.steering import DescriptorSet


def test_rotate_keypoints_basics():
    pts = np.array([[1.0, 0.0]])
    assert np.allclose(rotate_keypoints(pts, RotationAction(0)), pts)
    assert np.allclose(rotate_keypoints(pts, RotationAction(1)), [[0.0, 1.0]])
    assert np.allclose(rotate_keypoints(pts, RotationAction(2)), [[-1.0, 0.0]])


def test_rotate_keypoints_four_turns_identity():
    rng = np.random.default_rng(60)
    pts = rng.uniform(-1, 1, (200, 2))
    out = pts
    for _ in range(4):
        out = rotate_keypoints(out, RotationAction(1))
    assert np.max(np.abs(out - pts)) < 1e-12


def test_rotate_about_offset_center():
    pts = np.array([[0.5, 0.2]])
    out = rotate_keypoints(pts, RotationAction(1, center=(0.5, 0.2)))
    assert np.allclose(out, pts)


def test_random_c4_steering_is_involution_root():
    for seed in range(5):
        w = random_c4_steering(32, seed=seed)
        assert np.array_equal(w.power(4), np.eye(32))
        assert np.max(np.abs(w.power(2) @ w.power(2) - np.eye(32))) == 0.0


def test_synth_equivariant_construction():
    w = random_c4_steering(16, seed=1)
    sets = synth_equivariant(40, 16, w_true=w, noise_sigma=0.0, seed=2)
    base = sets[0]
    for k in (1, 2, 3):
        assert np.allclose(sets[k].descs, base.descs @ w.power(k).T, atol=1e-12)
        assert np.allclose(
            sets[k].coords, rotate_keypoints(base.coords, RotationAction(k)), atol=1e-12
        )
    # Group consistency: one extra quarter turn links consecutive sets.
    for k in (1, 2, 3):
        assert np.allclose(sets[k].descs, sets[k - 1].descs @ w.w.T, atol=1e-12)


def test_synth_equivariant_deterministic():
    a = synth_equivariant(20, 8, noise_sigma=0.01, seed=9)
    b = synth_equivariant(20, 8, noise_sigma=0.01, seed=9)
    for sa, sb in zip(a, b):
        assert np.array_equal(sa.descs, sb.descs)


def test_lsq_identity_fit():
    sets = synth_equivariant(256, 16, noise_sigma=0.0, seed=3)
    w, resid = fit_steering_lsq(sets[0], sets[0])
    assert np.max(np.abs(w.w - np.eye(16))) < 1e-8
    assert resid < 1e-9


def test_lsq_recovers_truth_noiseless():
    w_true = random_c4_steering(16, seed=4)
    sets = synth_equivariant(64, 16, w_true=w_true, noise_sigma=0.0, seed=5)
    w, _ = fit_steering_lsq(sets[0], sets[1])
    assert np.linalg.norm(w.w - w_true.w) < 1e-6


def test_lsq_residual_tracks_noise():
    w_true = random_c4_steering(16, seed=6)
    sets = synth_equivariant(128, 16, w_true=w_true, noise_sigma=0.01, seed=7)
    _, resid = fit_steering_lsq(sets[0], sets[1])
    assert resid < 3 * 0.01
    assert resid > 0.01 / 3


def test_lsq_rank_deficient_without_ridge():
    coords = np.zeros((2, 2))
    descs = np.array([[1.0, 0.0, 0.0], [2.0, 0.0, 0.0]])  # rank 1 < D
    a = DescriptorSet(coords, descs)
    with pytest.raises(ValueError, match="rank"):
        fit_steering_lsq(a, a, ridge=0.0)


def test_l1_fit_zero_at_truth():
    w_true = random_c4_steering(16, seed=8)
    sets = synth_equivariant(64, 16, w_true=w_true, noise_sigma=0.0, seed=9)
    pairs = {k: (sets[0], sets[k]) for k in (1, 2, 3)}
    res = fit_steering_l1(pairs, iters=5, step=1e-3, seed=0, init=w_true.w)
    assert res.initial_loss < 1e-10
    assert res.final_loss <= res.initial_loss
    assert np.allclose(res.w.w, w_true.w, atol=1e-9)


def test_l1_fit_converges_from_random_init():
    w_true = random_c4_steering(32, seed=10)
    sets = synth_equivariant(256, 32, w_true=w_true, noise_sigma=0.0, seed=11)
    pairs = {k: (sets[0], sets[k]) for k in (1, 2, 3)}
    rng = np.random.default_rng(12)
    init = rng.normal(0, 1 / np.sqrt(32), (32, 32))
    res = fit_steering_l1(pairs, iters=2000, step=1e-3, seed=0, init=init)
    assert res.final_loss < 1e-3
    assert res.final_loss <= res.initial_loss


def test_l1_fit_beats_lsq_under_outliers():
    rng = np.random.default_rng(13)
    w_true = random_c4_steering(16, seed=14)
    sets = synth_equivariant(192, 16, w_true=w_true, noise_sigma=0.0, seed=15)
    base, rot = sets[0], sets[1]
    noise = rng.laplace(0.0, 0.02, rot.descs.shape)
    gross = (rng.uniform(0, 1, rot.descs.shape) < 0.05) * rng.normal(0, 1.0, rot.descs.shape)
    rot_bad = DescriptorSet(rot.coords, rot.descs + noise + gross)
    w_lsq, _ = fit_steering_lsq(base, rot_bad)
    res = fit_steering_l1({1: (base, rot_bad)}, iters=800, step=1e-3, seed=1)
    err_lsq = np.median(np.abs(w_lsq.w - w_true.w))
    err_l1 = np.median(np.abs(res.w.w - w_true.w))
    assert err_l1 < err_lsq


def test_l1_fit_divergence_reports_step():
    w_true = random_c4_steering(8, seed=16)
    sets = synth_equivariant(64, 8, w_true=w_true, noise_sigma=0.0, seed=17)
    pairs = {k: (sets[0], sets[k]) for k in (1, 2, 3)}
    with pytest.raises(ValueError, match="step"):
        fit_steering_l1(pairs, iters=2000, step=50.0, seed=0)


def test_apply_steering_power_rules():
    rng = np.random.default_rng(18)
    w = SteeringMatrix(rng.normal(size=(8, 8)))
    descs = rng.normal(size=(10, 8))
    assert np.array_equal(apply_steering(w, 0, descs), descs)
    once = apply_steering(w, 1, descs)
    twice = apply_steering(w, 1, once)
    assert np.allclose(apply_steering(w, 2, descs), twice, atol=1e-12)
    brute = descs @ (w.w @ w.w @ w.w).T
    assert np.allclose(apply_steering(w, 3, descs), brute, atol=1e-10)


def test_apply_steering_validates():
    w = SteeringMatrix(np.eye(4))
    with pytest.raises(ValueError):
        apply_steering(w, 5, np.zeros((2, 4)))
    with pytest.raises(ValueError):
        apply_steering(w, 1, np.zeros((2, 3)))


def test_mutual_nn_identity_and_permutation():
    rng = np.random.default_rng(19)
    coords = rng.uniform(-1, 1, (12, 2))
    descs = np.linalg.qr(rng.normal(size=(12, 12)))[0]  # orthonormal rows
    a = DescriptorSet(coords, descs)
    matches = mutual_nn_match(a, a)
    assert len(matches) == 12
    assert np.allclose(matches.xa, matches.xb)

    perm = rng.permutation(12)
    b = DescriptorSet(coords[perm], descs[perm])
    matches = mutual_nn_match(a, b)
    assert len(matches) == 12
    assert np.allclose(matches.xa, matches.xb)  # same keypoints recovered


def test_mutual_nn_matches_brute_force():
    rng = np.random.default_rng(20)
    a = DescriptorSet(rng.uniform(-1, 1, (15, 2)), rng.normal(size=(15, 6)))
    b = DescriptorSet(rng.uniform(-1, 1, (13, 2)), rng.normal(size=(13, 6)))
    na = a.descs / np.linalg.norm(a.descs, axis=1, keepdims=True)
    nb = b.descs / np.linalg.norm(b.descs, axis=1, keepdims=True)
    sim = na @ nb.T
    pairs = []
    for i in range(15):
        j = int(np.argmax(sim[i]))
        if int(np.argmax(sim[:, j])) == i:
            pairs.append((i, j))
    got = mutual_nn_match(a, b)
    assert len(got) == len(pairs)
    for idx, (i, j) in enumerate(pairs):
        assert np.allclose(got.xa[idx], a.coords[i])
        assert np.allclose(got.xb[idx], b.coords[j])


def test_rotation_matching_eval_k0_equal():
    sets = synth_equivariant(50, 16, noise_sigma=0.02, seed=21)
    w, _ = fit_steering_lsq(sets[0], sets[1])
    acc = rotation_matching_eval(sets[0], sets[0], w, 0)
    assert acc.without_steering == acc.with_steering == 1.0


def test_steering_rescues_rotated_matching():
    w_true = random_c4_steering(32, seed=22)
    sets = synth_equivariant(256, 32, w_true=w_true, noise_sigma=0.05, seed=23)
    pairs = {k: (sets[0], sets[k]) for k in (1, 2, 3)}
    res = fit_steering_l1(pairs, iters=600, step=1e-3, seed=0)
    for k in (1, 2, 3):
        acc = rotation_matching_eval(sets[0], sets[k], res.w, k)
        assert acc.with_steering >= acc.without_steering
        assert acc.with_steering >= 0.95
        assert acc.without_steering < 0.5
