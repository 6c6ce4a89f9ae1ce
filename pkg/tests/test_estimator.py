import warnings

import numpy as np
import pytest

from sego.cases import LINE
from sego.errors import EstimationFailedError, InvalidInputError
from sego.estimator import (FourViewCorrespondence, RansacConfig, _term_residuals_and_jacobian,
                            build_terms, ransac_estimate, refine_pose, reprojection_residual,
                            reprojection_residuals)
from sego.geometry import Pose, ViewId, axis_angle_matrix, pose_errors, project_line, project_point, so3_exp
from sego.synth import ScenarioConfig, generate_correspondences

from helpers import scene


def corr(seed, n_points=30, n_lines=10, outliers=0.0, noise=0.0):
    cfg = ScenarioConfig(noise_sigma_px=noise)
    return generate_correspondences(cfg, n_points, n_lines, outliers, np.random.default_rng(seed))


# ---------------------------------------------------------------- residuals

def test_residual_zero_at_truth():
    pose, feats, _ = corr(0)
    res = reprojection_residuals(feats, pose)
    assert np.max(res) < 1e-8


def test_rotation_error_shows_in_pixels():
    pose, feats, _ = corr(1)
    R = axis_angle_matrix([0.3, 1.0, -0.2], np.radians(1.0)) @ pose.R
    res = reprojection_residuals(feats, Pose(R, pose.t))
    assert np.mean(res > 5.0) > 0.5


def test_behind_camera_is_infinite():
    pose, feats, _ = corr(2, 5, 0)
    far = Pose(pose.R, pose.t + [0, 0, -100.0]) if feats[0].main_camera == 1 else Pose(pose.R, pose.t + [0, 0, 100.0])
    assert reprojection_residual(feats[0], far) == np.inf


def test_four_view_correspondence():
    sc = scene("S2P-1P", 0)
    pose, X = sc.pose, sc.structure[0]
    views = [ViewId(c, v) for c in (1, 2) for v in (1, 2)]
    c = FourViewCorrespondence("point", tuple(project_point(pose, v, X) for v in views))
    assert reprojection_residual(c, pose) < 1e-8
    P, Q = X, X + [0.5, 0.2, 0.3]
    c = FourViewCorrespondence(LINE, tuple(project_line(pose, v, P, Q) for v in views))
    assert reprojection_residual(c, pose) < 1e-8
    assert len(build_terms([c]).owner) == 4
    with pytest.raises(InvalidInputError):
        FourViewCorrespondence("point", tuple(project_point(pose, v, X) for v in views[:3]))


# ---------------------------------------------------------------- RANSAC

def test_ransac_noiseless_is_exact():
    pose, feats, _ = corr(3, 30, 10)
    h = ransac_estimate(feats, "ppsego", RansacConfig(seed=1))
    e = pose_errors(h.pose, pose)
    assert e.rotation_deg < 1e-6 and e.translation_rel < 1e-6
    assert h.score == len(feats)


def test_ransac_needs_three_triplets():
    pose, feats, _ = corr(4, 2, 0)
    with pytest.raises(EstimationFailedError):
        ransac_estimate(feats)


def test_ransac_is_deterministic():
    _, feats, _ = corr(5, 30, 10, outliers=0.3, noise=0.5)
    a = ransac_estimate(feats, "episego", RansacConfig(seed=7))
    b = ransac_estimate(feats, "episego", RansacConfig(seed=7))
    assert np.array_equal(a.pose.R, b.pose.R) and np.array_equal(a.pose.t, b.pose.t)
    assert a.inliers == b.inliers and a.iterations == b.iterations


def test_ransac_inliers_reverify():
    pose, feats, out = corr(6, 40, 10, outliers=0.3, noise=0.5)
    cfg = RansacConfig(seed=2)
    h = ransac_estimate(feats, "ppsego", cfg)
    res = reprojection_residuals(feats, h.pose)
    assert np.all(res[list(h.inliers)] <= cfg.threshold_px)
    assert set(np.flatnonzero(res <= cfg.threshold_px)) == set(h.inliers)
    assert not np.any(out[list(h.inliers)] & (res[list(h.inliers)] > cfg.threshold_px))


def test_ransac_config_validation():
    with pytest.raises(InvalidInputError):
        RansacConfig(confidence=1.0)
    with pytest.raises(InvalidInputError):
        RansacConfig(threshold_px=0.0)
    with pytest.raises(InvalidInputError):
        ransac_estimate(corr(0, 5, 0)[1], solver="p3p")


# ---------------------------------------------------------------- refinement

@pytest.mark.parametrize("mode", ["pose", "ba"])
def test_jacobian_matches_central_differences(mode):
    pose, feats, _ = corr(7, 6, 3, noise=1.0)
    T = build_terms(feats, all_views=(mode == "ba"))
    R = axis_angle_matrix([1, 2, 3], 0.01) @ pose.R
    t = pose.t + 0.01
    n_struct = int(T.param.max()) + 1
    X0 = np.zeros((n_struct, 3))
    X0[T.param] = T.X
    blocks = [(3 * j, np.eye(3)) for j in range(n_struct)] if mode == "ba" else None
    r0, J = _term_residuals_and_jacobian(T, R, t, X0[T.param], blocks)
    h = 1e-6
    for k in range(J.shape[1]):
        def at(s):
            d = np.zeros(J.shape[1])
            d[k] = s
            Rk, tk = so3_exp(d[:3]) @ R, t + d[3:6]
            Xk = X0 + d[6:].reshape(-1, 3) if blocks is not None else X0
            return _term_residuals_and_jacobian(T, Rk, tk, Xk[T.param], blocks)[0]
        fd = (at(h) - at(-h)) / (2 * h)
        assert np.allclose(J[:, k], fd, rtol=1e-5, atol=1e-5 * max(np.max(np.abs(fd)), 1e-8))


def test_refine_fixed_point_at_truth():
    pose, feats, _ = corr(8)
    p = refine_pose(feats, pose)
    assert pose_errors(p, pose).rotation_deg < 1e-9
    assert p.meta["converged"]


def test_refine_basin_of_attraction():
    hits, n = 0, 40
    for seed in range(n):
        pose, feats, _ = corr(100 + seed, 30, 10, noise=0.5)
        ref = pose_errors(refine_pose(feats, pose), pose)
        rng = np.random.default_rng(seed)
        start = Pose(axis_angle_matrix(rng.normal(size=3), np.radians(2.0)) @ pose.R,
                     pose.t + 0.05 * np.linalg.norm(pose.t) * rng.normal(size=3) / np.sqrt(3))
        got = pose_errors(refine_pose(feats, start), pose)
        hits += got.rotation_deg <= 1.5 * ref.rotation_deg + 1e-9
    assert hits >= 0.95 * n


def test_refine_ba_reduces_cost():
    pose, feats, _ = corr(9, 20, 5, noise=1.0)
    p = refine_pose(feats, pose, mode="ba")
    q = refine_pose(feats, pose, mode="pose")
    assert p.meta["converged"] and "structure" in p.meta
    assert np.isfinite(q.meta["cost"])


def test_refine_validation_and_divergence():
    pose, feats, _ = corr(10, 5, 0)
    with pytest.raises(InvalidInputError):
        refine_pose(feats, pose, inliers=[0, 1])
    with pytest.raises(InvalidInputError):
        refine_pose(feats, pose, mode="full")
    # a start placing a point on the image plane of its observing view
    f = feats[0]
    X = f.triangulate()
    o = f.other_observation
    off = o.view.offset(None)
    if f.main_camera == 1:
        bad = Pose(pose.R, -pose.R @ X - off + [0.5, 0.5, 0.0])
    else:
        bad = Pose(pose.R, X - pose.R @ (-off + [0.5, 0.5, 0.0]))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        p = refine_pose(feats, bad)
    assert p.meta.get("warning") == "diverged"
    assert np.array_equal(p.t, bad.t)
