import numpy as np
import pytest

from sego.cases import HARD_LABELS, LINE, POINT, canonicalize, classify
from sego.constraints import QUAT_MONOMIALS, ROTATION_TENSOR, scaled_residual
from sego.episego import (BASIS, N_SOLUTIONS, build_line_pluecker_rows, c_matrix, epipolar_system,
                          get_template, line_rows_all, minors, multiplier_set, solve_episego)
from sego.errors import DegenerateInstanceError, InvalidInputError
from sego.geometry import axis_angle_matrix, quat_rotation_unnormalized, rotation_to_quat
from sego.poly.polynomial import evaluate_monomials

from helpers import anchor_depth, best_error, generic_scenes, planted, scene


def test_rotation_tensor_matches_quaternion_matrix(rng):
    for _ in range(20):
        q = rng.normal(size=4)
        m = evaluate_monomials(QUAT_MONOMIALS, q)
        assert np.allclose(np.einsum("ijm,m->ij", ROTATION_TENSOR, m), quat_rotation_unnormalized(q))


@pytest.mark.parametrize("label", HARD_LABELS)
def test_rows_vanish_at_truth(label):
    rng = np.random.default_rng(5)
    for sc in generic_scenes(label, 30, seed=1):
        rows, anchor = epipolar_system(sc.features)
        alpha = anchor_depth(sc, anchor)
        assert len(rows) == 4
        assert np.max(scaled_residual(rows, sc.pose.R, alpha)) < 1e-10
        # a 1 degree rotation error is clearly visible
        Rp = axis_angle_matrix(rng.normal(size=3), np.radians(1.0)) @ sc.pose.R
        assert np.max(np.abs(rows.evaluate(Rp, alpha))) > 1e-4


@pytest.mark.parametrize("label", ["S2P-1L", "S1P1L-1L", "S1P-2L", "S1P1L-1P"])
def test_raw_line_rows_have_rank_two(label):
    for sc in generic_scenes(label, 20, seed=2):
        _, anchor = epipolar_system(sc.features)
        alpha = anchor_depth(sc, anchor)
        for f in sc.features[1:]:
            if f.kind != LINE:
                continue
            raw = line_rows_all(f, anchor)
            assert np.max(scaled_residual(raw, sc.pose.R, alpha)) < 1e-10
            M = (raw.A + alpha * raw.B).reshape(3, 9)
            s = np.linalg.svd(M, compute_uv=False)
            assert s[2] < 1e-10 * s[0] and s[1] > 1e-6 * s[0]
            kept = build_line_pluecker_rows(f, anchor)
            assert len(kept) == 2


def test_both_line_main_cameras_are_covered():
    seen = set()
    for label in ("S2P-1L", "S1P1L-1P"):
        sc = scene(label, 0)
        seen |= {f.main_camera for f in sc.features if f.kind == LINE}
    assert seen == {1, 2}


def test_multiplier_sets_and_template_size():
    assert len(multiplier_set("upto3")) == 20
    assert len(multiplier_set("exact3")) == 11
    T = get_template("S2P-1P")
    assert T.n_rows == 6 * 20
    assert len(T.basis) == 32 and T.basis == BASIS
    with pytest.raises(InvalidInputError):
        multiplier_set("degree3")


def test_exact_degree_multipliers_cannot_reduce():
    with pytest.raises(DegenerateInstanceError):
        get_template("S2P-1P", mode="exact3")


@pytest.mark.parametrize("label", HARD_LABELS)
def test_truth_is_an_action_matrix_eigenvector(label):
    T = get_template(label)
    for sc in generic_scenes(label, 10, seed=3):
        rows, _ = epipolar_system(sc.features)
        A = T.action_matrix(minors(c_matrix(rows))).matrix
        q = rotation_to_quat(sc.pose.R).vector
        bcd = q[1:] / q[0]
        v = evaluate_monomials(BASIS, bcd)
        assert np.linalg.norm(A @ v - bcd[2] * v) < 1e-9 * np.linalg.norm(A) * np.linalg.norm(v)


@pytest.mark.parametrize("label", HARD_LABELS)
def test_planted_pose(label):
    for seed in range(10):
        sc = planted(label, seed, 30.0, 5.0, shuffle=True)
        poses = solve_episego(sc.features)
        assert 0 < len(poses) <= N_SOLUTIONS
        rot, trans = best_error(poses, sc.pose)
        assert rot < 1e-6 and trans < 1e-6


@pytest.mark.parametrize("label", HARD_LABELS)
def test_candidates_satisfy_the_rows(label):
    for sc in generic_scenes(label, 10, seed=4):
        case = classify(sc.features)
        rows, anchor = epipolar_system(canonicalize(sc.features, case))
        for p in solve_episego(sc.features):
            assert np.max(scaled_residual(rows, p.R, p.meta["alpha"])) < 1e-6
            assert np.allclose(p.t, p.meta["alpha"] * anchor.u - p.R @ anchor.S - anchor.offset)
            assert p.is_valid()


def test_positive_depth_first():
    sc = scene("S2P-1P", 11)
    poses = solve_episego(sc.features)
    flags = [p.meta["alpha"] > 0 for p in poses]
    assert flags == sorted(flags, reverse=True)
    assert all(isinstance(p.meta["low_confidence"], bool) for p in poses)


@pytest.mark.parametrize("label", HARD_LABELS)
def test_identity_pose(label):
    # with t = 0 the views (1, b) and (2, b) coincide: the epipole of one row
    # per point feature is zero at the truth, that row loses its gradient and
    # the root becomes singular; it is still found, to about 1e-6
    sc = scene(label, 3, rotation_max_deg=0.0, translation_range=(0.0, 0.0))
    poses = solve_episego(sc.features)
    tol = 1e-5 if any(f.kind == POINT for f in sc.features[1:]) else 1e-8
    err = min(np.max(np.abs(p.R - np.eye(3))) + np.max(np.abs(p.t)) for p in poses)
    assert err < tol


def test_rejects_easy_cases():
    with pytest.raises(InvalidInputError):
        solve_episego(scene("S3P", 0).features)
    with pytest.raises(InvalidInputError):
        solve_episego(scene("S2P-1P", 0).features, label="S2P-1L")
