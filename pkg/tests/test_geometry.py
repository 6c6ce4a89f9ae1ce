import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from sego.errors import CheiralityError, DegenerateTriangulationError, InvalidInputError
from sego.geometry import (LineObservation, PointObservation, Pose, Quaternion, StereoRig, ViewId,
                           axis_angle_matrix, point_line_distance, pose_errors, project_line,
                           project_point, quat_to_rotation, rotation_to_quat, triangulate_line,
                           triangulate_point)

V11, V12, V21, V22 = ViewId(1, 1), ViewId(1, 2), ViewId(2, 1), ViewId(2, 2)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
quats = arrays(float, 4, elements=finite).filter(lambda q: np.linalg.norm(q) > 1e-3)


def random_pose(rng, angle_deg=30.0, dist=3.0):
    R = axis_angle_matrix(rng.normal(size=3), np.radians(angle_deg))
    t = rng.normal(size=3)
    return Pose(R, dist * t / np.linalg.norm(t))


def test_identity_quaternion():
    assert np.array_equal(quat_to_rotation(Quaternion(1, 0, 0, 0)), np.eye(3))


def test_quarter_turn_about_x():
    s = np.sqrt(0.5)
    R = quat_to_rotation(Quaternion(s, s, 0, 0))
    assert abs(R[1, 1]) < 1e-15
    assert R[1, 2] == pytest.approx(-1.0, abs=1e-15)


def test_zero_quaternion_rejected():
    with pytest.raises(InvalidInputError):
        quat_to_rotation(np.zeros(4))


@given(quats)
def test_rotation_is_orthonormal(q):
    R = quat_to_rotation(q)
    assert np.allclose(R.T @ R, np.eye(3), atol=1e-14)
    assert np.linalg.det(R) == pytest.approx(1.0, abs=1e-13)


@given(quats)
def test_quaternion_round_trip(q):
    can = Quaternion(*q).canonical()
    back = rotation_to_quat(quat_to_rotation(q))
    if abs(can.a) < 1e-12:
        # the rotation cannot tell the sign of a vanishing scalar part
        assert min(np.abs(back.vector - can.vector).max(), np.abs(back.vector + can.vector).max()) < 1e-12
    else:
        assert np.allclose(back.vector, can.vector, atol=1e-12)


def test_canonical_sign():
    q = Quaternion(0.0, -1.0, 2.0, 0.0).canonical()
    assert q.b > 0 and q.norm() == pytest.approx(1.0)
    assert Quaternion(-1, 0, 0, 0).canonical().a == 1.0


def test_triangulate_point_depth_ten():
    # disparity 0.1 with unit baseline: depth 10; the point (0, 0, 10) sits at
    # x = (0, 0, 1) in view 1 and (X + b) / z = (0.1, 0, 1) in view 2
    S = triangulate_point(PointObservation([0, 0, 1], V11), PointObservation([0.1, 0, 1], V12))
    assert np.allclose(S, [0, 0, 10], atol=1e-12)


def test_triangulate_point_zero_disparity():
    with pytest.raises(DegenerateTriangulationError):
        triangulate_point(PointObservation([0.2, 0.1, 1], V11), PointObservation([0.2, 0.1, 1], V12))


def test_triangulate_point_needs_one_camera():
    with pytest.raises(InvalidInputError):
        triangulate_point(PointObservation([0, 0, 1], V11), PointObservation([0, 0, 1], V21))


def test_triangulate_point_round_trip(rng):
    pose = random_pose(rng)
    for _ in range(50):
        X = rng.uniform([-2, -2, 8], [2, 2, 16])
        for cam in (1, 2):
            if cam == 1:
                Xc = X
            else:
                Xc = pose.R @ X + pose.t
                if Xc[2] < 1:
                    continue
            x1 = project_point(pose, ViewId(cam, 1), X)
            x2 = project_point(pose, ViewId(cam, 2), X)
            assert np.allclose(triangulate_point(x1, x2), Xc, atol=1e-10)


def test_project_point_examples():
    I = Pose.identity()
    assert np.allclose(project_point(I, V11, [0, 0, 5]).x, [0, 0, 1])
    assert np.allclose(project_point(I, V12, [0, 0, 5]).x, [0.2, 0, 1])
    with pytest.raises(CheiralityError):
        project_point(I, V11, [1, 1, 0])
    with pytest.raises(CheiralityError):
        project_point(I, V11, [0, 0, -2])


def test_project_point_camera_two():
    R = axis_angle_matrix([0, 1, 0], 0.2)
    pose = Pose(R, [0.3, -0.1, 0.5])
    X = np.array([0.5, 0.2, 9.0])
    P = R @ X + pose.t + [1, 0, 0]
    assert np.allclose(project_point(pose, V22, X).x, P / P[2])


def test_triangulate_line_round_trip(rng):
    pose = random_pose(rng)
    for _ in range(50):
        P1 = rng.uniform([-2, -2, 10], [2, 2, 14])
        P2 = P1 + rng.normal(size=3)
        for cam in (1, 2):
            l1 = project_line(pose, ViewId(cam, 1), P1, P2)
            l2 = project_line(pose, ViewId(cam, 2), P1, P2)
            if np.linalg.norm(np.cross(l1.l / np.linalg.norm(l1.l), l2.l / np.linalg.norm(l2.l))) < 0.05:
                continue  # nearly an epipolar plane: ill-conditioned, not generic
            X1, X2 = triangulate_line(l1, l2)
            assert np.linalg.norm(X2 - X1) == pytest.approx(1.0, abs=1e-12)
            for X in (X1, X2):
                # on both back-projected planes
                assert abs(l1.l @ X) < 1e-10
                assert abs(l2.l @ (X + [1, 0, 0])) < 1e-10
            Q1, Q2 = (P1, P2) if cam == 1 else (pose.R @ P1 + pose.t, pose.R @ P2 + pose.t)
            assert point_line_distance(X1, Q1, Q2) < 1e-9
            assert point_line_distance(X2, Q1, Q2) < 1e-9


def test_triangulate_line_in_epipolar_plane():
    # a line parallel to the baseline through the optical axis: both views see y = 0
    l1 = LineObservation([0, 1, 0], V11)
    l2 = LineObservation([0, 1, 0], V12)
    with pytest.raises(DegenerateTriangulationError):
        triangulate_line(l1, l2)


def test_line_through_points():
    l = LineObservation.through([0, 0], [1, 1], V11)
    assert abs(l.l @ [0.5, 0.5, 1]) < 1e-15
    assert np.hypot(*l.l[:2]) == pytest.approx(1.0)
    with pytest.raises(InvalidInputError):
        LineObservation([0, 0, 1], V11)


def test_observation_validation():
    with pytest.raises(InvalidInputError):
        PointObservation([0, 0, 0], V11)
    with pytest.raises(InvalidInputError):
        PointObservation([np.nan, 0, 1], V11)
    with pytest.raises(InvalidInputError):
        ViewId(3, 1)
    with pytest.raises(InvalidInputError):
        StereoRig(np.array([2.0, 0, 0]))


def test_pose_errors():
    rng = np.random.default_rng(1)
    gt = random_pose(rng)
    assert pose_errors(gt, gt)[:2] == (0.0, 0.0)
    R1 = axis_angle_matrix(rng.normal(size=3), np.radians(1.0)) @ gt.R
    assert pose_errors(Pose(R1, gt.t), gt).rotation_deg == pytest.approx(1.0, abs=1e-9)
    assert pose_errors(Pose(gt.R, 1.1 * gt.t), gt).translation_rel == pytest.approx(0.1, abs=1e-12)


def test_pose_errors_zero_translation():
    e = pose_errors(Pose(np.eye(3), [0.3, 0, 0.4]), Pose.identity())
    assert e.translation_absolute and e.translation_rel == pytest.approx(0.5)


@given(quats, quats)
def test_rotation_error_symmetric(q1, q2):
    p1 = Pose(quat_to_rotation(q1), np.ones(3))
    p2 = Pose(quat_to_rotation(q2), np.ones(3))
    assert pose_errors(p1, p2).rotation_deg == pytest.approx(pose_errors(p2, p1).rotation_deg, abs=1e-9)


@given(quats, arrays(float, 3, elements=finite), st.integers(0, 2**31))
def test_project_triangulate_project(q, t, seed):
    pose = Pose(quat_to_rotation(q), t)
    X = np.random.default_rng(seed).uniform([-1, -1, 5], [1, 1, 20])
    try:
        obs = {v: project_point(pose, v, X) for v in (V11, V12, V21, V22)}
    except CheiralityError:
        return
    for cam in (1, 2):
        Xc = triangulate_point(obs[ViewId(cam, 1)], obs[ViewId(cam, 2)])
        if cam == 2:
            Xc = pose.R.T @ (Xc - pose.t)
        for v, o in obs.items():
            assert np.allclose(project_point(pose, v, Xc).x, o.x, atol=1e-10 * max(1, np.linalg.norm(Xc)))


def test_pose_inverse_and_scale(rng):
    p = random_pose(rng)
    q = p.inverse()
    assert np.allclose(q.R @ p.R, np.eye(3))
    assert np.allclose(q.R @ p.t + q.t, 0)
    assert np.allclose(p.scaled(0.54).t, 0.54 * p.t)
    assert p.is_valid()


def test_triangulate_segment_recovers_endpoints(rng):
    from sego.geometry import triangulate_segment
    pose = random_pose(rng)
    for _ in range(30):
        P1 = rng.uniform([-2, -2, 10], [2, 2, 14])
        P2 = P1 + rng.normal(size=3)
        l1 = project_line(pose, V11, P1, P2)
        l2 = project_line(pose, V12, P1, P2)
        if np.linalg.norm(np.cross(l1.l / np.linalg.norm(l1.l), l2.l / np.linalg.norm(l2.l))) < 0.05:
            continue
        X1, X2 = triangulate_segment(l1, l2)
        assert np.allclose(X1, P1, atol=1e-8) and np.allclose(X2, P2, atol=1e-8)
        # without endpoints it falls back to two points on the infinite line
        Y1, Y2 = triangulate_segment(LineObservation(l1.l, V11), l2)
        assert point_line_distance(Y1, P1, P2) < 1e-9 and point_line_distance(Y2, P1, P2) < 1e-9


def test_line_endpoints_validation():
    with pytest.raises(InvalidInputError):
        LineObservation([1, 0, 0], V11, [[0, 0]])
