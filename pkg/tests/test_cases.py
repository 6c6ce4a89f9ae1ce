from itertools import permutations, product

import numpy as np
import pytest

from sego.cases import (HARD_LABELS, LABEL_COUNTS, LABELS, LINE, POINT, FeatureTriplet, Route,
                        canonicalize, classify, solver_route)
from sego.errors import InvalidInputError
from sego.geometry import LineObservation, PointObservation, ViewId


def feature(kind, main, other_view=1):
    views = [ViewId(main, 1), ViewId(main, 2), ViewId(3 - main, other_view)]
    if kind == POINT:
        obs = [PointObservation([0.1 * k, 0.0, 1.0], v) for k, v in enumerate(views)]
    else:
        obs = [LineObservation([1.0, 0.2 * k, 0.1], v) for k, v in enumerate(views)]
    return FeatureTriplet(kind, tuple(obs))


ALL_FEATURES = [(k, m, v) for k in (POINT, LINE) for m in (1, 2) for v in (1, 2)]


def signature(features):
    return [(f.kind, f.main_camera) for f in features]


def test_enumeration_reaches_exactly_the_ten_labels():
    seen = set()
    for combo in product(ALL_FEATURES, repeat=3):
        fs = [feature(*c) for c in combo]
        case = classify(fs)
        seen.add(case.label)
        canon = canonicalize(fs, case)
        counts = [0, 0, 0, 0]
        for f in canon:
            counts[(f.main_camera - 1) * 2 + (f.kind == LINE)] += 1
        assert tuple(counts) == LABEL_COUNTS[case.label]
        if case.label in HARD_LABELS:
            assert canon[0].kind == POINT and canon[0].main_camera == 1
        assert classify(canon) == type(case)(case.label, False, (0, 1, 2))
    assert seen == set(LABELS)


def test_permutation_invariance():
    for combo in product(ALL_FEATURES, repeat=3):
        fs = [feature(*c) for c in combo]
        ref = classify(fs)
        for perm in permutations(range(3)):
            other = [fs[i] for i in perm]
            case = classify(other)
            assert case.label == ref.label and case.swap_cameras == ref.swap_cameras
            assert signature(canonicalize(other, case)) == signature(canonicalize(fs, ref))


def test_three_points_main_one():
    case = classify([feature(POINT, 1), feature(POINT, 1, 2), feature(POINT, 1)])
    assert case.label == "S3P" and not case.swap_cameras


def test_two_points_and_one_point():
    case = classify([feature(POINT, 1), feature(POINT, 1), feature(POINT, 2)])
    assert case.label == "S2P-1P" and not case.swap_cameras


def test_point_main_two_listed_first():
    case = classify([feature(POINT, 2), feature(POINT, 1), feature(POINT, 1)])
    assert case.label == "S2P-1P"
    assert case.feature_order == (1, 2, 0)


def test_mixed_point_line_order():
    case = classify([feature(POINT, 2), feature(POINT, 1), feature(LINE, 1)])
    assert case.label == "S1P1L-1P" and not case.swap_cameras
    assert case.feature_order[0] == 1


def test_reductions_swap_cameras():
    # one point main on camera 1, a point and a line main on camera 2
    case = classify([feature(POINT, 1), feature(POINT, 2), feature(LINE, 2)])
    assert case.label == "S1P1L-1P" and case.swap_cameras
    # one point on camera 1 and two points on camera 2
    case = classify([feature(POINT, 1), feature(POINT, 2), feature(POINT, 2)])
    assert case.label == "S2P-1P" and case.swap_cameras


def test_malformed_triplets():
    v = [ViewId(1, 1), ViewId(1, 1), ViewId(2, 1)]
    with pytest.raises(InvalidInputError):
        FeatureTriplet(POINT, tuple(PointObservation([0, 0, 1], w) for w in v))
    mixed = (PointObservation([0, 0, 1], ViewId(1, 1)), PointObservation([0, 0, 1], ViewId(1, 2)),
             LineObservation([1, 0, 0], ViewId(2, 1)))
    with pytest.raises(InvalidInputError):
        FeatureTriplet(POINT, mixed)
    with pytest.raises(InvalidInputError):
        classify([feature(POINT, 1), feature(POINT, 1)])


def test_swapped_exchanges_cameras():
    f = feature(LINE, 1, 2)
    g = f.swapped()
    assert g.main_camera == 2 and g.missing_view == ViewId(1, 1)
    assert np.allclose(g.other_observation.l, f.other_observation.l)


def test_dict_round_trip():
    f = feature(POINT, 2, 1)
    g = FeatureTriplet.from_dict(f.to_dict())
    assert g.kind == f.kind and signature([g]) == signature([f])
    assert all(np.allclose(a.x, b.x) for a, b in zip(f.observations, g.observations))


def test_solver_routes():
    assert solver_route("S3L") == Route.EASY_LINES
    assert solver_route("S2L-1L") == Route.EASY_LINES
    assert solver_route("S3P") == Route.EASY_GP3P
    assert solver_route("S2P-1P", "episego") == Route.HARD_EPISEGO
    assert solver_route("S2P-1P", "ppsego") == Route.HARD_PPSEGO
    with pytest.raises(InvalidInputError):
        solver_route("S4P")
