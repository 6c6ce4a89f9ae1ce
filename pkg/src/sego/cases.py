"""Feature triplets and the taxonomy of three-feature minimal configurations.

A label ``S{p}P{l}L-{p'}P{l'}L`` counts the points/lines whose *main camera*
(the stereo camera observing them in both views) is camera 1, then camera 2.
Empty groups are dropped, so ``S2P-1L`` means two points main on camera 1
and one line main on camera 2.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

from .errors import InvalidInputError
from .geometry import (LineObservation, PointObservation, StereoRig, ViewId, triangulate_line,
                       triangulate_point)

POINT = "point"
LINE = "line"

# (points@1, lines@1, points@2, lines@2) -> label
_CANONICAL = {
    (3, 0, 0, 0): "S3P",
    (2, 1, 0, 0): "S2P1L",
    (1, 2, 0, 0): "S1P2L",
    (0, 3, 0, 0): "S3L",
    (0, 2, 0, 1): "S2L-1L",
    (2, 0, 0, 1): "S2P-1L",
    (1, 1, 1, 0): "S1P1L-1P",
    (1, 0, 0, 2): "S1P-2L",
    (1, 1, 0, 1): "S1P1L-1L",
    (2, 0, 1, 0): "S2P-1P",
}
LABELS = tuple(_CANONICAL.values())
LABEL_COUNTS = {v: k for k, v in _CANONICAL.items()}
HARD_LABELS = ("S2P-1L", "S1P1L-1P", "S1P-2L", "S1P1L-1L", "S2P-1P")
LINE_LABELS = ("S3L", "S2L-1L")
GP3P_LABELS = ("S3P", "S2P1L", "S1P2L")
EASY_LABELS = GP3P_LABELS + LINE_LABELS


class Route(str, Enum):
    HARD_EPISEGO = "hard-episego"
    HARD_PPSEGO = "hard-ppsego"
    EASY_LINES = "easy-lines"
    EASY_GP3P = "easy-gp3p"


@dataclass(frozen=True, eq=False)
class FeatureTriplet:
    """One point or line feature observed in exactly three of the four views."""

    kind: str
    observations: tuple

    def __post_init__(self):
        obs = tuple(self.observations)
        object.__setattr__(self, "observations", obs)
        if self.kind not in (POINT, LINE):
            raise InvalidInputError(f"unknown feature kind {self.kind!r}")
        if len(obs) != 3:
            raise InvalidInputError("a feature triplet needs exactly three observations")
        cls = PointObservation if self.kind == POINT else LineObservation
        if not all(isinstance(o, cls) for o in obs):
            raise InvalidInputError("observations must all match the feature kind")
        views = {o.view for o in obs}
        if len(views) != 3:
            raise InvalidInputError("observations must come from three distinct views")

    @property
    def main_camera(self) -> int:
        cams = [o.view.camera for o in self.observations]
        return 1 if cams.count(1) == 2 else 2

    def main_observations(self):
        """The (view 1, view 2) observations of the main camera."""
        m = self.main_camera
        pair = sorted((o for o in self.observations if o.view.camera == m), key=lambda o: o.view.view)
        return pair[0], pair[1]

    @property
    def other_observation(self):
        m = self.main_camera
        return next(o for o in self.observations if o.view.camera != m)

    @property
    def missing_view(self) -> ViewId:
        present = {o.view for o in self.observations}
        return next(ViewId(c, v) for c in (1, 2) for v in (1, 2) if ViewId(c, v) not in present)

    def triangulate(self, rig: StereoRig | None = None):
        """Structure in the main camera's frame: ``X`` for points, ``(X1, X2)`` for lines."""
        o1, o2 = self.main_observations()
        if self.kind == POINT:
            return triangulate_point(o1, o2, rig)
        return triangulate_line(o1, o2, rig)

    def swapped(self) -> "FeatureTriplet":
        """The same feature with the roles of the two stereo cameras exchanged."""
        obs = tuple(replace(o, view=ViewId(3 - o.view.camera, o.view.view)) for o in self.observations)
        return FeatureTriplet(self.kind, obs)

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureTriplet":
        kind = d["kind"]
        obs = []
        for o in d["observations"]:
            v = ViewId(int(o["camera"]), int(o["view"]))
            obs.append(PointObservation(o["x"], v) if kind == POINT
                       else LineObservation(o["l"], v, o.get("endpoints")))
        return cls(kind, tuple(obs))

    def to_dict(self) -> dict:
        key = "x" if self.kind == POINT else "l"
        obs = []
        for o in self.observations:
            d = {"camera": o.view.camera, "view": o.view.view, key: [float(v) for v in getattr(o, key)]}
            if self.kind == LINE and o.endpoints is not None:
                d["endpoints"] = o.endpoints.tolist()
            obs.append(d)
        return {"kind": self.kind, "observations": obs}


@dataclass(frozen=True)
class CaseLabel:
    label: str
    swap_cameras: bool
    feature_order: tuple

    @property
    def is_hard(self) -> bool:
        return self.label in HARD_LABELS


def _counts(features, swap: bool):
    c = [0, 0, 0, 0]
    for f in features:
        cam = f.main_camera if not swap else 3 - f.main_camera
        c[(cam - 1) * 2 + (0 if f.kind == POINT else 1)] += 1
    return tuple(c)


def classify(features) -> CaseLabel:
    features = list(features)
    if len(features) != 3 or not all(isinstance(f, FeatureTriplet) for f in features):
        raise InvalidInputError("classify needs exactly three FeatureTriplet objects")
    for swap in (False, True):
        label = _CANONICAL.get(_counts(features, swap))
        if label is not None:
            break
    else:  # pragma: no cover - the table is exhaustive
        raise InvalidInputError("configuration outside the case table")

    def rank(i):
        f = features[i]
        cam = f.main_camera if not swap else 3 - f.main_camera
        return (cam, 0 if f.kind == POINT else 1, i)

    order = tuple(sorted(range(3), key=rank))
    return CaseLabel(label, swap, order)


def canonicalize(features, case: CaseLabel | None = None):
    """Apply a label's camera swap and feature order; returns the new triplet list."""
    case = case or classify(features)
    out = [features[i] for i in case.feature_order]
    if case.swap_cameras:
        out = [f.swapped() for f in out]
    return out


def solver_route(case: CaseLabel | str, hard_solver: str = "episego") -> Route:
    label = case.label if isinstance(case, CaseLabel) else case
    if label not in LABELS:
        raise InvalidInputError(f"unknown case label {label!r}")
    if label in LINE_LABELS:
        return Route.EASY_LINES
    if label in GP3P_LABELS:
        return Route.EASY_GP3P
    if hard_solver == "ppsego":
        return Route.HARD_PPSEGO
    if hard_solver == "episego":
        return Route.HARD_EPISEGO
    raise InvalidInputError(f"unknown hard-case solver {hard_solver!r}")
