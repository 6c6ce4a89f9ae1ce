"""Synthetic stereo scenes and solver sweeps.

Camera 1 sits at the origin looking down +z; the scene lives in a box in
front of it.  Camera 2 is placed at a random distance in a random direction
and rotated about a random axis; poses that see fewer than seven box corners
in camera 2 (view 1) are redrawn.
"""
from __future__ import annotations

import csv
import io
import time
import warnings
from dataclasses import dataclass, field, replace
from itertools import product

import numpy as np

from .cases import HARD_LABELS, LABEL_COUNTS, LABELS, LINE, POINT, FeatureTriplet
from .errors import InfeasibleConfigurationError, InvalidInputError, SegoError
from .geometry import (LineObservation, PointObservation, Pose, ViewId, axis_angle_matrix,
                       pose_errors, view_transform)

MAX_RESAMPLES = 10_000
MIN_VISIBLE_CORNERS = 7


@dataclass(frozen=True)
class ScenarioConfig:
    box: tuple = ((-1.5, 2.5), (-1.5, 2.5), (12.0, 16.0))
    image_side_px: float = 1000.0
    fov_deg: float = 90.0
    noise_sigma_px: float = 0.0
    rotation_min_deg: float = 0.0
    rotation_max_deg: float = 45.0
    translation_range: tuple = (1.0, 10.0)
    line_length_range: tuple = (0.5, 1.5)
    planar: bool = False
    trials: int = 1000
    seed: int = 0

    def __post_init__(self):
        box = tuple(tuple(float(v) for v in r) for r in self.box)
        object.__setattr__(self, "box", box)
        if len(box) != 3 or any(lo >= hi for lo, hi in box):
            raise InvalidInputError("box must have three nonempty intervals")
        if self.noise_sigma_px < 0:
            raise InvalidInputError("noise_sigma_px must be non-negative")
        for name in ("translation_range", "line_length_range"):
            lo, hi = getattr(self, name)
            if lo > hi or lo < 0:
                raise InvalidInputError(f"{name} must be an ordered non-negative interval")
        if not 0 <= self.rotation_min_deg <= self.rotation_max_deg < 180:
            raise InvalidInputError("rotation range must satisfy 0 <= min <= max < 180")
        if not 0 < self.fov_deg < 180 or self.image_side_px <= 0:
            raise InvalidInputError("bad camera intrinsics")
        if self.trials < 1:
            raise InvalidInputError("trials must be positive")

    @property
    def focal_px(self) -> float:
        return 0.5 * self.image_side_px / np.tan(np.radians(self.fov_deg) / 2)

    @property
    def half_extent(self) -> float:
        """Half the image side in normalized coordinates."""
        return 0.5 * self.image_side_px / self.focal_px


@dataclass
class Scene:
    pose: Pose
    features: list
    structure: list  # camera-1 frame: X for points, (P1, P2) for lines
    label: str
    plane: tuple | None = None


@dataclass
class TrialRecord:
    case: str
    solver: str
    rotation_err_deg: float
    translation_rel_err: float
    n_candidates: int
    degenerate: bool
    wall_time_us: float


def _unit(rng) -> np.ndarray:
    v = rng.normal(size=3)
    return v / np.linalg.norm(v)


def _visible(cfg: ScenarioConfig, pose: Pose, view: ViewId, X) -> bool:
    Rv, tv = view_transform(pose, view)
    P = Rv @ X + tv
    if P[2] <= 1e-6:
        return False
    h = cfg.half_extent
    return abs(P[0] / P[2]) <= h and abs(P[1] / P[2]) <= h


def sample_pose(cfg: ScenarioConfig, rng) -> Pose:
    corners = np.array(list(product(*cfg.box)))
    v21 = ViewId(2, 1)
    for _ in range(MAX_RESAMPLES):
        angle = np.radians(rng.uniform(cfg.rotation_min_deg, cfg.rotation_max_deg))
        R = axis_angle_matrix(_unit(rng), angle)
        C = _unit(rng) * rng.uniform(*cfg.translation_range)
        pose = Pose(R, -R @ C)
        if sum(_visible(cfg, pose, v21, X) for X in corners) >= MIN_VISIBLE_CORNERS:
            return pose
    raise InfeasibleConfigurationError("could not place the second camera so that it sees the box")


def _views_for(main_camera: int, rng):
    other = 3 - main_camera
    return (ViewId(main_camera, 1), ViewId(main_camera, 2), ViewId(other, int(rng.integers(1, 3))))


def _noisy(x, sigma, rng):
    return x[:2] + rng.normal(scale=sigma, size=2) if sigma > 0 else x[:2]


def _project(pose, view, X):
    Rv, tv = view_transform(pose, view)
    P = Rv @ X + tv
    return P / P[2]


def _sample_in_box(cfg, rng):
    return np.array([rng.uniform(lo, hi) for lo, hi in cfg.box])


def _on_plane(X, plane):
    if plane is None:
        return X
    c, n = plane
    return X - ((X - c) @ n) * n


def make_point(cfg, pose, views, X, rng) -> FeatureTriplet:
    s = cfg.noise_sigma_px / cfg.focal_px
    obs = [PointObservation(_noisy(_project(pose, v, X), s, rng), v) for v in views]
    return FeatureTriplet(POINT, tuple(obs))


def make_line(cfg, pose, views, P1, P2, rng) -> FeatureTriplet:
    s = cfg.noise_sigma_px / cfg.focal_px
    obs = []
    for v in views:
        p = _noisy(_project(pose, v, P1), s, rng)
        q = _noisy(_project(pose, v, P2), s, rng)
        obs.append(LineObservation.through(p, q, v))
    return FeatureTriplet(LINE, tuple(obs))


def _line_ok(pose, views, P1, P2) -> bool:
    # the main camera must be able to triangulate the line: its direction may
    # not lie in an epipolar plane of that camera's stereo pair
    Rv, tv = view_transform(pose, views[0])
    d = Rv @ (P2 - P1)
    A = Rv @ P1 + tv
    n1 = np.cross(A, d)
    n2 = np.cross(A + np.array([1.0, 0.0, 0.0]), d)
    s = np.linalg.norm(np.cross(n1, n2)) / (np.linalg.norm(n1) * np.linalg.norm(n2))
    return s > 1e-6


def generate_scene(cfg: ScenarioConfig, case, rng, shuffle: bool = True) -> Scene:
    """Random ground-truth pose and three feature triplets of the given case."""
    label = getattr(case, "label", case)
    if label not in LABEL_COUNTS:
        raise InvalidInputError(f"unknown case label {label!r}")
    pose = sample_pose(cfg, rng)
    plane = None
    if cfg.planar:
        plane = (np.array([(lo + hi) / 2 for lo, hi in cfg.box]), _unit(rng))
    p1, l1, p2, l2 = LABEL_COUNTS[label]
    kinds = [(POINT, 1)] * p1 + [(LINE, 1)] * l1 + [(POINT, 2)] * p2 + [(LINE, 2)] * l2
    features, structure = [], []
    for kind, main in kinds:
        for _ in range(MAX_RESAMPLES):
            views = _views_for(main, rng)
            if kind == POINT:
                X = _on_plane(_sample_in_box(cfg, rng), plane)
                if all(_visible(cfg, pose, v, X) for v in views):
                    features.append(make_point(cfg, pose, views, X, rng))
                    structure.append(X)
                    break
            else:
                P1 = _sample_in_box(cfg, rng)
                d = _unit(rng)
                if plane is not None:
                    d = d - (d @ plane[1]) * plane[1]
                    d /= np.linalg.norm(d)
                P1 = _on_plane(P1, plane)
                P2 = P1 + d * rng.uniform(*cfg.line_length_range)
                if (all(_visible(cfg, pose, v, P) for v in views for P in (P1, P2))
                        and _line_ok(pose, views, P1, P2)):
                    features.append(make_line(cfg, pose, views, P1, P2, rng))
                    structure.append((P1, P2))
                    break
        else:
            raise InfeasibleConfigurationError(f"could not place a visible {kind} feature")
    if shuffle:
        order = rng.permutation(3)
        features = [features[i] for i in order]
        structure = [structure[i] for i in order]
    return Scene(pose, features, structure, label, plane)


# ---------------------------------------------------------------- RANSAC scenes

def _random_observation(cfg, kind, view, rng):
    h = cfg.half_extent
    p = rng.uniform(-h, h, size=2)
    if kind == POINT:
        return PointObservation(p, view)
    return LineObservation.through(p, rng.uniform(-h, h, size=2), view)


def generate_correspondences(cfg: ScenarioConfig, n_points: int, n_lines: int, outlier_ratio: float,
                             rng, pose: Pose | None = None):
    """Feature triplets with random main cameras and a share of planted outliers.

    An outlier keeps its two main-camera observations (so it still
    triangulates) and gets a third observation drawn uniformly in the image.
    Returns ``(pose, features, is_outlier)``.
    """
    if not 0 <= outlier_ratio <= 1:
        raise InvalidInputError("outlier_ratio must lie in [0, 1]")
    pose = pose or sample_pose(cfg, rng)
    kinds = [POINT] * n_points + [LINE] * n_lines
    n_out = int(round(outlier_ratio * len(kinds)))
    is_out = np.zeros(len(kinds), dtype=bool)
    is_out[rng.choice(len(kinds), n_out, replace=False)] = True
    features = []
    for kind, out in zip(kinds, is_out):
        for _ in range(MAX_RESAMPLES):
            views = _views_for(int(rng.integers(1, 3)), rng)
            if kind == POINT:
                X = _sample_in_box(cfg, rng)
                if all(_visible(cfg, pose, v, X) for v in views):
                    f = make_point(cfg, pose, views, X, rng)
                    break
            else:
                P1 = _sample_in_box(cfg, rng)
                P2 = P1 + _unit(rng) * rng.uniform(*cfg.line_length_range)
                if (all(_visible(cfg, pose, v, P) for v in views for P in (P1, P2))
                        and _line_ok(pose, views, P1, P2)):
                    f = make_line(cfg, pose, views, P1, P2, rng)
                    break
        else:
            raise InfeasibleConfigurationError(f"could not place a visible {kind} feature")
        if out:
            obs = list(f.observations)
            obs[2] = _random_observation(cfg, kind, obs[2].view, rng)
            f = FeatureTriplet(kind, tuple(obs))
        features.append(f)
    return pose, features, is_out


# ---------------------------------------------------------------- sweeps

SWEEPS = ("noise", "rotation", "translation", "line-length", "planar")
SOLVER_NAMES = ("episego", "ppsego", "easy")
BASE_NOISE_PX = 0.5
CSV_COLUMNS = ("sweep_param", "value", "case", "solver", "trials", "failures", "median_rot_deg",
               "median_trans_rel", "mean_rot_deg", "median_time_us")
TRIAL_COLUMNS = ("sweep_param", "value", "case", "solver", "trial", "rotation_err_deg",
                 "translation_rel_err", "n_candidates", "degenerate", "wall_time_us")


def sweep_values(sweep: str):
    if sweep in ("noise", "planar"):
        return [round(0.1 * k, 1) for k in range(11)]
    if sweep == "rotation":
        return [float(v) for v in range(0, 50, 5)]
    if sweep == "translation":
        return [float(v) for v in range(1, 34, 4)]
    if sweep == "line-length":
        return [0.1, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0]
    raise InvalidInputError(f"unknown sweep {sweep!r}")


def sweep_config(base: ScenarioConfig, sweep: str, value: float) -> ScenarioConfig:
    """Scenario for one sweep value; sweeps other than noise use the base noise level."""
    if sweep == "noise":
        return replace(base, noise_sigma_px=value)
    if sweep == "planar":
        return replace(base, noise_sigma_px=value, planar=True)
    cfg = replace(base, noise_sigma_px=BASE_NOISE_PX)
    if sweep == "rotation":
        return replace(cfg, rotation_min_deg=value, rotation_max_deg=value)
    if sweep == "translation":
        return replace(cfg, translation_range=(value, value))
    if sweep == "line-length":
        return replace(cfg, line_length_range=(0.5 * value, 1.5 * value))
    raise InvalidInputError(f"unknown sweep {sweep!r}")


def solver_handles(solver: str, label: str) -> bool:
    """``easy`` covers the easy labels, the two template solvers the hard ones."""
    if solver not in SOLVER_NAMES + ("ba-reference",):
        raise InvalidInputError(f"unknown solver {solver!r}")
    if solver == "ba-reference":
        return True
    return (solver == "easy") == (label not in HARD_LABELS)


def trial_rng(seed: int, value_idx: int, case: str, trial: int):
    return np.random.default_rng([seed, value_idx, LABELS.index(case), trial])


def run_trial(scene: Scene, solver: str, condition_check: bool = True, keep_candidates: bool = False):
    """Solve one scene; the error is that of the candidate closest to the truth in rotation.

    ``solver="ba-reference"`` refines from the true pose instead (bundle
    adjustment on the noisy observations of the three features).
    """
    from .estimator import refine_pose
    from .solve import solve

    hard = solver if solver in ("episego", "ppsego") else "episego"
    t0 = time.perf_counter()
    try:
        if solver == "ba-reference":
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                poses = [refine_pose(scene.features, scene.pose, mode="ba")]
        else:
            kw = {} if scene.label in HARD_LABELS else {"condition_check": condition_check}
            poses = solve(scene.features, hard, **kw)
        degenerate = False
    except SegoError:
        poses, degenerate = [], True
    wall = (time.perf_counter() - t0) * 1e6
    rot, trans = np.nan, np.nan
    if poses:
        errs = [pose_errors(p, scene.pose) for p in poses]
        best = min(errs, key=lambda e: e.rotation_deg)
        rot, trans = best.rotation_deg, best.translation_rel
    rec = TrialRecord(scene.label, solver, rot, trans, len(poses), degenerate or not poses, wall)
    return (rec, poses) if keep_candidates else rec


def run_cell(cfg: ScenarioConfig, case: str, solver: str, value_idx: int = 0,
             condition_check: bool = True):
    """``cfg.trials`` trials of one (sweep value, case, solver) cell."""
    out = []
    for k in range(cfg.trials):
        scene = generate_scene(cfg, case, trial_rng(cfg.seed, value_idx, case, k))
        out.append(run_trial(scene, solver, condition_check))
    return out


def summarize(records) -> dict:
    rot = np.array([r.rotation_err_deg for r in records], dtype=float)
    trans = np.array([r.translation_rel_err for r in records], dtype=float)
    ok = np.isfinite(rot)
    return {
        "trials": len(records),
        "failures": int(np.sum(~ok)),
        "median_rot_deg": float(np.median(rot[ok])) if ok.any() else np.nan,
        "median_trans_rel": float(np.median(trans[ok])) if ok.any() else np.nan,
        "mean_rot_deg": float(np.mean(rot[ok])) if ok.any() else np.nan,
        "median_time_us": float(np.median([r.wall_time_us for r in records])) if records else np.nan,
    }


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "nan" if not np.isfinite(v) else format(float(v), ".9g")
    return str(v)


def run_sweep(sweep: str, solvers=("all",), cases=("all",), cfg: ScenarioConfig | None = None,
              condition_check: bool = True, timing: bool = False, per_trial: bool = False):
    """Run a sweep and return ``(summary_csv, per_trial_csv or None)`` as strings.

    Wall times are only written with ``timing``; without it the CSV depends
    on nothing but the arguments and is byte-for-byte reproducible.
    """
    cfg = cfg or ScenarioConfig()
    if sweep not in SWEEPS:
        raise InvalidInputError(f"unknown sweep {sweep!r}")
    solvers = list(SOLVER_NAMES) if "all" in solvers else list(solvers)
    cases = list(LABELS) if "all" in cases else list(cases)
    for c in cases:
        if c not in LABELS:
            raise InvalidInputError(f"unknown case label {c!r}")
    cells = [(c, s) for c in cases for s in solvers if solver_handles(s, c)]
    if not cells:
        raise InvalidInputError("no case is handled by the chosen solvers")
    summary, trials = io.StringIO(), io.StringIO()
    w = csv.writer(summary, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    wt = csv.writer(trials, lineterminator="\n")
    wt.writerow(TRIAL_COLUMNS)
    for vi, value in enumerate(sweep_values(sweep)):
        vcfg = sweep_config(cfg, sweep, value)
        for case, solver in cells:
            recs = run_cell(vcfg, case, solver, vi, condition_check)
            s = summarize(recs)
            if not timing:
                s["median_time_us"] = np.nan
            w.writerow([_fmt(x) for x in (sweep, value, case, solver, s["trials"], s["failures"],
                                          s["median_rot_deg"], s["median_trans_rel"], s["mean_rot_deg"],
                                          s["median_time_us"])])
            if per_trial:
                for k, r in enumerate(recs):
                    wt.writerow([_fmt(x) for x in (sweep, value, case, solver, k, r.rotation_err_deg,
                                                   r.translation_rel_err, r.n_candidates, r.degenerate,
                                                   r.wall_time_us if timing else np.nan)])
    return summary.getvalue(), (trials.getvalue() if per_trial else None)
