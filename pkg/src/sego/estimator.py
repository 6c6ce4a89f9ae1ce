"""Reprojection scoring, RANSAC over minimal triplet samples and pose refinement.

Residuals are in pixels: normalized image distances times ``focal_px``.  A
point residual is the distance between the observed and the reprojected
point.  A line residual is the larger distance of the two reprojected
segment ends to the observed image line; the segment is triangulated from
the observed endpoints in the main camera's left view when available.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .cases import LINE, POINT, FeatureTriplet
from .errors import EstimationFailedError, InvalidInputError, SegoError
from .geometry import Pose, StereoRig, ViewId, skew, so3_exp, triangulate_point, triangulate_segment

FOCAL_PX = 500.0
SOLVER_CHOICES = ("episego", "ppsego", "auto")


@dataclass(frozen=True)
class FourViewCorrespondence:
    """A point or line seen in all four views.

    Scored by triangulating with camera 1 and reprojecting into both views of
    camera 2.
    """

    kind: str
    observations: tuple

    def __post_init__(self):
        obs = tuple(self.observations)
        object.__setattr__(self, "observations", obs)
        if self.kind not in (POINT, LINE):
            raise InvalidInputError(f"unknown feature kind {self.kind!r}")
        if len(obs) != 4 or len({o.view for o in obs}) != 4:
            raise InvalidInputError("a four-view correspondence needs all four views")

    def observation(self, camera: int, view: int):
        return next(o for o in self.observations if o.view == ViewId(camera, view))


@dataclass(frozen=True)
class RansacConfig:
    threshold_px: float = 5.0
    confidence: float = 0.999
    initial_outlier_ratio: float = 0.5
    max_iterations: int = 1000
    seed: int = 0
    focal_px: float = FOCAL_PX
    refine: bool = True

    def __post_init__(self):
        if not 0 < self.confidence < 1:
            raise InvalidInputError("confidence must lie in (0, 1)")
        if not self.threshold_px > 0:
            raise InvalidInputError("threshold_px must be positive")
        if not 0 <= self.initial_outlier_ratio < 1:
            raise InvalidInputError("initial_outlier_ratio must lie in [0, 1)")
        if self.max_iterations < 1:
            raise InvalidInputError("max_iterations must be positive")


@dataclass
class Hypothesis:
    pose: Pose
    inliers: tuple
    score: int
    mean_inlier_residual: float
    iterations: int = 0
    residuals: np.ndarray = field(default=None, repr=False)


# ---------------------------------------------------------------- residual terms

@dataclass
class _Terms:
    """Flattened reprojection terms.

    Each term is one structure point ``X`` (in the frame of camera
    ``main``) seen in a view of camera ``cam`` with offset ``off``.  ``obs``
    is the observed point (kind point) or line (kind line).  ``owner`` maps
    terms to correspondences.
    """

    owner: np.ndarray
    main: np.ndarray
    cam: np.ndarray
    X: np.ndarray
    off: np.ndarray
    is_line: np.ndarray
    obs: np.ndarray
    param: np.ndarray  # index of the structure point among all structure points
    n_owner: int
    bad: np.ndarray  # correspondences whose triangulation failed


def _structure(c, rig):
    """Structure points (main frame), main camera and target observations of one correspondence."""
    if isinstance(c, FourViewCorrespondence):
        o1, o2 = c.observation(1, 1), c.observation(1, 2)
        if c.kind == POINT:
            Xs = [triangulate_point(o1, o2, rig)]
        else:
            Xs = list(triangulate_segment(o1, o2, rig))
        return Xs, 1, [c.observation(2, 1), c.observation(2, 2)]
    if not isinstance(c, FeatureTriplet):
        raise InvalidInputError("correspondences must be FeatureTriplet or FourViewCorrespondence")
    if c.kind == POINT:
        Xs = [c.triangulate(rig)]
    else:
        Xs = list(triangulate_segment(*c.main_observations(), rig))
    return Xs, c.main_camera, [c.other_observation]


def build_terms(correspondences, rig: StereoRig | None = None, all_views: bool = False) -> _Terms:
    """Reprojection terms for scoring (other views only) or bundle adjustment (all views)."""
    rows = {k: [] for k in ("owner", "main", "cam", "X", "off", "is_line", "obs", "param")}
    bad = []
    n_param = 0
    for i, c in enumerate(correspondences):
        try:
            Xs, main, targets = _structure(c, rig)
        except SegoError:
            bad.append(i)
            continue
        if not all(np.all(np.isfinite(X)) and X[2] > 0 for X in Xs):
            bad.append(i)
            continue
        if all_views:
            targets = list(c.observations)
        is_line = c.kind == LINE
        for j, X in enumerate(Xs):
            for o in targets:
                rows["owner"].append(i)
                rows["main"].append(main)
                rows["cam"].append(o.view.camera)
                rows["X"].append(X)
                rows["off"].append(o.view.offset(rig))
                rows["is_line"].append(is_line)
                rows["obs"].append(o.l if is_line else o.x)
                rows["param"].append(n_param + j)
        n_param += len(Xs)
    n = len(rows["owner"])
    arr = {k: np.array(v) if n else np.zeros((0, 3)) for k, v in rows.items()}
    if n == 0:
        arr = dict(owner=np.zeros(0, int), main=np.zeros(0, int), cam=np.zeros(0, int), X=np.zeros((0, 3)),
                   off=np.zeros((0, 3)), is_line=np.zeros(0, bool), obs=np.zeros((0, 3)), param=np.zeros(0, int))
    return _Terms(n_owner=len(correspondences), bad=np.array(bad, dtype=int), **arr)


def _camera_points(T: _Terms, R, t, X=None):
    """Points in the observing view's frame."""
    X = T.X if X is None else X
    P = X + T.off
    m12 = (T.main == 1) & (T.cam == 2)
    m21 = (T.main == 2) & (T.cam == 1)
    P[m12] = X[m12] @ R.T + t + T.off[m12]
    P[m21] = (X[m21] - t) @ R + T.off[m21]
    return P


def _term_errors(T: _Terms, P):
    """Unsigned error of each term in normalized units.

    Points behind the camera score ``inf``.  Line terms only need a nonzero
    depth: incidence with the image line is projective, and the two
    triangulated points of a line need not lie on its visible part.
    """
    z = P[:, 2]
    err = np.full(len(P), np.inf)
    ok = np.where(T.is_line, np.abs(z) > 1e-12, z > 1e-12)
    proj = P[ok] / z[ok, None]
    line = T.is_line[ok]
    e = np.empty(ok.sum())
    e[line] = np.abs(np.sum(T.obs[ok][line] * proj[line], axis=1))
    e[~line] = np.linalg.norm(proj[~line, :2] - T.obs[ok][~line, :2], axis=1)
    err[ok] = e
    return err


def residuals_from_terms(T: _Terms, pose: Pose, focal_px: float = FOCAL_PX) -> np.ndarray:
    out = np.zeros(T.n_owner)
    if len(T.owner):
        np.maximum.at(out, T.owner, _term_errors(T, _camera_points(T, pose.R, pose.t)))
    out *= focal_px
    out[T.bad] = np.inf
    return out


def reprojection_residual(corr, pose: Pose, rig: StereoRig | None = None,
                          focal_px: float = FOCAL_PX) -> float:
    """Reprojection error (px) of one correspondence; ``inf`` on triangulation or cheirality failure."""
    return float(residuals_from_terms(build_terms([corr], rig), pose, focal_px)[0])


def reprojection_residuals(correspondences, pose: Pose, rig: StereoRig | None = None,
                           focal_px: float = FOCAL_PX) -> np.ndarray:
    return residuals_from_terms(build_terms(correspondences, rig), pose, focal_px)


# ---------------------------------------------------------------- RANSAC

def _iteration_bound(w: float, p: float, cap: int) -> int:
    if w >= 1.0:
        return 1
    if w <= 0.0:
        return cap
    denom = math.log(1.0 - w ** 3)
    if denom == 0.0:  # pragma: no cover - w tiny
        return cap
    return int(min(cap, math.ceil(math.log(1.0 - p) / denom)))


def _score(res, tau):
    inl = np.flatnonzero(res <= tau)
    return inl, (float(np.mean(res[inl])) if inl.size else np.inf)


def ransac_estimate(correspondences, solver: str = "auto", cfg: RansacConfig | None = None,
                    rig: StereoRig | None = None) -> Hypothesis:
    """Best pose over minimal samples of three correspondences.

    Every candidate pose of every sample is scored on all correspondences;
    the best keeps the most inliers, ties broken by the mean inlier residual.
    Hard cases go to ``solver`` (``"auto"`` means PPSEgo).  With
    ``cfg.refine`` the winner is refined on its inliers and rescored.
    """
    from .solve import solve

    cfg = cfg or RansacConfig()
    if solver not in SOLVER_CHOICES:
        raise InvalidInputError(f"unknown solver {solver!r}")
    hard = "ppsego" if solver == "auto" else solver
    corr = list(correspondences)
    triplets = [i for i, c in enumerate(corr) if isinstance(c, FeatureTriplet)]
    if len(triplets) < 3:
        raise EstimationFailedError("need at least three feature triplets")
    terms = build_terms(corr, rig)
    rng = np.random.default_rng(cfg.seed)
    tau = cfg.threshold_px
    best = None
    bound = _iteration_bound(1.0 - cfg.initial_outlier_ratio, cfg.confidence, cfg.max_iterations)
    it = 0
    while it < bound:
        it += 1
        sample = rng.choice(len(triplets), 3, replace=False)
        try:
            poses = solve([corr[triplets[k]] for k in sample], hard, rig)
        except SegoError:
            continue
        for pose in poses:
            res = residuals_from_terms(terms, pose, cfg.focal_px)
            inl, mean = _score(res, tau)
            if best is None or (inl.size, -mean) > (best.score, -best.mean_inlier_residual):
                best = Hypothesis(pose, tuple(int(i) for i in inl), int(inl.size), mean, it, res)
        if best is not None and best.score:
            bound = min(bound, _iteration_bound(best.score / len(corr), cfg.confidence, cfg.max_iterations))
    if best is None or best.score < 3:
        raise EstimationFailedError("no hypothesis with at least three inliers")
    best.iterations = it
    if cfg.refine:
        pose = refine_pose(corr, best.pose, best.inliers, rig=rig, focal_px=cfg.focal_px)
        res = residuals_from_terms(terms, pose, cfg.focal_px)
        inl, mean = _score(res, tau)
        if inl.size >= best.score:
            best = Hypothesis(pose, tuple(int(i) for i in inl), int(inl.size), mean, it, res)
    return best


# ---------------------------------------------------------------- refinement

def _term_residuals_and_jacobian(T: _Terms, R, t, X, blocks=None):
    """Signed residuals (normalized units) and Jacobians w.r.t. pose and structure.

    Pose update: ``R <- exp([w]) R``, ``t <- t + dt``.  Points give two
    residuals per term, lines one.  ``blocks`` (structure mode) lists, per
    structure point, its column offset and the basis ``B`` of its update
    ``X <- X + B s``.
    """
    P = _camera_points(T, R, t, X)
    z = P[:, 2]
    n = len(P)
    # dP/d(w, dt) and dP/dX, per term
    Jp = np.zeros((n, 3, 6))
    JX = np.broadcast_to(np.eye(3), (n, 3, 3)).copy()
    m12 = (T.main == 1) & (T.cam == 2)
    m21 = (T.main == 2) & (T.cam == 1)
    if np.any(m12):
        RX = X[m12] @ R.T
        Jp[m12, :, :3] = -np.array([skew(v) for v in RX])
        Jp[m12, :, 3:] = np.eye(3)
        JX[m12] = R
    if np.any(m21):
        D = X[m21] - t
        Jp[m21, :, :3] = np.array([R.T @ skew(v) for v in D])
        Jp[m21, :, 3:] = -R.T
        JX[m21] = R.T
    rows_r, rows_J, rows_S = [], [], []
    n_cols = sum(B.shape[1] for _, B in blocks) if blocks is not None else 0
    zi = 1.0 / z
    for k in range(n):
        if T.is_line[k]:
            l = T.obs[k]
            r = np.array([l @ P[k] * zi[k]])
            dP = (l * zi[k] - (l @ P[k]) * zi[k] ** 2 * np.array([0.0, 0.0, 1.0]))[None]
        else:
            r = P[k, :2] * zi[k] - T.obs[k, :2]
            dP = np.array([[zi[k], 0.0, -P[k, 0] * zi[k] ** 2], [0.0, zi[k], -P[k, 1] * zi[k] ** 2]])
        rows_r.append(r)
        rows_J.append(dP @ Jp[k])
        if blocks is not None:
            S = np.zeros((len(r), n_cols))
            off, B = blocks[T.param[k]]
            S[:, off:off + B.shape[1]] = dP @ JX[k] @ B
            rows_S.append(S)
    r = np.concatenate(rows_r)
    J = np.vstack(rows_J)
    if blocks is not None:
        J = np.hstack([J, np.vstack(rows_S)])
    return r, J


def refine_pose(correspondences, initial: Pose, inliers=None, mode: str = "pose",
                rig: StereoRig | None = None, focal_px: float = FOCAL_PX,
                max_iterations: int = 100, rel_tol: float = 1e-12) -> Pose:
    """Levenberg-Marquardt on the squared reprojection residuals of the inliers.

    ``mode="pose"`` keeps the structure triangulated by each feature's main
    camera and fits the six pose parameters to the remaining observations.
    ``mode="ba"`` also optimizes every structure point against all three
    observations of each feature (the bundle adjustment reference).  A line
    has four degrees of freedom: each of its two points moves in the plane
    orthogonal to the initial direction, so the points cannot slide along
    the line or merge.

    The result's ``meta`` records ``iterations``, ``cost`` and ``converged``;
    if no step ever reduced the cost after repeated damping the initial pose
    is returned with ``meta["warning"] = "diverged"``.
    """
    if mode not in ("pose", "ba"):
        raise InvalidInputError(f"unknown refinement mode {mode!r}")
    corr = list(correspondences)
    idx = list(range(len(corr))) if inliers is None else [int(i) for i in inliers]
    if len(idx) < 3:
        raise InvalidInputError("refinement needs at least three inliers")
    sub = [corr[i] for i in idx]
    T = build_terms(sub, rig, all_views=(mode == "ba"))
    if T.bad.size:
        keep = np.setdiff1d(np.arange(len(sub)), T.bad)
        T = build_terms([sub[i] for i in keep], rig, all_views=(mode == "ba"))
    with_s = mode == "ba"
    n_struct = int(T.param.max()) + 1 if len(T.param) else 0
    X0 = np.zeros((n_struct, 3))
    X0[T.param] = T.X
    blocks = None
    if with_s:
        on_line = np.zeros(n_struct, dtype=bool)
        on_line[T.param[T.is_line]] = True
        blocks, off, j = [], 0, 0
        while j < n_struct:
            if on_line[j]:
                # the two points of a line are consecutive
                d = X0[j + 1] - X0[j]
                B = np.linalg.svd(d[None])[2][1:].T
                blocks += [(off, B), (off + 2, B)]
                off, j = off + 4, j + 2
            else:
                blocks.append((off, np.eye(3)))
                off, j = off + 3, j + 1

    def evaluate(R, t, Xs):
        r, J = _term_residuals_and_jacobian(T, R, t, Xs[T.param], blocks)
        return r * focal_px, J * focal_px

    def update_structure(Xs, ds):
        return np.array([X + B @ ds[o:o + B.shape[1]] for X, (o, B) in zip(Xs, blocks)])

    R, t, Xs = initial.R.copy(), initial.t.copy(), X0.copy()
    r, J = evaluate(R, t, Xs)
    cost = float(r @ r)
    if not np.isfinite(cost):
        return Pose(initial.R, initial.t, {"iterations": 0, "cost": cost, "converged": False,
                                           "warning": "diverged"})
    lam = 1e-3 * max(float(np.mean(np.sum(J * J, axis=0))), 1e-12)
    accepted, converged, fails, it = 0, cost == 0.0, 0, 0
    while not converged and it < max_iterations:
        it += 1
        H = J.T @ J
        g = J.T @ r
        step = np.linalg.solve(H + lam * np.diag(np.maximum(np.diag(H), 1e-12)), -g)
        Rn = so3_exp(step[:3]) @ R
        tn = t + step[3:6]
        Xn = update_structure(Xs, step[6:]) if with_s else Xs
        rn, Jn = evaluate(Rn, tn, Xn)
        cn = float(rn @ rn)
        if np.isfinite(cn) and cn < cost:
            rel = (cost - cn) / cost
            R, t, Xs, r, J, cost = Rn, tn, Xn, rn, Jn, cn
            lam = max(lam / 10.0, 1e-15)
            accepted += 1
            fails = 0
            converged = rel < rel_tol or cost == 0.0
        else:
            lam *= 10.0
            fails += 1
            if fails >= 10:
                # no progress at all: fine at a stationary point, else a failure
                dx = np.linalg.lstsq(H, -g, rcond=None)[0]
                if accepted == 0 and -(g @ dx) > 1e-10 * cost + 1e-20:
                    warnings.warn("pose refinement made no progress", RuntimeWarning, stacklevel=2)
                    return Pose(initial.R, initial.t, {"iterations": it, "cost": cost, "converged": False,
                                                       "warning": "diverged"})
                converged = True
    U, _, Vt = np.linalg.svd(R)
    meta = {"iterations": accepted, "cost": cost, "converged": converged}
    if with_s:
        meta["structure"] = Xs
    return Pose(U @ Vt, t, meta)
