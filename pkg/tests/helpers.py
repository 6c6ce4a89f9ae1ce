"""Scene helpers shared by the solver tests."""
import numpy as np

from sego.cases import LINE
from sego.geometry import pose_errors
from sego.synth import ScenarioConfig, generate_scene

# acceptance verdicts, printed in the terminal summary
VERDICTS = {}


def record_verdict(criterion: int, passed: bool, detail: str):
    VERDICTS[criterion] = (passed, detail)


def scene(label, seed, shuffle=False, **cfg):
    """Seeded scene of one case label; noiseless and in canonical order by default."""
    return generate_scene(ScenarioConfig(**cfg), label, np.random.default_rng(seed), shuffle=shuffle)


def planted(label, seed, angle_deg, dist, **kw):
    return scene(label, seed, rotation_min_deg=angle_deg, rotation_max_deg=angle_deg,
                 translation_range=(dist, dist), **kw)


def well_conditioned(sc, min_sine=1e-2) -> bool:
    """False when a line's two back-projected planes are nearly parallel."""
    for f in sc.features:
        if f.kind == LINE:
            o1, o2 = f.main_observations()
            n1, n2 = o1.l / np.linalg.norm(o1.l), o2.l / np.linalg.norm(o2.l)
            if np.linalg.norm(np.cross(n1, n2)) < min_sine:
                return False
    return True


def generic_scenes(label, n, seed=0, **cfg):
    out, k = [], 0
    while len(out) < n:
        sc = scene(label, [seed, k], **cfg)
        k += 1
        if well_conditioned(sc):
            out.append(sc)
    return out


def best_error(poses, gt):
    """Smallest rotation error (deg) among candidates and the matching translation error."""
    if not poses:
        return np.inf, np.inf
    e = min((pose_errors(p, gt) for p in poses), key=lambda e: e.rotation_deg)
    return e.rotation_deg, e.translation_rel


def anchor_depth(sc, anchor):
    """True ``alpha`` of the anchor point: its depth in the observing camera-2 view."""
    P = sc.pose.t + sc.pose.R @ anchor.S + anchor.offset
    return P[2] / anchor.u[2]


def build_features(pose, points=(), lines=(), main=1, noise_px=0.0, rng=None):
    """Triplets from given structure (camera-1 frame), all with the same main camera."""
    from sego.geometry import ViewId
    from sego.synth import make_line, make_point
    cfg = ScenarioConfig(noise_sigma_px=noise_px)
    rng = rng if rng is not None else np.random.default_rng(0)
    views = (ViewId(main, 1), ViewId(main, 2), ViewId(3 - main, 1))
    out = [make_point(cfg, pose, views, np.asarray(X, float), rng) for X in points]
    out += [make_line(cfg, pose, views, np.asarray(P, float), np.asarray(Q, float), rng) for P, Q in lines]
    return out
