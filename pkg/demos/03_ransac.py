"""Robust estimation from a mix of point and line correspondences with outliers.

Each correspondence is a feature triplet with a random main camera; half of
them get a random third observation.  RANSAC draws three triplets, solves
whatever case they form, and keeps the pose with the most inliers.
"""
import time
import warnings

import numpy as np

from sego.estimator import RansacConfig, ransac_estimate, refine_pose
from sego.geometry import pose_errors
from sego.synth import ScenarioConfig, generate_correspondences

warnings.simplefilter("ignore")
cfg = ScenarioConfig(noise_sigma_px=0.5)
pose, feats, is_out = generate_correspondences(cfg, 70, 30, 0.5, np.random.default_rng(5))

t0 = time.perf_counter()
h = ransac_estimate(feats, "ppsego", RansacConfig(seed=1))
dt = time.perf_counter() - t0
inl = np.zeros(len(feats), dtype=bool)
inl[list(h.inliers)] = True
e = pose_errors(h.pose, pose)
print(f"iterations {h.iterations}, {h.score} inliers in {dt:.2f}s")
print(f"true inliers kept {np.sum(inl & ~is_out)}/{np.sum(~is_out)}, outliers accepted {np.sum(inl & is_out)}")
print(f"rotation error {e.rotation_deg:.3f} deg, translation error {100 * e.translation_rel:.1f}%")

# what the best possible estimate looks like: refine from the truth on the true inliers
ref = pose_errors(refine_pose(feats, pose, np.flatnonzero(~is_out)), pose)
print(f"reference (from truth, true inliers): {ref.rotation_deg:.3f} deg, {100 * ref.translation_rel:.1f}%")
