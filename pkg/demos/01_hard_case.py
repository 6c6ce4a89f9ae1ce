"""Solve one hard-case instance with both template solvers.

A second stereo camera is placed at a random pose; three features are seen
in three of the four views each.  The feature mix S1P1L-1P means one point
and one line are triangulated by camera 1 and one point by camera 2, so no
single camera sees enough structure for an absolute pose solver.
"""
import numpy as np

from sego import classify, solve
from sego.geometry import pose_errors
from sego.synth import ScenarioConfig, generate_scene

rng = np.random.default_rng(2024)
scene = generate_scene(ScenarioConfig(), "S1P1L-1P", rng)
print("case:", classify(scene.features).label)
print("true rotation angle (deg): %.2f" % np.degrees(np.arccos((np.trace(scene.pose.R) - 1) / 2)))
print("true translation:", np.round(scene.pose.t, 3))

for solver in ("episego", "ppsego"):
    poses = solve(scene.features, solver)
    errs = [pose_errors(p, scene.pose) for p in poses]
    best = min(range(len(poses)), key=lambda i: errs[i].rotation_deg)
    print(f"\n{solver}: {len(poses)} real candidates")
    for i, (p, e) in enumerate(zip(poses, errs)):
        mark = "  <- closest to truth" if i == best else ""
        print(f"  alpha {p.meta['alpha']:8.3f}  rot err {e.rotation_deg:9.2e} deg  "
              f"trans err {e.translation_rel:9.2e}{mark}")
