"""Accuracy against image noise, the way `sego bench --sweep noise` measures it.

For each noise level a few trials per case are solved; the error of a trial
is that of the candidate closest to the truth.  Refining from the true pose
(the bundle adjustment reference) shows the floor set by the noise itself.
"""
import numpy as np

from sego.synth import ScenarioConfig, run_cell, summarize

TRIALS = 50
CASES = [("S2P-1L", "episego"), ("S2P-1L", "ppsego"), ("S2P-1L", "ba-reference"),
         ("S3P", "easy"), ("S3L", "easy")]

print(f"{'sigma':>5}  " + "  ".join(f"{c}/{s}"[:22].rjust(22) for c, s in CASES))
for vi, sigma in enumerate([0.0, 0.25, 0.5, 1.0]):
    cfg = ScenarioConfig(noise_sigma_px=sigma, trials=TRIALS)
    row = []
    for case, solver in CASES:
        s = summarize(run_cell(cfg, case, solver, vi))
        row.append(f"{s['median_rot_deg']:22.2e}")
    print(f"{sigma:5.2f}  " + "  ".join(row))
print("\nmedian rotation error in degrees over", TRIALS, "trials")
