"""Acceptance criteria, one test each; verdicts are listed at the end of the run."""
import shutil
import subprocess
import sys
import time
import warnings

import numpy as np
import pytest

import oracle
from sego.cases import EASY_LABELS, HARD_LABELS, LINE_LABELS, classify
from sego.errors import DegenerateInstanceError
from sego.estimator import RansacConfig, ransac_estimate
from sego.geometry import Pose, axis_angle_matrix, pose_errors
from sego.solve import solve
from sego.synth import ScenarioConfig, generate_correspondences, generate_scene, run_trial, trial_rng

from helpers import build_features, record_verdict

TRIALS = 1000
ROUTES = [(label, s) for label in HARD_LABELS for s in ("episego", "ppsego")] + [(label, "easy") for label in EASY_LABELS]
MAX_CANDIDATES = {"episego": 32, "ppsego": 16, "easy": 8}
SIGMA_IDX = {0.0: 0, 0.5: 5, 1.0: 10}


def run_route(sigma, label, solver, keep=False):
    cfg = ScenarioConfig(noise_sigma_px=sigma)
    recs, cands, scenes = [], [], []
    t0 = time.perf_counter()
    for k in range(TRIALS):
        sc = generate_scene(cfg, label, trial_rng(0, SIGMA_IDX[sigma], label, k))
        rec, poses = run_trial(sc, solver, keep_candidates=True)
        recs.append(rec)
        if keep:
            cands.append(poses)
            scenes.append(sc)
    return {"recs": recs, "poses": cands, "scenes": scenes, "seconds": time.perf_counter() - t0}


@pytest.fixture(scope="session")
def noiseless():
    return {r: run_route(0.0, *r, keep=True) for r in ROUTES}


@pytest.fixture(scope="session")
def noisy():
    return {r: run_route(1.0, *r) for r in ROUTES}


def rot(run):
    return np.array([r.rotation_err_deg for r in run["recs"]], dtype=float)


def trans(run):
    return np.array([r.translation_rel_err for r in run["recs"]], dtype=float)


def nanmedian(x):
    return float(np.median(np.where(np.isfinite(x), x, np.inf)))


def test_criterion_01_zero_noise_stability(noiseless):
    lines, ok = [], True
    for label in HARD_LABELS:
        for s in ("episego", "ppsego"):
            run = noiseless[(label, s)]
            med = nanmedian(rot(run))
            good = med <= 1e-5 and run["seconds"] < 120
            ok &= good
            lines.append(f"{label}/{s} median {med:.1e} deg in {run['seconds']:.0f}s")
    record_verdict(1, ok, "; ".join(lines))
    assert ok, lines


def test_criterion_02_candidate_bounds(noiseless):
    worst = {}
    for (label, s), run in noiseless.items():
        n = max(r.n_candidates for r in run["recs"])
        worst[s] = max(worst.get(s, 0), n)
    ok = all(worst[s] <= MAX_CANDIDATES[s] for s in worst)
    record_verdict(2, ok, ", ".join(f"{s} max {n} (bound {MAX_CANDIDATES[s]})" for s, n in worst.items()))
    assert ok, worst


def test_criterion_03_planted_root_completeness(noiseless):
    rates = {r: float(np.mean(rot(run) < 1e-4)) for r, run in noiseless.items()}
    ok = all(v >= 0.999 for v in rates.values())
    worst = min(rates, key=rates.get)
    record_verdict(3, ok, f"lowest {worst[0]}/{worst[1]} {100 * rates[worst]:.1f}%")
    assert ok, rates


def test_criterion_04_residual_oracle(noiseless):
    worst, count = 0.0, 0
    for (label, s), run in noiseless.items():
        if s == "easy":
            route = "lines" if label in LINE_LABELS else "projection"
        else:
            route = "episego" if s == "episego" else "projection"
        for sc, poses in zip(run["scenes"], run["poses"]):
            anchor = classify(sc.features).feature_order[0]
            for p in poses:
                worst = max(worst, oracle.route_residual(p, sc.features, route, anchor))
                count += 1
    ok = worst < 1e-6
    record_verdict(4, ok, f"{count} candidates, largest scaled residual {worst:.1e}")
    assert ok


def test_criterion_05_noise_degrades_accuracy(noiseless, noisy):
    bad = []
    for r in ROUTES:
        r0, r1 = nanmedian(rot(noiseless[r])), nanmedian(rot(noisy[r]))
        t0, t1 = nanmedian(trans(noiseless[r])), nanmedian(trans(noisy[r]))
        if not (r1 > r0 and t1 > t0):
            bad.append(f"{r[0]}/{r[1]}")
    record_verdict(5, not bad, "all routes degrade" if not bad else "no degradation: " + ", ".join(bad))
    assert not bad


def test_criterion_06_close_to_bundle_adjustment():
    cfg = ScenarioConfig(noise_sigma_px=0.5)
    ratios = {}
    for label in HARD_LABELS + EASY_LABELS:
        solvers = ("episego", "ppsego") if label in HARD_LABELS else ("easy",)
        errs = {s: [] for s in solvers + ("ba-reference",)}
        for k in range(TRIALS):
            sc = generate_scene(cfg, label, trial_rng(0, SIGMA_IDX[0.5], label, k))
            for s in errs:
                errs[s].append(run_trial(sc, s).rotation_err_deg)
        ref = nanmedian(np.array(errs["ba-reference"]))
        for s in solvers:
            ratios[(label, s)] = nanmedian(np.array(errs[s])) / ref
    worst = max(ratios, key=ratios.get)
    ok = ratios[worst] <= 3.0
    record_verdict(6, ok, f"largest solver/BA median ratio {ratios[worst]:.2f} ({worst[0]}/{worst[1]})")
    assert ok, ratios


def test_criterion_07_ransac_robustness():
    cfg = ScenarioConfig(noise_sigma_px=0.5)
    rcfg = dict(threshold_px=5.0, confidence=0.999)
    hits, slowest = 0, 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for k in range(100):
            pose, feats, _ = generate_correspondences(cfg, 70, 30, 0.5, np.random.default_rng([7, k]))
            t0 = time.perf_counter()
            h = ransac_estimate(feats, "ppsego", RansacConfig(seed=k, **rcfg))
            slowest = max(slowest, time.perf_counter() - t0)
            e = pose_errors(h.pose, pose)
            hits += e.rotation_deg <= 0.5 and e.translation_rel <= 0.05
    ok = hits >= 95 and slowest < 1.0
    record_verdict(7, ok, f"{hits}/100 runs within 0.5 deg and 5%, slowest run {slowest:.2f}s")
    assert ok


def degenerate_trial(kind, k):
    rng = np.random.default_rng([8, k])
    angle = np.radians(rng.uniform(0, 45))
    c = rng.normal(size=3)
    C = c / np.linalg.norm(c) * rng.uniform(1, 10)
    R = axis_angle_matrix(rng.normal(size=3), angle)
    pose = Pose(R, -R @ C)
    # keep the structure close to the optical axis so both cameras see it
    P0 = np.array([0.0, 0.0, 14.0]) + rng.uniform(-0.5, 0.5, size=3)
    d = rng.normal(size=3)
    d /= np.linalg.norm(d)
    main = 1 + k % 2
    if kind == "points":
        pts = [P0, P0 + 0.7 * d, P0 + 1.5 * d]
        corners = pts
    else:
        lines = [(P0 + o, P0 + o + d) for o in rng.normal(size=(3, 3)) * 0.6]
        corners = [X for seg in lines for X in seg]
    if min((pose.R @ X + pose.t)[2] for X in corners) < 1.0:
        return None
    if kind == "points":
        return pose, build_features(pose, points=pts, main=main)
    return pose, build_features(pose, lines=lines, main=main)


def test_criterion_08_degeneracy_detection():
    out = {}
    for kind in ("points", "lines"):
        flagged = silent = 0
        k = n = 0
        while n < 100:
            k += 1
            trial = degenerate_trial(kind, k)
            if trial is None:
                continue  # structure behind the second camera
            gt, feats = trial
            n += 1
            route = "projection" if kind == "points" else "lines"
            try:
                poses = solve(feats)
            except DegenerateInstanceError:
                flagged += 1
                continue
            for p in poses:
                if (oracle.route_residual(p, feats, route) < 1e-6 and oracle.min_depth(p, feats) > 0
                        and pose_errors(p, gt).rotation_deg > 1e-4):
                    silent += 1
                    break
        out[kind] = (flagged, silent)
    ok = all(s == 0 for _, s in out.values())
    record_verdict(8, ok, ", ".join(f"{k}: {f}/100 flagged, {s} silent wrong poses" for k, (f, s) in out.items()))
    assert ok


def test_criterion_09_bench_is_deterministic(tmp_path):
    args = ["bench", "--sweep", "noise", "--solver", "all", "--cases", "all", "--trials", "10", "--seed", "3"]
    outs = []
    for name in ("a.csv", "b.csv"):
        path = tmp_path / name
        exe = shutil.which("sego")
        cmd = [exe] if exe else [sys.executable, "-m", "sego.cli"]
        cmd += [*args, "--out", str(path)]
        subprocess.run(cmd, check=True)
        outs.append(path.read_bytes())
    ok = outs[0] == outs[1] and len(outs[0]) > 0
    record_verdict(9, ok, f"two runs, {len(outs[0])} bytes each, identical: {outs[0] == outs[1]}")
    assert ok


def test_criterion_10_solve_time(noiseless):
    meds = {(label, s): float(np.median([r.wall_time_us for r in noiseless[(label, s)]["recs"]])) / 1000
            for label in HARD_LABELS for s in ("episego", "ppsego")}
    worst = max(meds, key=meds.get)
    ok = meds[worst] <= 10.0
    record_verdict(10, ok, f"slowest median {meds[worst]:.1f} ms ({worst[0]}/{worst[1]})")
    assert ok, meds
