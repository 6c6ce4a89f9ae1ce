"""Command line: ``sego bench`` runs synthetic sweeps, ``sego solve`` solves one instance.

Exit codes: 0 success, 2 usage error, 3 infeasible configuration.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .cases import LABELS, classify, solver_route, Route
from .errors import InfeasibleConfigurationError, InvalidInputError, SegoError

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE = 0, 2, 3


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sego", description="Minimal solvers for stereo egomotion.")
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bench", help="run a synthetic sweep and write CSV",
                       description="Per trial, the candidate closest to the truth in rotation is scored "
                                   "(disambiguation is left to RANSAC).")
    b.add_argument("--sweep", required=True, choices=["noise", "rotation", "translation", "line-length", "planar"])
    b.add_argument("--solver", default="all", choices=["episego", "ppsego", "easy", "all"])
    b.add_argument("--cases", default="all", help="'all' or a comma-separated list of case labels")
    b.add_argument("--trials", type=int, default=1000)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out", required=True, help="summary CSV path ('-' for stdout)")
    b.add_argument("--per-trial", action="store_true", help="also write OUT with suffix .trials.csv")
    b.add_argument("--condition-check", default="on", choices=["on", "off"])
    b.add_argument("--config", help="JSON object overriding scenario fields (box, fov_deg, translation_range, ...)")
    b.add_argument("--timing", action="store_true",
                   help="fill median_time_us (wall clock, so the CSV is no longer reproducible)")

    s = sub.add_parser("solve", help="solve one set of three feature triplets from JSON")
    s.add_argument("--input", required=True)
    s.add_argument("--solver", default="episego", choices=["episego", "ppsego", "easy"])
    s.add_argument("--out", default="-")
    return p


def _write(path: str, text: str):
    if path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _trials_path(path: str) -> str:
    p = Path(path)
    return str(p.with_name(p.stem + ".trials.csv"))


def cmd_bench(args) -> int:
    from .synth import ScenarioConfig, run_sweep
    cases = ["all"] if args.cases == "all" else [c.strip() for c in args.cases.split(",") if c.strip()]
    for c in cases:
        if c != "all" and c not in LABELS:
            raise InvalidInputError(f"unknown case label {c!r}")
    if args.trials < 1:
        raise InvalidInputError("--trials must be positive")
    if args.per_trial and args.out == "-":
        raise InvalidInputError("--per-trial needs a file for --out")
    overrides = {}
    if args.config:
        try:
            overrides = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidInputError(f"cannot read {args.config}: {exc}") from exc
        if not isinstance(overrides, dict):
            raise InvalidInputError("--config must hold a JSON object")
    try:
        cfg = ScenarioConfig(**{**overrides, "trials": args.trials, "seed": args.seed})
    except TypeError as exc:
        raise InvalidInputError(f"bad scenario field: {exc}") from exc
    summary, trials = run_sweep(args.sweep, [args.solver], cases, cfg,
                                condition_check=args.condition_check == "on",
                                timing=args.timing, per_trial=args.per_trial)
    _write(args.out, summary)
    if trials is not None:
        _write(_trials_path(args.out), trials)
    return EXIT_OK


def load_features(data):
    """Feature triplets from parsed JSON: a list of features or ``{"features": [...]}``."""
    from .cases import FeatureTriplet
    if isinstance(data, dict):
        data = data.get("features")
    if not isinstance(data, list):
        raise InvalidInputError("input must be a list of features")
    try:
        return [FeatureTriplet.from_dict(d) for d in data]
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidInputError(f"malformed feature: {exc}") from exc


def cmd_solve(args) -> int:
    from .solve import solve
    try:
        data = json.loads(Path(args.input).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidInputError(f"cannot read {args.input}: {exc}") from exc
    features = load_features(data)
    case = classify(features)
    route = solver_route(case, "episego")
    hard = route == Route.HARD_EPISEGO
    if args.solver == "easy" and hard:
        raise InvalidInputError(f"{case.label} is a hard case; use episego or ppsego")
    poses = solve(features, "episego" if args.solver == "easy" else args.solver)
    out = {
        "case": case.label,
        "solver": args.solver if hard else "easy",
        "poses": [
            {"q": [float(v) for v in p.quaternion.vector], "t": [float(v) for v in p.t],
             **{k: (bool(v) if isinstance(v, (bool, np.bool_)) else float(v))
                for k, v in p.meta.items() if k in ("alpha", "residual", "low_confidence")}}
            for p in poses
        ],
    }
    _write(args.out, json.dumps(out, indent=2) + "\n")
    return EXIT_OK


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return cmd_bench(args) if args.command == "bench" else cmd_solve(args)
    except InvalidInputError as exc:
        print(f"sego: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InfeasibleConfigurationError as exc:
        print(f"sego: infeasible configuration: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except SegoError as exc:
        print(f"sego: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
