"""Classification, canonical relabelling and dispatch to the minimal solvers."""
from __future__ import annotations

from .cases import CaseLabel, Route, canonicalize, classify, solver_route
from .errors import InvalidInputError
from .geometry import Pose, StereoRig

SOLVERS = ("episego", "ppsego")


def _canonical_solver(route: Route):
    if route == Route.HARD_EPISEGO:
        from .episego import solve_canonical
    elif route == Route.HARD_PPSEGO:
        from .ppsego import solve_canonical
    elif route == Route.EASY_LINES:
        from .easy import solve_lines_canonical as solve_canonical
    else:
        from .easy import solve_gp3p_canonical as solve_canonical
    return solve_canonical


def run_canonical(features, label=None, hard_solver: str = "episego", rig: StereoRig | None = None,
                  expect=None, **kw):
    features = list(features)
    case = classify(features)
    if label is not None:
        name = label.label if isinstance(label, CaseLabel) else label
        if name != case.label:
            raise InvalidInputError(f"features form {case.label}, not {name}")
    if expect is not None and solver_route(case, hard_solver) not in expect:
        raise InvalidInputError(f"{case.label} is not handled by this solver")
    route = solver_route(case, hard_solver)
    poses = _canonical_solver(route)(canonicalize(features, case), case.label, rig, **kw)
    if case.swap_cameras:
        poses = [Pose(p.R.T, -p.R.T @ p.t, p.meta) for p in poses]
    return poses


def solve(features, solver: str = "episego", rig: StereoRig | None = None, **kw):
    """Candidate poses for any three feature triplets.

    Hard cases go to ``solver`` (``"episego"`` or ``"ppsego"``); the other
    cases always use the quadric-intersection solvers.
    """
    if solver not in SOLVERS:
        raise InvalidInputError(f"unknown solver {solver!r}")
    return run_canonical(features, None, solver, rig, **kw)
