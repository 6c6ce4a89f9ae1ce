"""Minimal solvers for the relative pose of two calibrated stereo cameras.

Three feature triplets (points or lines, each seen in three of the four
views) determine the pose ``(R, t)`` of the second stereo camera.
"""
from .cases import CaseLabel, FeatureTriplet, classify, canonicalize, solver_route
from .easy import solve_gp3p_mixed, solve_three_lines
from .episego import solve_episego
from .errors import (CheiralityError, DegenerateInstanceError, DegenerateTriangulationError,
                     EstimationFailedError, InfeasibleConfigurationError, InvalidInputError,
                     NumericFailureError, SegoError)
from .estimator import (FourViewCorrespondence, Hypothesis, RansacConfig, ransac_estimate, refine_pose,
                        reprojection_residual, reprojection_residuals)
from .geometry import (LineObservation, PointObservation, Pose, Quaternion, StereoRig, ViewId,
                       pose_errors, project_line, project_point, triangulate_line, triangulate_point)
from .ppsego import solve_ppsego
from .solve import solve

__version__ = "0.1.0"
