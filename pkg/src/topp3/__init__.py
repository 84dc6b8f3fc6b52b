"""Time-optimal path parameterization under third-order (jerk) constraints."""

from .constraints import ConstraintSet, State, accel_surfaces, coeffs, controls
from .errors import *  # noqa: F401,F403
from .integrator import Limits, Policy, Profile, Termination, integrate, interpolate
from .path import BoundaryCondition, PathSpec, boundary_state, eval_derivatives
from .shooting import NewtonOptions, solve_bridge, solve_extension
from .singularity import (Side, Singularity, SingularCurve, extend_profile,
                          find_singularities, singular_curve, singular_jerk)
from .solver import (SolverOptions, Topp3Problem, Topp3Solution, Trajectory, solve,
                     to_trajectory, validate)

__version__ = "0.1.0"
