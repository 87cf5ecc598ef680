"""Null control of a degenerate parabolic equation with a single delay."""
from .errors import *  # noqa: F401,F403
from .model import (BCKind, Constant, DegeneracyModel, DelayProblem, FlatDecay, Grid, Indicator, Kind,
                    Polynomial, PowerLaw, Product, Tabulated, Trajectory, c0_and_psi_primitive,
                    classify_degeneracy, power_law_problem)
from .solver import (AdjointTrajectory, Discretization, duality_gap, history_view, solve_adjoint,
                     solve_forward)
from .hum import ControlResult, observability_certificate, synthesize_null_control

__version__ = "0.1.0"
