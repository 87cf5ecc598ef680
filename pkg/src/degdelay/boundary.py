"""Boundary control at x = 1 by extension to (0, 2) and distributed control in (1, 2)."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BadControlWindow, ConfigError, RoundTripMismatch
from .hum import ControlResult, synthesize_null_control
from .model import (BCKind, ConstantExtension, DegeneracyModel, DelayProblem, Grid, Indicator, Kind, norm_h)
from .solver import Discretization


@dataclass(frozen=True, eq=False)
class ExtendedProblem:
    base: DelayProblem
    extended: DelayProblem

    def extend_state(self, y) -> np.ndarray:
        """Zero-extend rows given on nodes of (0, 1) to the doubled grid."""
        y = np.asarray(y, dtype=float)
        n = y.shape[-1] - 1
        out = np.zeros(y.shape[:-1] + (2 * n + 1,))
        out[..., : n + 1] = y
        return out


def extend_problem(base: DelayProblem, omega_ext) -> ExtendedProblem:
    """a continued by a(1), b and c cut off beyond x = 1, control window inside (1, 2)."""
    if base.domain_right != 1.0:
        raise ConfigError("boundary control expects a base problem on (0, 1)")
    lo, hi = float(omega_ext[0]), float(omega_ext[1])
    if not (1.0 < lo < hi < 2.0):
        raise BadControlWindow(f"control window {omega_ext} must lie strictly inside (1, 2)")
    a = base.a
    a_ext = DegeneracyModel(ConstantExtension(a.form, 1.0, 2.0), a.kind, a.K, a.theta_deg)
    ext = DelayProblem(a_ext, Indicator(base.b, 0.0, 1.0, closed=True), Indicator(base.c, 0.0, 1.0, closed=True),
                       base.h, base.T, (lo, hi), base.bc_kind, 2.0)
    return ExtendedProblem(base, ext)


def extended_grid(grid: Grid) -> Grid:
    """Same dx and time steps on (0, 2); node N sits at x = 1."""
    return Grid(2 * grid.N, grid.M, grid.m_delay, grid.T, grid.h, 2.0)


@dataclass
class RoundTrip:
    terminal_norm: float
    data_norm: float
    discrepancy: float
    scale: float
    bound: float
    trace_error: float

    def summary(self) -> dict:
        return {"terminal_norm": self.terminal_norm, "data_norm": self.data_norm,
                "ratio": self.terminal_norm / self.data_norm if self.data_norm > 0 else 0.0,
                "discrepancy": self.discrepancy, "scale": self.scale, "bound": self.bound,
                "trace_error": self.trace_error}


@dataclass
class BoundaryResult:
    times: np.ndarray
    h_trace: np.ndarray
    control: ControlResult
    roundtrip: RoundTrip
    base_trajectory: np.ndarray


def boundary_null_control(base: DelayProblem, grid: Grid, omega_ext, y0, Theta=None, epsilon: float = 1e-6,
                          cg_tol: float = 1e-9, max_iter: int = 1000, *, seed: int = 0) -> BoundaryResult:
    """Distributed control on the extension, its trace at x = 1, and a re-simulation check."""
    ep = extend_problem(base, omega_ext)
    g_ext = extended_grid(grid)
    N, m = grid.N, grid.m_delay
    y0 = np.asarray(y0, dtype=float)
    Theta = np.zeros((m, N + 1)) if Theta is None else np.asarray(Theta, dtype=float)
    y0_ext, Th_ext = ep.extend_state(y0), ep.extend_state(Theta)
    disc_ext = Discretization(ep.extended, g_ext)
    ctrl = synthesize_null_control(ep.extended, g_ext, y0_ext, Th_ext, epsilon, cg_tol, max_iter,
                                   disc=disc_ext, seed=seed)
    ext_traj = disc_ext.forward(y0_ext, Th_ext, ctrl.u).values
    h_trace = ext_traj[m:, N].copy()
    base_traj = Discretization(base, grid).forward(y0, Theta, None, dirichlet_right=h_trace).values
    diff = base_traj[m:] - ext_traj[m:, : N + 1]
    discrepancy = float(max(norm_h(r, grid) for r in diff))
    scale = float(max(max(norm_h(r, grid) for r in ext_traj[m:, : N + 1]), 1e-300))
    bound = 10.0 * (grid.dx ** 2 + grid.dt) * scale
    trace_error = float(np.max(np.abs(base_traj[m:, N] - h_trace)))
    rt = RoundTrip(norm_h(base_traj[-1], grid), math.sqrt(norm_h(y0, grid) ** 2 + grid.dt * float(
        np.sum(Theta ** 2 @ grid.mass_weights))), discrepancy, scale if np.any(ext_traj) else 0.0, bound,
        trace_error)
    if discrepancy > bound and np.any(ext_traj):
        raise RoundTripMismatch(f"restriction discrepancy {discrepancy:.3e} exceeds {bound:.3e}")
    times = np.arange(grid.M + 1) * grid.dt
    return BoundaryResult(times, h_trace, ctrl, rt, base_traj)


def extended_kinds(ep: ExtendedProblem) -> tuple[Kind, bool]:
    """Base kind on (0, 1) and whether a is bounded below on (1, 2]."""
    x = np.linspace(1.0, 2.0, 101)[1:]
    return ep.base.a.kind, bool(np.min(ep.extended.a(x)) > 0)
