"""Flux-form discretisation and time stepping for the retarded system and its adjoint.

Space: nodes x_i = i*dx with midpoint coefficients a(x_i +- dx/2).  The
unknowns are the free nodes 1..N-1.  Node N is Dirichlet.  Node 0 is either
Dirichlet (weak degeneracy) or slaved to node 1 so that the discrete flux
a_{1/2}(y_1 - y_0)/dx vanishes (strong degeneracy).  With trapezoid weights W
and prolongation P (free -> all nodes) the reduced mass is D = P^T W P, and
the stiffness K is symmetric, so D^{-1} K is self-adjoint in <., .>_D.

Time: trapezoidal in diffusion, b and the control; the delayed term is the
trapezoidal average of two already-stored rows (k - m and k + 1 - m, m >= 1).
The adjoint is the literal transpose of the one-step maps of the augmented
state (history window, present), using the inner product

    <Z, Xi> = dt * sum_j <z_j, xi_j>_D + <z_m, xi_m>_D,

i.e. the discrete M2 pairing.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack

from .errors import ConfigError, SingularSolve
from .model import BCKind, DelayProblem, Grid, Trajectory, inner_h


class SpatialOperator:
    """Tridiagonal flux-form stencil of (a y_x)_x on the free nodes."""

    def __init__(self, a, grid: Grid, bc_kind: BCKind):
        N, dx = grid.N, grid.dx
        self.grid = grid
        self.bc_kind = BCKind(bc_kind)
        x_mid = (np.arange(N) + 0.5) * dx
        self.a_mid = np.asarray(a(x_mid), dtype=float)
        if np.any(self.a_mid <= 0):
            raise ConfigError("coefficient must be positive at cell midpoints")
        self.free = np.arange(1, N)
        w = grid.mass_weights
        self.mass_weights = w
        d = w[1:N].copy()
        if self.bc_kind is BCKind.NEUMANN_LEFT:
            d[0] += w[0]
        self.d = d
        # stiffness K: sum_i a_{i+1/2} (y_{i+1} - y_i)^2 / dx over fluxes touching free nodes
        kd = (self.a_mid[:-1] + self.a_mid[1:]) / dx
        if self.bc_kind is BCKind.NEUMANN_LEFT:
            kd[0] = self.a_mid[1] / dx
        self.k_diag = kd
        self.k_off = -self.a_mid[1:-1] / dx
        # D^{-1} K as (lower, diag, upper)
        self.lower = self.k_off / d[1:]
        self.diag = kd / d
        self.upper = self.k_off / d[:-1]

    @property
    def n(self) -> int:
        return self.d.size

    def apply(self, v):
        """(D^{-1} K) v on the last axis; note the operator is -(a y_x)_x."""
        out = self.diag * v
        out[..., :-1] += self.upper * v[..., 1:]
        out[..., 1:] += self.lower * v[..., :-1]
        return out

    def dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.upper, 1) + np.diag(self.lower, -1)

    def restrict(self, full):
        """W-orthogonal projection of full-node vectors onto the free coordinates."""
        full = np.asarray(full, dtype=float)
        v = full[..., 1:-1] * self.mass_weights[1:-1] / self.d
        if self.bc_kind is BCKind.NEUMANN_LEFT:
            v[..., 0] = (self.mass_weights[0] * full[..., 0] + self.mass_weights[1] * full[..., 1]) / self.d[0]
        return v

    def prolong(self, v):
        v = np.asarray(v, dtype=float)
        full = np.zeros(v.shape[:-1] + (self.grid.N + 1,))
        full[..., 1:-1] = v
        if self.bc_kind is BCKind.NEUMANN_LEFT:
            full[..., 0] = v[..., 0]
        return full

    def inner(self, u, v) -> float:
        return float(np.sum(u * v * self.d))


@dataclass(frozen=True, eq=False)
class AdjointTrajectory:
    """Backward solution W(t_k), k = 0..M, with W(T) = W0.

    ``control_dual`` is the field the control pairs with under the trapezoid
    time weights; ``history`` holds the history component of the M2 adjoint
    (rows s = -h..-dt, i.e. (c W 1_[0, min(h, T)])(s + h)).
    """

    values: np.ndarray
    control_dual: np.ndarray
    history: np.ndarray
    problem: DelayProblem
    grid: Grid

    @property
    def W0(self) -> np.ndarray:
        return self.values[-1]

    @property
    def at_zero(self) -> np.ndarray:
        return self.values[0]

    def norms(self) -> np.ndarray:
        return np.sqrt(np.maximum(self.values ** 2 @ self.grid.mass_weights, 0.0))


class Discretization:
    """All step operators for one (problem, grid) pair; reused across many solves."""

    def __init__(self, problem: DelayProblem, grid: Grid):
        if abs(grid.domain_right - problem.domain_right) > 1e-14 or abs(grid.T - problem.T) > 1e-14:
            raise ConfigError("grid does not match the problem domain / horizon")
        self.problem = problem
        self.grid = grid
        self.op = SpatialOperator(problem.a, grid, problem.bc_kind)
        t = np.arange(grid.M + 1) * grid.dt
        xf = grid.x[1:-1]
        self.B = np.broadcast_to(problem.b(t[:, None], xf[None, :]), (grid.M + 1, xf.size)).copy()
        self.C = np.broadcast_to(problem.c(t[:, None], xf[None, :]), (grid.M + 1, xf.size)).copy()
        self.chi = problem.omega_mask(grid.x)
        self._b_const = bool(np.all(self.B == self.B[0]))
        self._factors: dict[int, tuple] = {}

    # -- step pieces ------------------------------------------------------
    def _factor(self, k: int):
        key = 0 if self._b_const else k
        f = self._factors.get(key)
        if f is None:
            half = 0.5 * self.grid.dt
            op = self.op
            dl = half * op.lower
            du = half * op.upper
            d = 1.0 + half * (op.diag - self.B[k])
            dl_, d_, du_, du2, ipiv, info = lapack.dgttrf(dl, d, du)
            if info != 0:
                raise SingularSolve(f"tridiagonal factorisation failed at step {k} (info={info})")
            f = (dl_, d_, du_, du2, ipiv)
            self._factors[key] = f
        return f

    def solve_A(self, k: int, rhs):
        dl, d, du, du2, ipiv = self._factor(k)
        x, info = lapack.dgttrs(dl, d, du, du2, ipiv, rhs)
        if info != 0:
            raise SingularSolve(f"tridiagonal solve failed at step {k}")
        return x

    def apply_R(self, k: int, v):
        half = 0.5 * self.grid.dt
        return v - half * (self.op.apply(v) - self.B[k] * v)

    # -- forward ----------------------------------------------------------
    def forward_reduced(self, y0, theta=None, u=None, dirichlet_right=None) -> np.ndarray:
        g, op = self.grid, self.op
        m, M, dt = g.m_delay, g.M, g.dt
        v = np.zeros((m + M + 1, op.n))
        if theta is not None:
            theta = np.asarray(theta, dtype=float)
            if theta.shape != (m, g.N + 1):
                raise ConfigError(f"history must have shape {(m, g.N + 1)}, got {theta.shape}")
            v[:m] = op.restrict(theta)
        y0 = np.asarray(y0, dtype=float)
        if y0.shape != (g.N + 1,):
            raise ConfigError(f"initial state must have {g.N + 1} entries")
        v[m] = op.restrict(y0)
        forcing = None
        if u is not None:
            u = np.asarray(u, dtype=float)
            if u.shape != (M + 1, g.N + 1):
                raise ConfigError(f"control must have shape {(M + 1, g.N + 1)}")
            forcing = op.restrict(u * self.chi)
        bsrc = None
        if dirichlet_right is not None:
            gr = np.asarray(dirichlet_right, dtype=float)
            bsrc = gr * (self.problem.a(np.array([g.domain_right - 0.5 * g.dx]))[0] / g.dx / op.d[-1])
        half = 0.5 * dt
        C = self.C
        for k in range(M):
            rhs = self.apply_R(k, v[m + k])
            rhs += half * (C[k] * v[k] + C[k + 1] * v[k + 1])
            if forcing is not None:
                rhs += half * (forcing[k] + forcing[k + 1])
            if bsrc is not None:
                rhs[-1] += half * (bsrc[k] + bsrc[k + 1])
            v[m + k + 1] = self.solve_A(k + 1, rhs)
        return v

    def forward(self, y0, theta=None, u=None, dirichlet_right=None) -> Trajectory:
        v = self.forward_reduced(y0, theta, u, dirichlet_right)
        values = self.op.prolong(v)
        if dirichlet_right is not None:
            values[self.grid.m_delay:, -1] = dirichlet_right
        return Trajectory(values, self.problem, self.grid)

    # -- adjoint ----------------------------------------------------------
    def adjoint_reduced(self, w0):
        """Return (W rows 0..M, p rows 0..M+1, history register rows -m..-1)."""
        g, op = self.grid, self.op
        m, M, dt = g.m_delay, g.M, g.dt
        w0 = np.asarray(w0, dtype=float)
        if w0.shape != (g.N + 1,):
            raise ConfigError(f"terminal state must have {g.N + 1} entries")
        n = op.n
        W = np.zeros((M + 1, n))
        p = np.zeros((M + 2, n))
        # register slot for absolute time index j lives at buf[j + m]
        buf = np.zeros((m + M + 1, n))
        W[M] = op.restrict(w0)
        C = self.C
        for k in range(M - 1, -1, -1):
            pk = self.solve_A(k + 1, W[k + 1])
            p[k + 1] = pk
            new = self.apply_R(k, pk) + dt * buf[k + m]
            if m == 1:
                new += 0.5 * dt * C[k + 1] * pk
            else:
                buf[k + 1] += 0.5 * C[k + 1] * pk
            buf[k] = 0.5 * C[k] * pk
            W[k] = new
        return W, p, buf[:m]

    def adjoint(self, w0) -> AdjointTrajectory:
        W, p, hist = self.adjoint_reduced(w0)
        g, op = self.grid, self.op
        tw = g.time_weights
        V = (0.5 * g.dt / tw)[:, None] * (p[:-1] + p[1:])
        return AdjointTrajectory(op.prolong(W), self.chi * op.prolong(V), op.prolong(hist), self.problem, self.grid)

    # -- pairings ---------------------------------------------------------
    def control_inner(self, u, v) -> float:
        """Discrete L2(Q) pairing with trapezoid time weights."""
        return float(np.einsum("k,ki,i->", self.grid.time_weights, np.asarray(u) * np.asarray(v),
                               self.grid.mass_weights))

    def history_inner(self, th1, th2) -> float:
        return self.grid.dt * float(np.sum(np.asarray(th1) * np.asarray(th2) * self.grid.mass_weights))

    def m2_inner(self, pair1, pair2) -> float:
        return inner_h(pair1[0], pair2[0], self.grid) + self.history_inner(pair1[1], pair2[1])


def solve_forward(problem: DelayProblem, grid: Grid, y0, Theta=None, u=None, *, disc: Discretization | None = None,
                  dirichlet_right=None) -> Trajectory:
    """Integrate the retarded system from (y0, Theta) under control u (masked to omega)."""
    disc = disc or Discretization(problem, grid)
    return disc.forward(y0, Theta, u, dirichlet_right)


def solve_adjoint(problem: DelayProblem, grid: Grid, W0, *, disc: Discretization | None = None) -> AdjointTrajectory:
    """Backward integration of the advanced adjoint system from W(T) = W0."""
    disc = disc or Discretization(problem, grid)
    return disc.adjoint(W0)


def duality_pieces(problem, grid, y0, Theta, u, W0, disc=None) -> dict:
    disc = disc or Discretization(problem, grid)
    m = grid.m_delay
    if Theta is None:
        Theta = np.zeros((m, grid.N + 1))
    if u is None:
        u = np.zeros((grid.M + 1, grid.N + 1))
    traj = disc.forward(y0, Theta, u)
    adj = disc.adjoint(W0)
    return {
        "terminal": inner_h(traj.y_T, W0, grid),
        "initial": inner_h(y0, adj.at_zero, grid),
        "history": disc.history_inner(Theta, adj.history),
        "control": disc.control_inner(disc.chi * u, adj.control_dual),
    }


def duality_gap(problem, grid, y0, Theta, u, W0, *, disc: Discretization | None = None) -> float:
    """|<y(T), W0> - <(y0, Theta), S_T^* W0>_M2 - <u, L_T^* W0>_Q|."""
    pieces = duality_pieces(problem, grid, y0, Theta, u, W0, disc)
    return abs(pieces["terminal"] - pieces["initial"] - pieces["history"] - pieces["control"])


def duality_scale(grid, y0, Theta, u, W0) -> float:
    from .model import m2_norm, norm_h
    unorm = 0.0
    if u is not None:
        unorm = math.sqrt(float(np.einsum("k,ki,i->", grid.time_weights, np.asarray(u) ** 2, grid.mass_weights)))
    return (m2_norm(y0, Theta, grid) + unorm) * norm_h(W0, grid)


def history_view(traj: Trajectory, t: float) -> np.ndarray:
    """Rows representing z(t, s, .) = y(t + s, .) for s in [-h, 0]."""
    g = traj.grid
    if t < -1e-12 or t > g.T * (1 + 1e-12):
        from .errors import OffGridTime
        raise OffGridTime(f"t={t} outside [0, T]")
    k = g.time_index(t)
    return traj.values[k:k + g.m_delay + 1]


def energy_estimate_ratio(disc: Discretization, y0, Theta=None, u=None) -> float:
    """(sup_k |y_k|^2 + dt sum_k |sqrt(a) D y_{k+1/2}|^2) / (|y0|^2 + |Theta|^2 + |u|^2)."""
    g, op = disc.grid, disc.op
    traj = disc.forward(y0, Theta, u)
    y = traj.y
    sup = float(np.max((y ** 2) @ g.mass_weights))
    # Crank-Nicolson controls the gradient of step midpoints, not of the nodal rows
    mid = 0.5 * (y[1:] + y[:-1])
    grad = float(np.sum(op.a_mid * np.diff(mid, axis=1) ** 2) / g.dx * g.dt)
    data = inner_h(y0, y0, g)
    if Theta is not None:
        data += disc.history_inner(Theta, Theta)
    if u is not None:
        data += disc.control_inner(disc.chi * u, disc.chi * u)
    return (sup + grad) / data if data > 0 else 0.0
