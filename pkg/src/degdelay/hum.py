"""Penalised HUM: null controls from the regularised control Gramian, and an
empirical observability constant from the (S_T S_T^*, L_T L_T^*) pencil."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import DegenerateDenominator, NoConvergence, NonSymmetricOperator
from .model import DelayProblem, Grid, inner_h, m2_norm, norm_h
from .solver import Discretization


def _disc(problem_or_disc, grid=None) -> Discretization:
    if isinstance(problem_or_disc, Discretization):
        return problem_or_disc
    return Discretization(problem_or_disc, grid)


def apply_LT(disc: Discretization, u) -> np.ndarray:
    """Terminal state driven by u from zero data."""
    g = disc.grid
    return disc.forward(np.zeros(g.N + 1), None, u).y_T


def apply_LT_star(disc: Discretization, W0) -> np.ndarray:
    """Adjoint of apply_LT: the adjoint solution seen on omega x (0, T)."""
    return disc.adjoint(W0).control_dual


def apply_ST(disc: Discretization, y0, Theta=None) -> np.ndarray:
    return disc.forward(y0, Theta, None).y_T


def apply_ST_star(disc: Discretization, W0) -> tuple[np.ndarray, np.ndarray]:
    """(W(0), history rows of (c W 1_[0, min(h, T)])(s + h)) from one adjoint solve."""
    adj = disc.adjoint(W0)
    return adj.at_zero, adj.history


def gramian(disc: Discretization, W0, epsilon: float = 0.0) -> np.ndarray:
    return apply_LT(disc, apply_LT_star(disc, W0)) + epsilon * np.asarray(W0, dtype=float)


@dataclass
class ControlResult:
    u: np.ndarray
    terminal_norm: float
    control_norm: float
    data_norm: float
    ratio: float
    epsilon: float
    cg_iterations: int
    cg_residual: float
    residual_history: list = field(default_factory=list)
    functional_history: list = field(default_factory=list)
    W0: np.ndarray | None = None
    terminal_state: np.ndarray | None = None

    def summary(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "terminal_norm": self.terminal_norm,
            "control_norm": self.control_norm,
            "data_norm": self.data_norm,
            "ratio": self.ratio,
            "cg_iterations": self.cg_iterations,
            "cg_residual": self.cg_residual,
        }


def symmetry_probe(disc: Discretization, epsilon: float, rng: np.random.Generator) -> float:
    """Relative asymmetry |<Lx, y> - <x, Ly>| / (|Lx| |y|) of the regularised Gramian."""
    g = disc.grid
    x, y = rng.standard_normal(g.N + 1), rng.standard_normal(g.N + 1)
    lx, ly = gramian(disc, x, epsilon), gramian(disc, y, epsilon)
    scale = max(norm_h(lx, g) * norm_h(y, g), norm_h(ly, g) * norm_h(x, g), 1e-300)
    return abs(inner_h(lx, y, g) - inner_h(x, ly, g)) / scale


def conjugate_gradient(apply, rhs, inner, tol, max_iter):
    """Plain CG in a weighted inner product.

    Returns (x, iterations, relative residual, residual history, functional history)
    where the functional is J(x) = 1/2 <Ax, x> - <b, x>, nonincreasing along CG.
    """
    x = np.zeros_like(rhs)
    r = rhs.copy()
    bnorm = math.sqrt(inner(rhs, rhs))
    rr = inner(r, r)
    res_hist = [math.sqrt(rr) / bnorm]
    fun_hist = [0.0]
    if res_hist[0] <= tol:
        return x, 0, res_hist[0], res_hist, fun_hist
    d = r.copy()
    for it in range(1, max_iter + 1):
        Ad = apply(d)
        dAd = inner(d, Ad)
        alpha = rr / dAd
        x = x + alpha * d
        r = r - alpha * Ad
        rr_new = inner(r, r)
        res_hist.append(math.sqrt(rr_new) / bnorm)
        fun_hist.append(-0.5 * inner(x, rhs + r))
        if res_hist[-1] <= tol:
            return x, it, res_hist[-1], res_hist, fun_hist
        d = r + (rr_new / rr) * d
        rr = rr_new
    raise NoConvergence(f"CG did not reach {tol:g} in {max_iter} iterations",
                        partial=(x, max_iter, res_hist[-1], res_hist, fun_hist))


def synthesize_null_control(problem: DelayProblem, grid: Grid, y0, Theta=None, epsilon: float = 1e-6,
                            cg_tol: float = 1e-9, max_iter: int = 1000, *, disc: Discretization | None = None,
                            seed: int = 0) -> ControlResult:
    """Penalised HUM control steering (y0, Theta) towards 0 at time T.

    Solves (L_T L_T^* + eps) W0 = -S_T(y0, Theta) by CG and sets u = L_T^* W0.
    """
    if epsilon <= 0 or cg_tol <= 0:
        raise ValueError("epsilon and cg_tol must be positive")
    disc = disc or Discretization(problem, grid)
    g = disc.grid
    y0 = np.asarray(y0, dtype=float)
    if Theta is None:
        Theta = np.zeros((g.m_delay, g.N + 1))
    data_norm = m2_norm(y0, Theta, g)
    rhs = -apply_ST(disc, y0, Theta)
    zero_u = np.zeros((g.M + 1, g.N + 1))
    if norm_h(rhs, g) == 0.0:
        return ControlResult(zero_u, 0.0, 0.0, data_norm, 0.0 if data_norm == 0 else 0.0, epsilon, 0, 0.0,
                             [0.0], [0.0], np.zeros(g.N + 1), np.zeros(g.N + 1))
    asym = symmetry_probe(disc, epsilon, np.random.default_rng(seed))
    if asym > 1e-8:
        raise NonSymmetricOperator(f"Gramian asymmetry {asym:.3e} exceeds 1e-8; adjoint pair is broken")

    def inner(a, b):
        return inner_h(a, b, g)

    W0, its, res, res_hist, fun_hist = conjugate_gradient(lambda v: gramian(disc, v, epsilon), rhs, inner,
                                                          cg_tol, max_iter)
    u = apply_LT_star(disc, W0)
    yT = disc.forward(y0, Theta, u).y_T
    control_norm = math.sqrt(max(disc.control_inner(u, u), 0.0))
    ratio = control_norm / data_norm if data_norm > 0 else math.inf
    return ControlResult(u, norm_h(yT, g), control_norm, data_norm, ratio, epsilon, its, res,
                         res_hist, fun_hist, W0, yT)


def epsilon_sweep(problem, grid, y0, Theta=None, epsilons=(1e-2, 1e-4, 1e-6), cg_tol=1e-9, max_iter=1000,
                  disc=None, seed=0) -> list[ControlResult]:
    disc = disc or Discretization(problem, grid)
    return [synthesize_null_control(problem, grid, y0, Theta, eps, cg_tol, max_iter, disc=disc, seed=seed)
            for eps in epsilons]


@dataclass
class Certificate:
    C_lower: float
    worst_W0: np.ndarray
    sample_ratios: list
    rayleigh: list
    skipped: int
    delta: float

    def summary(self) -> dict:
        return {"C_lower": self.C_lower, "samples": len(self.sample_ratios), "skipped": self.skipped,
                "power_iters": len(self.rayleigh), "delta": self.delta,
                "rayleigh_final": self.rayleigh[-1] if self.rayleigh else None}


def pencil_factors(disc: Discretization):
    """Factors S, F with S S^T = Gram(S_T^*) and F F^T = Gram(L_T^*) in the free-node basis.

    Working with the factors instead of the Gram matrices avoids squaring the
    (severe) conditioning of the control Gramian.
    """
    g, op = disc.grid, disc.op
    n = op.n
    basis = op.prolong(np.eye(n))
    tw, mw = g.time_weights, g.mass_weights
    ctrl, ws, hist = [], [], []
    for i in range(n):
        adj = disc.adjoint(basis[i])
        ctrl.append((adj.control_dual * np.sqrt(tw)[:, None] * np.sqrt(mw)).ravel())
        ws.append(adj.at_zero * np.sqrt(mw))
        hist.append((adj.history * np.sqrt(g.dt * mw)).ravel())
    F = np.asarray(ctrl)
    S = np.hstack([np.asarray(ws), np.asarray(hist).reshape(n, -1)])
    return S, F, op.d.copy()


def _regularised(F, d):
    """Factor Z with Z Z^T = F F^T + delta * diag(d), delta = 1e-12 * trace scale."""
    trace = float(np.sum(F * F))
    delta = 1e-12 * trace / float(np.sum(d)) if trace > 0 else 1e-300
    Z = np.hstack([F, np.diag(np.sqrt(delta * d))])
    return Z, delta


def observability_certificate(problem: DelayProblem, grid: Grid, samples: int = 16, power_iters: int = 60, *,
                              seed: int = 0, disc: Discretization | None = None,
                              extra_samples=None) -> Certificate:
    """Lower bound for the observability constant:
    max |S_T^* W0|^2_M2 / |L_T^* W0|^2 over random and power-iterated W0."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    disc = disc or Discretization(problem, grid)
    op = disc.op
    S, F, d = pencil_factors(disc)
    Z, delta = _regularised(F, d)
    R = scipy.linalg.qr(Z.T, mode="r")[0][: op.n]

    def quotient(x):
        num = float(np.sum((S.T @ x) ** 2))
        den = float(np.sum((Z.T @ x) ** 2))
        if num == 0.0 and den == 0.0:
            return None
        if den < 1e-14 * num:
            raise DegenerateDenominator(f"denominator {den:.3e} vs numerator {num:.3e}")
        return num / den

    rng = np.random.default_rng(seed)
    cands = [op.restrict(w) for w in (extra_samples or [])]
    cands += [rng.standard_normal(op.n) for _ in range(samples)]
    ratios, skipped, best, best_x = [], 0, -math.inf, None
    for x in cands:
        try:
            q = quotient(x)
        except DegenerateDenominator:
            skipped += 1
            continue
        if q is None:
            skipped += 1
            continue
        ratios.append(q)
        if q > best:
            best, best_x = q, x
    rayleigh = []
    if best_x is not None:
        x = best_x / math.sqrt(np.sum((Z.T @ best_x) ** 2))
        for _ in range(power_iters):
            try:
                q = quotient(x)
            except DegenerateDenominator:
                skipped += 1
                break
            rayleigh.append(q)
            x = scipy.linalg.cho_solve((R, False), S @ (S.T @ x))
            nrm = math.sqrt(np.sum((Z.T @ x) ** 2))
            if nrm == 0.0:
                break
            x = x / nrm
        if rayleigh and rayleigh[-1] > best:
            best, best_x = rayleigh[-1], x
    worst = op.prolong(best_x) if best_x is not None else np.zeros(disc.grid.N + 1)
    if best_x is not None:
        worst = worst / max(norm_h(worst, disc.grid), 1e-300)
    return Certificate(best if best_x is not None else 0.0, worst, ratios, rayleigh, skipped, delta)


def certificate_exact(disc: Discretization) -> float:
    """Largest generalised eigenvalue of the pencil (dense oracle for small grids)."""
    S, F, d = pencil_factors(disc)
    Z, _ = _regularised(F, d)
    return float(scipy.linalg.eigh(S @ S.T, Z @ Z.T, eigvals_only=True)[-1])
