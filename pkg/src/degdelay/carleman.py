"""Numerical audit of the Carleman / observability machinery.

All inequality checks here are calibrated regression checks: the constants in
the estimates are not explicit, so reports give LHS/RHS ratios which are
compared against bounds frozen in :mod:`degdelay.calibration`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
import scipy.linalg

from .errors import ConfigError, OutOfWindow, ZeroDenominator
from .model import DegeneracyModel, DelayProblem, Field, Grid, PowerLaw, c0_and_psi_primitive
from .solver import AdjointTrajectory, Discretization


# ---------------------------------------------------------------------------
# weights


def weight_theta(t, varsigma: float, l: float):
    """theta_w(t) = 1 / ((t - varsigma)^4 (varsigma + l - t)^4) on the open window."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr <= varsigma) or np.any(t_arr >= varsigma + l):
        raise OutOfWindow(f"t outside ({varsigma}, {varsigma + l})")
    out = 1.0 / ((t_arr - varsigma) ** 4 * (varsigma + l - t_arr) ** 4)
    return float(out) if out.ndim == 0 else out


def _theta_or_inf(t, varsigma, l):
    t = np.asarray(t, dtype=float)
    inside = (t > varsigma) & (t < varsigma + l)
    out = np.full(t.shape, np.inf)
    out[inside] = 1.0 / ((t[inside] - varsigma) ** 4 * (varsigma + l - t[inside]) ** 4)
    return out


@dataclass(frozen=True)
class BumpProfile:
    """C^2 profile: 1 - (1 - x/p1)^3 rising, plateau 1 on [p1, p2], mirror image falling.

    The plateau sits strictly inside the middle third of omega so that the
    derivative vanishes only inside omega_tilde.
    """

    omega: tuple[float, float]

    @property
    def omega_tilde(self) -> tuple[float, float]:
        lo, hi = self.omega
        w = (hi - lo) / 3.0
        return lo + w, hi - w

    @property
    def plateau(self) -> tuple[float, float]:
        lo, hi = self.omega_tilde
        q = (hi - lo) / 4.0
        return lo + q, hi - q

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        p1, p2 = self.plateau
        left = 1.0 - (1.0 - np.clip(x / p1, 0.0, 1.0)) ** 3
        right = 1.0 - (1.0 - np.clip((1.0 - x) / (1.0 - p2), 0.0, 1.0)) ** 3
        return np.where(x <= p1, left, np.where(x >= p2, right, 1.0))

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        p1, p2 = self.plateau
        left = 3.0 * (1.0 - np.clip(x / p1, 0.0, 1.0)) ** 2 / p1
        right = -3.0 * (1.0 - np.clip((1.0 - x) / (1.0 - p2), 0.0, 1.0)) ** 2 / (1.0 - p2)
        return np.where(x <= p1, left, np.where(x >= p2, right, 0.0))

    @property
    def sup(self) -> float:
        return 1.0


@dataclass(frozen=True, eq=False)
class CarlemanParams:
    a: DegeneracyModel
    sigma: object
    rho: float = 1.0
    lam: float | None = None
    d: float | None = None
    s: float = 1.0
    varsigma: float = 0.0
    l: float = 1.0

    def __post_init__(self):
        if self.rho <= 0 or self.l <= 0 or self.s <= 0:
            raise ConfigError("rho, l and s must be positive")
        c0 = self.c0
        d = self.d if self.d is not None else 5.0 * c0
        if not d > 4.0 * c0:
            raise ConfigError(f"d={d} must exceed 4*c0={4 * c0}")
        object.__setattr__(self, "d", float(d))
        if self.lam is None:
            # psi <= Psi pointwise: lam (d - c0) >= exp(2 rho |sigma|) - 1, with 25% slack
            lam = 1.25 * (math.exp(2.0 * self.rho * self.sigma_sup) - 1.0) / (d - c0)
            object.__setattr__(self, "lam", lam)
        if self.lam <= 0:
            raise ConfigError("lambda must be positive")

    @cached_property
    def _primitive(self):
        return c0_and_psi_primitive(self.a)

    @property
    def c0(self) -> float:
        return self._primitive[0]

    @property
    def primitive(self):
        return self._primitive[1]

    @property
    def sigma_sup(self) -> float:
        sup = getattr(self.sigma, "sup", None)
        if sup is None:
            sup = float(np.max(np.abs(self.sigma(np.linspace(0, 1, 4097)))))
        return sup

    def psi(self, x):
        return self.lam * (self.primitive(x) - self.d)

    def Psi(self, x):
        return np.exp(self.rho * self.sigma(x)) - math.exp(2.0 * self.rho * self.sigma_sup)

    def M_on(self, x) -> float:
        return float(np.max(np.abs(self.psi(x))))

    @property
    def M(self) -> float:
        return self.M_on(np.linspace(0.0, 1.0, 1025))

    def with_window(self, varsigma: float, l: float, s: float | None = None) -> "CarlemanParams":
        return CarlemanParams(self.a, self.sigma, self.rho, self.lam, self.d, self.s if s is None else s, varsigma, l)

    def validate_sigma(self, x, omega_tilde) -> float:
        """Smallest |sigma_x| over nodes outside omega_tilde (must be > 0)."""
        x = np.asarray(x, dtype=float)
        sig = self.sigma(x)
        if abs(sig[0]) > 1e-14 or abs(sig[-1]) > 1e-14 or np.any(sig[1:-1] <= 0):
            raise ConfigError("sigma must vanish at 0 and 1 and be positive inside")
        outside = (x <= omega_tilde[0]) | (x >= omega_tilde[1])
        smin = float(np.min(np.abs(self.sigma.derivative(x[outside]))))
        if smin <= 0:
            raise ConfigError("sigma_x vanishes outside omega_tilde")
        return smin


def default_params(problem: DelayProblem, **kw) -> CarlemanParams:
    return CarlemanParams(problem.a, BumpProfile(problem.omega), **kw)


@dataclass
class WeightFields:
    t: np.ndarray
    x: np.ndarray
    theta: np.ndarray
    psi: np.ndarray
    Psi: np.ndarray
    M: float

    @property
    def phi(self) -> np.ndarray:
        return self.theta[:, None] * self.psi[None, :]

    @property
    def Phi(self) -> np.ndarray:
        return self.theta[:, None] * self.Psi[None, :]


def weight_fields(cp: CarlemanParams, x, t) -> WeightFields:
    """psi, Psi on nodes x and theta_w on times t strictly inside the window."""
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    theta = weight_theta(t, cp.varsigma, cp.l)
    theta = np.atleast_1d(theta)
    psi = cp.psi(x)
    return WeightFields(t, x, theta, psi, cp.Psi(x), float(np.max(np.abs(psi))))


# multiples of s0 probed by the audits; 2 s0 keeps e^{2 s phi} above the underflow threshold at mid-window
S_FACTORS = (1.0, 1.25, 1.5, 2.0)


def default_s0(cp: CarlemanParams) -> float:
    """s0 with s0 * max|phi| = 500 over the central half of the window."""
    theta_q = 4.0 ** 8 / (3.0 ** 4 * cp.l ** 8)
    return 500.0 / (cp.M * theta_q)


# ---------------------------------------------------------------------------
# quadrature helpers on (t_k, x_i)


def _x2_over_a(a, x):
    return np.asarray(a.x2_over_a(x), dtype=float)


def _gradient_energy(z, grid: Grid, a_mid):
    """Per-row sum_i a_{i+1/2} (z_{i+1} - z_i)^2 / dx and the matching midpoint weights."""
    dz = np.diff(z, axis=-1)
    return a_mid * dz * dz / grid.dx


@dataclass
class AuditReport:
    rows: list = field(default_factory=list)
    skipped: int = 0
    params: dict = field(default_factory=dict)

    @property
    def ratios(self) -> np.ndarray:
        return np.array([r["ratio"] for r in self.rows if r.get("ratio") is not None and np.isfinite(r["ratio"])])

    @property
    def max_ratio(self) -> float:
        r = self.ratios
        return float(r.max()) if r.size else float("nan")

    def summary(self) -> dict:
        return {"max_ratio": self.max_ratio, "skipped": self.skipped, "rows": len(self.rows), "params": self.params}


def random_field(rng: np.random.Generator, amplitude: float = 1.0) -> Field:
    """Bounded random polynomial field in (t, x) of total degree <= 2."""
    from .model import Polynomial
    coefs = rng.uniform(-1.0, 1.0, size=6) * amplitude / 6.0
    exps = [(0, 0), (1, 0), (0, 1), (1, 1), (2, 0), (0, 2)]
    return Polynomial(tuple((i, j, float(cf)) for (i, j), cf in zip(exps, coefs)))


def _carleman_terms(z, f, wf: WeightFields, s, grid: Grid, a, chi, tw):
    """LHS and RHS of the Carleman inequality for one sample at one s."""
    x = grid.x
    a_mid = a((x[:-1] + x[1:]) * 0.5)
    x2a = _x2_over_a(a, x)
    mw = grid.mass_weights
    st = s * wf.theta[:, None]
    with np.errstate(under="ignore", over="ignore"):
        e_phi = np.exp(2.0 * s * wf.phi)
        e_Phi = np.exp(2.0 * s * wf.Phi)
    grad = _gradient_energy(z, grid, a_mid)  # (K, N)
    e_phi_mid = 0.5 * (e_phi[:, :-1] + e_phi[:, 1:])
    lhs_rows = (st[:, 0] * np.sum(grad * e_phi_mid, axis=1)
                + np.sum(st ** 3 * x2a * z * z * e_phi * mw, axis=1))
    rhs_rows = (np.sum(f * f * e_Phi * mw, axis=1)
                + np.sum(st ** 3 * chi * z * z * e_Phi * mw, axis=1))
    underflow = not np.any(e_phi > 0)
    return float(tw @ lhs_rows), float(tw @ rhs_rows), underflow


def carleman_audit(problem: DelayProblem, grid: Grid, cp: CarlemanParams | None = None, n_samples: int = 10,
                   s_values=None, *, seed: int = 0, random_coefficients: bool = True) -> AuditReport:
    """LHS / RHS of the Carleman inequality on backward adjoint samples.

    Each sample is an adjoint run W with random terminal data (and random
    bounded b, c when ``random_coefficients``); it solves
    z' + (a z_x)_x + b z = f with f = -(c W 1_[0,T])(t + h).
    """
    rng = np.random.default_rng(seed)
    cp = cp or default_params(problem, varsigma=0.0, l=problem.T)
    s0 = default_s0(cp)
    s_values = list(s_values) if s_values is not None else [s0 * f for f in S_FACTORS]
    g = grid
    tk = np.arange(g.M + 1) * g.dt
    inside = (tk > cp.varsigma) & (tk < cp.varsigma + cp.l)
    t_in = tk[inside]
    wf = weight_fields(cp, g.x, t_in)
    tw = g.time_weights[inside]
    chi = problem.omega_mask(g.x)
    report = AuditReport(params={"s0": s0, "s_values": s_values, "rho": cp.rho, "lam": cp.lam, "d": cp.d,
                                 "M": cp.M, "c0": cp.c0, "varsigma": cp.varsigma, "l": cp.l,
                                 "n_samples": n_samples, "seed": seed})
    for j in range(n_samples):
        if random_coefficients:
            prob = DelayProblem(problem.a, random_field(rng), random_field(rng), problem.h, problem.T,
                                problem.omega, problem.bc_kind, problem.domain_right)
        else:
            prob = problem
        disc = Discretization(prob, g)
        w0 = _smooth_sample(g, rng) if j == 0 else rng.standard_normal(g.N + 1)
        adj = disc.adjoint(w0)
        z, f = _adjoint_with_source(adj, disc)
        report_rows = _audit_sample(z[inside], f[inside], wf, s_values, g, problem.a, chi, tw, j)
        for row in report_rows:
            if row["ratio"] is None:
                report.skipped += 1
            report.rows.append(row)
    return report


def _smooth_sample(g: Grid, rng) -> np.ndarray:
    k = np.arange(1, 6)
    coef = rng.standard_normal(k.size) / k
    return np.sin(np.pi * np.outer(g.x / g.domain_right, k)) @ coef


def _adjoint_with_source(adj: AdjointTrajectory, disc: Discretization):
    """Adjoint rows and f = -(c W 1_[0,T])(t + h) on the time grid."""
    g = disc.grid
    m, M = g.m_delay, g.M
    W = adj.values
    tk = np.arange(M + 1) * g.dt
    c = np.broadcast_to(disc.problem.c(tk[:, None], g.x[None, :]), W.shape)
    f = np.zeros_like(W)
    if m <= M:
        f[: M + 1 - m] = -(c * W)[m:]
    return W, f


def _audit_sample(z, f, wf, s_values, g, a, chi, tw, j):
    rows = []
    if not np.any(z):
        for s in s_values:
            rows.append({"sample": j, "s": s, "lhs": 0.0, "rhs": 0.0, "ratio": None, "flag": "zero"})
        return rows
    for s in s_values:
        lhs, rhs, under = _carleman_terms(z, f, wf, s, g, a, chi, tw)
        if under or rhs == 0.0:
            rows.append({"sample": j, "s": s, "lhs": lhs, "rhs": rhs, "ratio": None,
                         "flag": "underflow" if under else "zero-rhs"})
        else:
            rows.append({"sample": j, "s": s, "lhs": lhs, "rhs": rhs, "ratio": lhs / rhs, "flag": ""})
    return rows


def carleman_terms_for(z, f, cp: CarlemanParams, grid: Grid, omega, s: float):
    """LHS, RHS for explicit rows z, f on t_0..t_M (used by tests)."""
    tk = np.arange(grid.M + 1) * grid.dt
    inside = (tk > cp.varsigma) & (tk < cp.varsigma + cp.l)
    wf = weight_fields(cp, grid.x, tk[inside])
    chi = ((grid.x > omega[0]) & (grid.x < omega[1])).astype(float)
    lhs, rhs, _ = _carleman_terms(np.asarray(z)[inside], np.asarray(f)[inside], wf, s, grid, cp.a, chi,
                                  grid.time_weights[inside])
    return lhs, rhs


# ---------------------------------------------------------------------------
# weighted observability on (T_h, T)


def lem42_terms(W, grid: Grid, cp: CarlemanParams, omega, s: float, h: float):
    """LHS = int_{T_h}^T e^{-2 s M theta} |W|^2, RHS = s^3 int_{T_h}^T int_omega W^2."""
    T = grid.T
    T_h = max(0.0, T - h)
    tk = np.arange(grid.M + 1) * grid.dt
    inside = (tk > T_h + 1e-12 * T) & (tk < T - 1e-12 * T)
    theta = _theta_or_inf(tk, T_h, T - T_h)
    M = cp.M
    mw = grid.mass_weights
    chi = ((grid.x > omega[0]) & (grid.x < omega[1])).astype(float)
    sq = (np.asarray(W) ** 2) @ mw
    sq_om = (np.asarray(W) ** 2 * chi) @ mw
    with np.errstate(under="ignore"):
        weight = np.where(inside, np.exp(-2.0 * s * M * np.where(inside, theta, 0.0)), 0.0)
    tw = grid.time_weights
    win = (tk >= T_h - 1e-12 * T)
    lhs = float(np.sum(tw * weight * sq))
    rhs = float(s ** 3 * np.sum(tw * win * sq_om))
    return lhs, rhs


def lem42_weighted_observability(problem: DelayProblem, grid: Grid, cp: CarlemanParams | None = None,
                                 n_samples: int = 10, s_values=None, *, seed: int = 0) -> AuditReport:
    rng = np.random.default_rng(seed)
    T_h = max(0.0, problem.T - problem.h)
    cp = cp or default_params(problem, varsigma=T_h, l=problem.T - T_h)
    cp = cp.with_window(T_h, problem.T - T_h)
    s0 = default_s0(cp)
    s_values = list(s_values) if s_values is not None else [s0 * f for f in S_FACTORS]
    disc = Discretization(problem, grid)
    report = AuditReport(params={"s0": s0, "s_values": s_values, "M": cp.M, "T_h": T_h,
                                 "n_samples": n_samples, "seed": seed})
    for j in range(n_samples):
        w0 = _smooth_sample(grid, rng) if j == 0 else rng.standard_normal(grid.N + 1)
        W = disc.adjoint(w0).values
        if not np.any(W):
            report.skipped += len(s_values)
            continue
        for s in s_values:
            lhs, rhs = lem42_terms(W, grid, cp, problem.omega, s, problem.h)
            if rhs == 0.0 or lhs == 0.0:
                report.skipped += 1
                report.rows.append({"sample": j, "s": s, "lhs": lhs, "rhs": rhs, "ratio": None,
                                    "flag": "underflow" if lhs == 0.0 else "zero-rhs"})
            else:
                report.rows.append({"sample": j, "s": s, "lhs": lhs, "rhs": rhs, "ratio": lhs / rhs, "flag": ""})
    return report


# ---------------------------------------------------------------------------
# Hardy-Poincare


def _cell_integrals_power(alpha, x0, x1, n_pow):
    """int_{x0}^{x1} x^{alpha - 2 + n} dx for n = 0, 1, 2 (vectorised over cells)."""
    out = []
    for n in range(n_pow):
        p = alpha - 1.0 + n
        if abs(p) < 1e-14:
            out.append(np.log(x1 / x0))
        else:
            out.append((x1 ** p - x0 ** p) / p)
    return out


def hardy_matrices(a: DegeneracyModel, x):
    """Weighted mass (a/x^2) and stiffness (a) matrices of P1 functions on nodes x.

    Rows/cols cover every node; the caller removes constrained ones.  Power laws
    are integrated exactly; other coefficients with 10-point Gauss per cell.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    x0, x1 = x[:-1], x[1:]
    hcell = x1 - x0
    alpha = a.alpha
    if alpha is not None:
        # stiffness: int a dx per cell
        if alpha == -1.0:
            raise ConfigError("unsupported exponent")
        A_cell = (x1 ** (alpha + 1) - x0 ** (alpha + 1)) / (alpha + 1)
    else:
        gx, gw = np.polynomial.legendre.leggauss(10)
        pts = 0.5 * (x0 + x1)[:, None] + 0.5 * hcell[:, None] * gx[None, :]
        A_cell = 0.5 * hcell * (np.asarray(a(pts)) @ gw)
    K = np.zeros((n, n))
    kc = A_cell / hcell ** 2
    idx = np.arange(n - 1)
    K[idx, idx] += kc
    K[idx + 1, idx + 1] += kc
    K[idx, idx + 1] -= kc
    K[idx + 1, idx] -= kc
    # weighted mass with basis phi_L = (x1 - x)/h, phi_R = (x - x0)/h
    Mm = np.zeros((n, n))
    if alpha is not None:
        pos = x0 > 0
        I0 = np.full(n - 1, np.inf)
        I1 = np.full(n - 1, np.inf)
        I2 = np.zeros(n - 1)
        j0, j1, j2 = _cell_integrals_power(alpha, x0[pos], x1[pos], 3)
        I0[pos], I1[pos], I2[pos] = j0, j1, j2
        # first cell [0, x1]: only the x^2 moment is finite for alpha <= 1
        first = ~pos
        if np.any(first):
            xr = x1[first]
            I2[first] = xr ** (alpha + 1) / (alpha + 1)
            if alpha > 1.0:
                I1[first] = xr ** alpha / alpha
                I0[first] = xr ** (alpha - 1) / (alpha - 1)
        # phi_L^2 = (x1^2 - 2 x1 x + x^2)/h^2 etc.
        with np.errstate(invalid="ignore"):
            mLL = (x1 ** 2 * I0 - 2 * x1 * I1 + I2) / hcell ** 2
            mRR = (x0 ** 2 * I0 - 2 * x0 * I1 + I2) / hcell ** 2
            mLR = (-x0 * x1 * I0 + (x0 + x1) * I1 - I2) / hcell ** 2
        if np.any(first):
            mRR[first] = I2[first] / hcell[first] ** 2
            if alpha <= 1.0:
                mLL[first] = np.inf
                mLR[first] = np.inf
    else:
        gx, gw = np.polynomial.legendre.leggauss(10)
        pts = 0.5 * (x0 + x1)[:, None] + 0.5 * hcell[:, None] * gx[None, :]
        wq = 0.5 * hcell[:, None] * gw[None, :]
        wgt = np.asarray(a.a_over_x2(pts))
        phiL = (x1[:, None] - pts) / hcell[:, None]
        phiR = (pts - x0[:, None]) / hcell[:, None]
        mLL = np.sum(wq * wgt * phiL ** 2, axis=1)
        mRR = np.sum(wq * wgt * phiR ** 2, axis=1)
        mLR = np.sum(wq * wgt * phiL * phiR, axis=1)
    Mm[idx, idx] += mLL
    Mm[idx + 1, idx + 1] += mRR
    Mm[idx, idx + 1] += mLR
    Mm[idx + 1, idx] += mLR
    return Mm, K


def hardy_poincare_ratio(a: DegeneracyModel, W, x=None) -> float:
    """(int a/x^2 W^2) / (int a W_x^2) for the piecewise-linear interpolant of W."""
    W = np.asarray(W, dtype=float)
    x = np.linspace(0.0, 1.0, W.size) if x is None else np.asarray(x, dtype=float)
    if abs(W[-1]) > 1e-14 * max(1.0, float(np.max(np.abs(W)))):
        raise ConfigError("W must vanish at x = 1")
    Mm, K = hardy_matrices(a, x)
    if not np.isfinite(Mm[0, 0]):
        # a/x^2 not integrable at 0: the first cell uses W ~ W(x_1) x / x_1
        W = W.copy()
        W[0] = 0.0
    den = float(W @ K @ W)
    if not np.any(W) or den <= 0.0:
        raise ZeroDenominator("int a W_x^2 vanishes")
    keep = slice(1, None) if W[0] == 0.0 else slice(None)
    num = float(W[keep] @ Mm[keep, keep] @ W[keep])
    return num / den


def hardy_eigen_bound(a: DegeneracyModel, x, left_dirichlet: bool = True) -> tuple[float, np.ndarray]:
    """Max of the discrete Hardy ratio over P1 functions with W(1) = 0 (and W(0) = 0 if requested)."""
    x = np.asarray(x, dtype=float)
    Mm, K = hardy_matrices(a, x)
    sl = slice(1 if left_dirichlet else 0, x.size - 1)
    vals, vecs = scipy.linalg.eigh(Mm[sl, sl], K[sl, sl])
    W = np.zeros(x.size)
    W[sl] = vecs[:, -1]
    return float(vals[-1]), W


def random_hardy_state(rng: np.random.Generator, x, modes: int = 8) -> np.ndarray:
    """Random sum of cos((k - 1/2) pi x) / k, so W(1) = 0 and W(0) is generically nonzero."""
    k = np.arange(1, modes + 1)
    coef = rng.standard_normal(modes) / k
    W = np.cos(np.outer(np.asarray(x, dtype=float), (k - 0.5) * np.pi)) @ coef
    W[-1] = 0.0
    return W


def hardy_bound(alpha: float) -> float:
    return 4.0 / (1.0 - alpha) ** 2


# ---------------------------------------------------------------------------
# energy functional


def energy_K(problem: DelayProblem) -> float:
    return 5.0 + 2.0 * problem.b_sup + problem.c_sup


def theoretical_log_factor(problem: DelayProblem, s: float | None = None) -> float:
    """log of exp(2^17 s M / (3^4 (T - T_h)^8) + K T), T_h = max(0, T - h).

    This is the explicit exponential part of the analytic observability constant.
    The generic multiplicative constant is not available, so the value is only
    reported next to the empirical certificate, not compared with it.
    """
    T_h = max(0.0, problem.T - problem.h)
    cp = default_params(problem).with_window(T_h, problem.T - T_h)
    s = default_s0(cp) if s is None else float(s)
    return 2.0 ** 17 * s * cp.M / (3.0 ** 4 * (problem.T - T_h) ** 8) + energy_K(problem) * problem.T


def energy_functional(problem: DelayProblem, grid: Grid, W: AdjointTrajectory) -> np.ndarray:
    """E(t_k) = e^{K t_k} (|W(t_k)|^2 + sum_{t_k <= t_j < t_k + min(h,T)} dt |(c W 1_[0,T])(t_j)|^2)."""
    g = grid
    M, m = g.M, g.m_delay
    tk = np.arange(M + 1) * g.dt
    vals = W.values
    mw = g.mass_weights
    c = np.broadcast_to(problem.c(tk[:, None], g.x[None, :]), vals.shape)
    cw2 = ((c * vals) ** 2) @ mw
    w2 = (vals ** 2) @ mw
    window = min(m, M + 1)
    csum = np.concatenate([[0.0], np.cumsum(cw2)])
    hi = np.minimum(np.arange(M + 1) + window, M + 1)
    tail = g.dt * (csum[hi] - csum[np.arange(M + 1)])
    return np.exp(energy_K(problem) * tk) * (w2 + tail)


def energy_violation(E: np.ndarray) -> float:
    """Largest relative decrease max(0, -min_k (E_{k+1} - E_k)) / max E."""
    if not np.any(E):
        return 0.0
    return max(0.0, -float(np.min(np.diff(E)))) / float(np.max(E))


# ---------------------------------------------------------------------------
# decay condition


@dataclass
class DecayVerdict:
    verdict: str
    probes: list

    def summary(self) -> dict:
        return {"verdict": self.verdict, "probes": self.probes}


def decay_condition_check(c: Field, T: float, omega, n_probe: int = 8, *, x=None, G_threshold: float = 50.0,
                          domain_right: float = 1.0) -> DecayVerdict:
    """Probe g(t) = (T - t)^4 ln sup_{x outside omega-bar} |c(t, x)| as t -> T.

    Probes t_j = T - 2^{-j} T / 4, j = 0..n_probe-1.  ln 0 = -inf.
    """
    if n_probe < 4:
        raise ConfigError("n_probe must be >= 4")
    x = np.linspace(0.0, domain_right, 401) if x is None else np.asarray(x, dtype=float)
    outside = (x < omega[0]) | (x > omega[1])
    xs = x[outside]
    probes = []
    for j in range(n_probe):
        t = T - 2.0 ** (-j) * T / 4.0
        log_sup = float(np.max(c.log_abs(np.full(xs.shape, t), xs))) if xs.size else -math.inf
        g = -math.inf if log_sup == -math.inf else (T - t) ** 4 * log_sup
        probes.append({"t": t, "log_sup": log_sup, "g": g})
    gs = [p["g"] for p in probes]
    if gs[-1] == -math.inf:
        return DecayVerdict("satisfied", probes)
    decreasing = all(b < a for a, b in zip(gs, gs[1:]) if math.isfinite(a))
    if decreasing and gs[-1] < -G_threshold:
        return DecayVerdict("satisfied", probes)
    if all(gv > -G_threshold for gv in gs[-3:]):
        return DecayVerdict("violated", probes)
    return DecayVerdict("inconclusive", probes)
