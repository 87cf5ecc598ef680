"""Domain types: diffusion coefficients, degeneracy classification, problem data and grids."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, DivergentIntegral, GridError, RejectedCoefficient


class Kind(str, enum.Enum):
    WEAK = "WD"
    STRONG = "SD"
    NONDEGENERATE = "ND"


class BCKind(str, enum.Enum):
    DIRICHLET_BOTH = "dirichlet"
    NEUMANN_LEFT = "neumann-left"


# ---------------------------------------------------------------------------
# coefficient families a(x)


@dataclass(frozen=True)
class PowerLaw:
    """a(x) = x**alpha."""

    alpha: float

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.alpha == 0.0:
            return np.ones_like(x)
        return np.power(x, self.alpha)

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        if self.alpha == 0.0:
            return np.zeros_like(x)
        with np.errstate(divide="ignore"):
            return self.alpha * np.power(x, self.alpha - 1.0)

    def x_over_a(self, x):
        return np.power(np.asarray(x, dtype=float), 1.0 - self.alpha)

    def x2_over_a(self, x):
        return np.power(np.asarray(x, dtype=float), 2.0 - self.alpha)

    def a_over_x2(self, x):
        with np.errstate(divide="ignore"):
            return np.power(np.asarray(x, dtype=float), self.alpha - 2.0)

    @property
    def right(self) -> float:
        return 1.0


@dataclass(frozen=True, eq=False)
class Tabulated:
    """Piecewise-linear coefficient through sampled values, with sampled derivative.

    If ``derivs`` is omitted it is estimated with second-order finite differences.
    """

    nodes: np.ndarray
    values: np.ndarray
    derivs: np.ndarray | None = None

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if nodes.ndim != 1 or nodes.shape != values.shape or nodes.size < 3:
            raise ConfigError("tabulated coefficient needs matching 1-d node/value arrays (>= 3 points)")
        if np.any(np.diff(nodes) <= 0):
            raise ConfigError("tabulated nodes must be strictly increasing")
        derivs = self.derivs
        if derivs is None:
            derivs = np.gradient(values, nodes, edge_order=2)
        derivs = np.asarray(derivs, dtype=float)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "derivs", derivs)

    def __call__(self, x):
        return np.interp(x, self.nodes, self.values)

    def derivative(self, x):
        return np.interp(x, self.nodes, self.derivs)

    def x_over_a(self, x):
        x = np.asarray(x, dtype=float)
        a = self(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(x > 0, x / a, 0.0)

    def x2_over_a(self, x):
        x = np.asarray(x, dtype=float)
        a = self(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(x > 0, x * x / a, 0.0)

    def a_over_x2(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            return self(x) / (x * x)

    @property
    def right(self) -> float:
        return float(self.nodes[-1])

    @classmethod
    def from_csv(cls, path) -> "Tabulated":
        data = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
        if data.shape[1] not in (2, 3):
            raise ConfigError(f"{path}: expected columns x,a(x)[,a'(x)]")
        return cls(data[:, 0], data[:, 1], data[:, 2] if data.shape[1] == 3 else None)


@dataclass(frozen=True, eq=False)
class ConstantExtension:
    """base(x) on [0, join], base(join) beyond."""

    base: object
    join: float = 1.0
    right_end: float = 2.0

    @cached_property
    def _value(self) -> float:
        return float(self.base(self.join))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        inner = self.base(np.minimum(x, self.join))
        return np.where(x <= self.join, inner, self._value)

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x <= self.join, self.base.derivative(np.minimum(x, self.join)), 0.0)

    def x_over_a(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x <= self.join, self.base.x_over_a(np.minimum(x, self.join)), x / self._value)

    def x2_over_a(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x <= self.join, self.base.x2_over_a(np.minimum(x, self.join)), x * x / self._value)

    def a_over_x2(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            return np.where(x <= self.join, self.base.a_over_x2(np.minimum(x, self.join)), self._value / (x * x))

    @property
    def right(self) -> float:
        return self.right_end

    def to_tabulated(self, n: int = 2049) -> Tabulated:
        xs = np.linspace(0.0, self.right_end, n)
        return Tabulated(xs, self(xs), self.derivative(xs))


@dataclass(frozen=True, eq=False)
class DegeneracyModel:
    form: object
    kind: Kind
    K: float
    theta_deg: float | None = None

    def __call__(self, x):
        return self.form(x)

    def derivative(self, x):
        return self.form.derivative(x)

    def x_over_a(self, x):
        return self.form.x_over_a(x)

    def x2_over_a(self, x):
        return self.form.x2_over_a(x)

    def a_over_x2(self, x):
        return self.form.a_over_x2(x)

    @property
    def alpha(self) -> float | None:
        return self.form.alpha if isinstance(self.form, PowerLaw) else None

    def default_bc(self) -> BCKind:
        return BCKind.NEUMANN_LEFT if self.kind is Kind.STRONG else BCKind.DIRICHLET_BOTH


def _sd_exponent(q_near: np.ndarray, x_near: np.ndarray, K: float) -> float | None:
    """Largest admissible exponent for the monotonicity of a(x)/x**theta near 0.

    a/x**theta is nondecreasing where x a'/a >= theta, so the bound is the infimum
    of q = x a'/a over the neighbourhood, including its extrapolated limit at 0+.
    """
    q_inf = float(np.min(q_near))
    if x_near.size >= 3:
        coef = np.polyfit(x_near[:3], q_near[:3], 2)
        q_inf = min(q_inf, float(np.polyval(coef, 0.0)))
    tol = 1e-6
    if K > 1.0:
        if q_inf <= 1.0 + tol:
            return None
        return min(K, q_inf)
    # K == 1: any theta in (0, 1) below the infimum
    if q_inf <= tol:
        return None
    return 0.5 * min(q_inf, 1.0)


def classify_degeneracy(form, *, radius: float = 0.1, scan_nodes: int = 20001) -> DegeneracyModel:
    """Classify a coefficient as weakly / strongly degenerate at 0, or nondegenerate.

    Returns the smallest admissible K (``x a' <= K a``) and, for strong
    degeneracy, an exponent ``theta_deg`` for which a(x)/x**theta_deg is
    nondecreasing on nodes below ``radius``.
    """
    if isinstance(form, DegeneracyModel):
        form = form.form
    if isinstance(form, PowerLaw):
        alpha = float(form.alpha)
        if not (0.0 <= alpha < 2.0) or not math.isfinite(alpha):
            raise RejectedCoefficient(f"power law exponent {alpha} outside [0, 2)")
        if alpha == 0.0:
            return DegeneracyModel(form, Kind.NONDEGENERATE, 0.0)
        if alpha < 1.0:
            return DegeneracyModel(form, Kind.WEAK, alpha)
        return DegeneracyModel(form, Kind.STRONG, alpha, alpha if alpha > 1.0 else 0.5)

    if isinstance(form, Tabulated):
        x, a, da = form.nodes, form.values, form.derivs
    else:
        x = np.linspace(0.0, getattr(form, "right", 1.0), scan_nodes)
        a, da = np.asarray(form(x), float), np.asarray(form.derivative(x), float)
    if np.any(a < 0):
        raise RejectedCoefficient("coefficient takes negative values")
    if a[0] > 0:
        K = float(np.max(np.where(x > 0, x * da / a, 0.0))) if np.all(a > 0) else 0.0
        return DegeneracyModel(form, Kind.NONDEGENERATE, max(K, 0.0))
    if np.any(a[1:] <= 0):
        raise RejectedCoefficient("coefficient vanishes inside (0, 1]")
    pos = x > 0
    q = np.zeros_like(x)
    q[pos] = x[pos] * da[pos] / a[pos]
    K = max(float(np.max(q)), 0.0)
    if K >= 2.0:
        raise RejectedCoefficient(f"degeneracy constant K={K:.6g} >= 2")
    if K < 1.0:
        return DegeneracyModel(form, Kind.WEAK, K)
    near = pos & (x <= radius)
    if not np.any(near):
        raise RejectedCoefficient("no scan nodes inside the neighbourhood of 0")
    theta = _sd_exponent(q[near], x[near], K)
    if theta is None:
        raise RejectedCoefficient(
            f"K={K:.6g} but a(x)/x^theta is not nondecreasing near 0 for any admissible theta")
    return DegeneracyModel(form, Kind.STRONG, K, theta)


# ---------------------------------------------------------------------------
# quadrature of x/a(x)

_GL_HI = np.polynomial.legendre.leggauss(20)
_GL_LO = np.polynomial.legendre.leggauss(10)


def _gauss(f, lo, hi, rule):
    nodes, weights = rule
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    pts = mid[:, None] + half[:, None] * nodes[None, :]
    return half * (np.asarray(f(pts)) @ weights)


def _adaptive_pieces(f, breaks, rtol, max_depth=30):
    """Per-interval integrals with bisection until 10- and 20-point rules agree."""
    lo, hi = breaks[:-1].copy(), breaks[1:].copy()
    out_lo, out_val = [], []
    for _ in range(max_depth):
        fine = _gauss(f, lo, hi, _GL_HI)
        coarse = _gauss(f, lo, hi, _GL_LO)
        ok = np.abs(fine - coarse) <= rtol * np.maximum(np.abs(fine), 1e-300)
        out_lo.append(lo[ok])
        out_val.append(fine[ok])
        if ok.all():
            break
        mid = 0.5 * (lo[~ok] + hi[~ok])
        lo, hi = np.concatenate([lo[~ok], mid]), np.concatenate([mid, hi[~ok]])
    else:
        raise DivergentIntegral("quadrature of x/a(x) did not converge")
    lo_all = np.concatenate(out_lo)
    val_all = np.concatenate(out_val)
    order = np.argsort(lo_all)
    return lo_all[order], val_all[order]


@dataclass(frozen=True, eq=False)
class Primitive:
    """x -> int_0^x y/a(y) dy backed by a cumulative table."""

    xs: np.ndarray
    cum: np.ndarray
    integrand: Callable | None = None

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        flat = np.clip(np.atleast_1d(x).ravel(), 0.0, self.xs[-1])
        out = np.interp(flat, self.xs, self.cum)
        if self.integrand is not None:
            # complete the partial piece exactly; the piece below xs[1] keeps the table value
            j = np.clip(np.searchsorted(self.xs, flat, side="right") - 1, 0, self.xs.size - 2)
            inner = (j >= 1) & (flat > self.xs[j])
            if np.any(inner):
                lo = self.xs[j[inner]]
                with np.errstate(all="ignore"):
                    out[inner] = self.cum[j[inner]] + _gauss(self.integrand, lo, flat[inner], _GL_HI)
        return out.reshape(x.shape) if x.ndim else float(out[0])


def c0_and_psi_primitive(a, *, n_uniform: int = 2048, rtol: float = 1e-10) -> tuple[float, Primitive]:
    """c0 = int_0^1 x/a(x) dx together with its running primitive.

    The interval is split geometrically toward the singular endpoint 0; below
    the last dyadic point the geometric decay of the dyadic contributions is
    summed in closed form.
    """
    f = a.x_over_a if hasattr(a, "x_over_a") else (lambda x: x / a(x))
    n_dyadic = 60
    first = 1.0 / n_uniform
    dyadic = first * 2.0 ** -np.arange(n_dyadic, 0, -1)
    breaks = np.concatenate([dyadic, np.linspace(first, 1.0, n_uniform)])
    form = getattr(a, "form", a)
    if isinstance(form, Tabulated):
        extra = form.nodes[(form.nodes > first) & (form.nodes < 1.0)]
        breaks = np.union1d(breaks, extra)
    with np.errstate(all="ignore"):
        lo, vals = _adaptive_pieces(f, breaks, rtol * 1e-2)
    if not np.all(np.isfinite(vals)):
        raise DivergentIntegral("x/a(x) is not integrable on (0, 1)")
    # contributions of the first dyadic intervals [2^-k-1, 2^-k] * first
    first_two = _gauss(f, dyadic[:2], dyadic[1:3], _GL_HI)
    r = first_two[0] / first_two[1] if first_two[1] > 0 else 0.0
    if not np.isfinite(r) or r >= 1.0 - 1e-9:
        raise DivergentIntegral("x/a(x) is not integrable near 0")
    tail = first_two[0] * r / (1.0 - r) if first_two[0] > 0 else 0.0
    # lo are the sorted left endpoints of the accepted pieces
    xs = np.concatenate([[0.0], lo, [1.0]])
    cum = np.concatenate([[0.0], tail + np.concatenate([[0.0], np.cumsum(vals)])])
    P = Primitive(xs, cum, f)
    c0 = float(cum[-1])
    if not math.isfinite(c0):
        raise DivergentIntegral("x/a(x) is not integrable on (0, 1)")
    return c0, P


# ---------------------------------------------------------------------------
# coefficient fields b(t, x), c(t, x)


class Field:
    """Bounded coefficient field on (0, T) x (0, L)."""

    def __call__(self, t, x):
        raise NotImplementedError

    def sup_norm(self, T: float, right: float = 1.0, n: int = 257) -> float:
        t = np.linspace(0.0, T, n)[:, None]
        x = np.linspace(0.0, right, n)[None, :]
        return float(np.max(np.abs(np.broadcast_to(self(t, x), (n, n)))))

    def log_abs(self, t, x):
        """ln|field|, with ln 0 = -inf.  Overridden where underflow would lose information."""
        with np.errstate(divide="ignore"):
            return np.log(np.abs(np.broadcast_to(self(t, x), np.broadcast(np.asarray(t), np.asarray(x)).shape)))

    def describe(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Constant(Field):
    value: float = 0.0

    def __call__(self, t, x):
        return np.full(np.broadcast(np.asarray(t), np.asarray(x)).shape, float(self.value))

    def sup_norm(self, T, right=1.0, n=257):
        return abs(float(self.value))

    def describe(self):
        return {"kind": "constant", "value": self.value}


@dataclass(frozen=True)
class Polynomial(Field):
    """sum of coef * t**i * x**j over ``terms = ((i, j, coef), ...)``."""

    terms: tuple = ()

    def __call__(self, t, x):
        t, x = np.asarray(t, float), np.asarray(x, float)
        out = np.zeros(np.broadcast(t, x).shape)
        for i, j, coef in self.terms:
            out = out + coef * t ** int(i) * x ** int(j)
        return out

    def describe(self):
        return {"kind": "polynomial", "terms": [list(term) for term in self.terms]}


@dataclass(frozen=True)
class FlatDecay(Field):
    """amplitude * exp(-(T - t)**-power), vanishing for t >= T."""

    horizon: float
    power: float = 5.0
    amplitude: float = 1.0

    def __call__(self, t, x):
        t, x = np.asarray(t, float), np.asarray(x, float)
        gap = np.broadcast_to(self.horizon - t, np.broadcast(t, x).shape)
        out = np.zeros(gap.shape)
        pos = gap > 0
        with np.errstate(over="ignore", under="ignore"):
            out[pos] = self.amplitude * np.exp(-gap[pos] ** -self.power)
        return out

    def log_abs(self, t, x):
        t, x = np.asarray(t, float), np.asarray(x, float)
        gap = np.broadcast_to(self.horizon - t, np.broadcast(t, x).shape)
        out = np.full(gap.shape, -np.inf)
        pos = gap > 0
        if self.amplitude != 0:
            out[pos] = math.log(abs(self.amplitude)) - gap[pos] ** -self.power
        return out

    def describe(self):
        return {"kind": "flat", "power": self.power, "amplitude": self.amplitude}


@dataclass(frozen=True)
class Indicator(Field):
    """inner(t, x) restricted to lo < x < hi (closed ends optional)."""

    inner: Field
    lo: float
    hi: float
    closed: bool = False

    def __call__(self, t, x):
        x = np.asarray(x, float)
        if self.closed:
            mask = (x >= self.lo) & (x <= self.hi)
        else:
            mask = (x > self.lo) & (x < self.hi)
        return np.where(mask, self.inner(t, x), 0.0)

    def sup_norm(self, T, right=1.0, n=257):
        return self.inner.sup_norm(T, right, n)

    def log_abs(self, t, x):
        x = np.asarray(x, float)
        mask = (x >= self.lo) & (x <= self.hi) if self.closed else (x > self.lo) & (x < self.hi)
        return np.where(mask, self.inner.log_abs(t, x), -np.inf)

    def describe(self):
        return {"kind": "indicator", "lo": self.lo, "hi": self.hi, "closed": self.closed,
                "inner": self.inner.describe()}


@dataclass(frozen=True)
class Product(Field):
    factors: tuple = ()

    def __call__(self, t, x):
        out = np.ones(np.broadcast(np.asarray(t), np.asarray(x)).shape)
        for f in self.factors:
            out = out * f(t, x)
        return out

    def log_abs(self, t, x):
        out = np.zeros(np.broadcast(np.asarray(t), np.asarray(x)).shape)
        for f in self.factors:
            out = out + f.log_abs(t, x)
        return out

    def describe(self):
        return {"kind": "product", "factors": [f.describe() for f in self.factors]}


@dataclass(frozen=True, eq=False)
class FunctionField(Field):
    """Arbitrary vectorised callable; library use only (not expressible in configs)."""

    fn: Callable

    def __call__(self, t, x):
        t, x = np.asarray(t, float), np.asarray(x, float)
        return np.broadcast_to(np.asarray(self.fn(t, x), float), np.broadcast(t, x).shape)

    def describe(self):
        return {"kind": "function", "name": getattr(self.fn, "__name__", "anonymous")}


# ---------------------------------------------------------------------------
# problem and grid


@dataclass(frozen=True, eq=False)
class DelayProblem:
    a: DegeneracyModel
    b: Field
    c: Field
    h: float
    T: float
    omega: tuple[float, float]
    bc_kind: BCKind | None = None
    domain_right: float = 1.0

    def __post_init__(self):
        bc = self.bc_kind if self.bc_kind is not None else self.a.default_bc()
        object.__setattr__(self, "bc_kind", BCKind(bc))
        object.__setattr__(self, "omega", (float(self.omega[0]), float(self.omega[1])))
        if not (self.h > 0 and self.T > 0):
            raise ConfigError("delay h and horizon T must be positive")
        lo, hi = self.omega
        if not (0.0 < lo < hi <= self.domain_right):
            raise ConfigError(f"control window {self.omega} not inside (0, {self.domain_right})")
        kind = self.a.kind
        if kind is Kind.WEAK and self.bc_kind is not BCKind.DIRICHLET_BOTH:
            raise ConfigError("weakly degenerate coefficient requires Dirichlet conditions at both ends")
        if kind is Kind.STRONG and self.bc_kind is not BCKind.NEUMANN_LEFT:
            raise ConfigError("strongly degenerate coefficient requires the weighted Neumann condition at 0")

    @cached_property
    def b_sup(self) -> float:
        return self.b.sup_norm(self.T, self.domain_right)

    @cached_property
    def c_sup(self) -> float:
        return self.c.sup_norm(self.T, self.domain_right)

    def omega_mask(self, x):
        x = np.asarray(x, float)
        return ((x > self.omega[0]) & (x < self.omega[1])).astype(float)


@dataclass(frozen=True)
class Grid:
    N: int
    M: int
    m_delay: int
    T: float
    h: float
    domain_right: float = 1.0

    @classmethod
    def build(cls, T: float, h: float, N: int, M: int, domain_right: float = 1.0,
              max_denominator: int = 100000) -> "Grid":
        """Uniform grid with M rounded up so the delay is a whole number of steps."""
        if N < 8 or M < 8:
            raise GridError("grid needs N >= 8 and M >= 8")
        ratio = Fraction(h / T).limit_denominator(max_denominator)
        if abs(float(ratio) - h / T) > 1e-12 * (h / T):
            raise GridError(f"h/T = {h / T!r} is not a ratio of small integers")
        p, q = ratio.numerator, ratio.denominator
        M_aligned = -(-M // q) * q
        m = M_aligned * p // q
        grid = cls(N, M_aligned, m, float(T), float(h), float(domain_right))
        if abs(grid.m_delay * grid.dt - h) > 1e-12 * max(h, 1.0):
            raise GridError("delay not aligned with time step")
        return grid

    @classmethod
    def for_problem(cls, problem: DelayProblem, N: int, M: int) -> "Grid":
        return cls.build(problem.T, problem.h, N, M, problem.domain_right)

    @property
    def dx(self) -> float:
        return self.domain_right / self.N

    @property
    def dt(self) -> float:
        return self.T / self.M

    @property
    def x(self) -> np.ndarray:
        return np.linspace(0.0, self.domain_right, self.N + 1)

    @property
    def t(self) -> np.ndarray:
        """Times t_k for k = -m_delay..M."""
        return np.arange(-self.m_delay, self.M + 1) * self.dt

    @property
    def mass_weights(self) -> np.ndarray:
        w = np.full(self.N + 1, self.dx)
        w[0] = w[-1] = 0.5 * self.dx
        return w

    @property
    def time_weights(self) -> np.ndarray:
        """Trapezoid weights on t_0..t_M."""
        w = np.full(self.M + 1, self.dt)
        w[0] = w[-1] = 0.5 * self.dt
        return w

    def time_index(self, t: float) -> int:
        k = t / self.dt
        kr = int(round(k))
        if abs(k - kr) > 1e-9 * max(1.0, abs(k)):
            from .errors import OffGridTime
            raise OffGridTime(f"t={t} is not a grid time (dt={self.dt})")
        return kr


def inner_h(u, v, grid: Grid) -> float:
    """Trapezoid L2 inner product on the spatial grid (last axis)."""
    return float(np.sum(np.asarray(u) * np.asarray(v) * grid.mass_weights))


def norm_h(u, grid: Grid) -> float:
    return math.sqrt(max(inner_h(u, u, grid), 0.0))


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Space-time solution including the history rows k = -m_delay..-1."""

    values: np.ndarray
    problem: DelayProblem
    grid: Grid

    def row(self, k: int) -> np.ndarray:
        if not -self.grid.m_delay <= k <= self.grid.M:
            raise IndexError(k)
        return self.values[k + self.grid.m_delay]

    @property
    def y_T(self) -> np.ndarray:
        return self.values[-1]

    @property
    def y(self) -> np.ndarray:
        """Rows k = 0..M."""
        return self.values[self.grid.m_delay:]

    @property
    def history(self) -> np.ndarray:
        return self.values[:self.grid.m_delay]

    def norms(self) -> np.ndarray:
        return np.sqrt(np.maximum(self.y ** 2 @ self.grid.mass_weights, 0.0))


def m2_norm(y0, theta, grid: Grid) -> float:
    """Discrete M2 norm: present state plus dt-weighted history rows."""
    total = inner_h(y0, y0, grid)
    if theta is not None and np.size(theta):
        total += grid.dt * float(np.sum((np.asarray(theta) ** 2) @ grid.mass_weights))
    return math.sqrt(total)


def as_model(a) -> DegeneracyModel:
    if isinstance(a, DegeneracyModel):
        return a
    return classify_degeneracy(a)


def power_law_problem(alpha: float, *, b: Field | None = None, c: Field | None = None, h: float = 0.25,
                      T: float = 0.5, omega: Sequence[float] = (0.3, 0.8), bc_kind=None) -> DelayProblem:
    """Convenience constructor used by tests, scripts and the CLI defaults."""
    model = classify_degeneracy(PowerLaw(alpha))
    return DelayProblem(model, b or Constant(0.0), c or Constant(0.0), h, T, tuple(omega), bc_kind)
