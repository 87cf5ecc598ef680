"""Invariant suite behind the ``verify`` subcommand.

Each check returns ``Check(name, passed, value, bound)``.  Checks are
independent and deterministic given the seed, so they can run in any order on
a worker pool.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import calibration
from .boundary import boundary_null_control
from .carleman import (decay_condition_check, hardy_bound, hardy_eigen_bound, hardy_poincare_ratio, random_field,
                       random_hardy_state)
from .config import ExperimentConfig
from .hum import epsilon_sweep, observability_certificate
from .model import (Constant, DelayProblem, FlatDecay, Grid, Indicator, PowerLaw, classify_degeneracy, m2_norm,
                    norm_h, power_law_problem)
from .solver import Discretization, duality_gap, duality_scale


@dataclass
class Check:
    name: str
    passed: bool
    value: float
    bound: float
    note: str = ""

    def row(self):
        return [self.name, "PASS" if self.passed else "FAIL", float(self.value), float(self.bound), self.note]


def _rng(seed, stream):
    return np.random.default_rng([seed, stream])


def check_duality(cfg: ExperimentConfig, instances: int = 24) -> Check:
    rng = _rng(cfg.seed, 1)
    worst = 0.0
    T = 0.5
    combos = [(a, h) for a in (0.5, 1.5, 0.0) for h in (0.2, 0.75)]
    for j in range(instances):
        alpha, h = combos[j % len(combos)]
        base = power_law_problem(alpha, h=h, T=T)
        p = DelayProblem(base.a, random_field(rng), random_field(rng), h, T, base.omega)
        g = Grid.for_problem(p, 24, 40)
        n = g.N + 1
        y0, th = rng.standard_normal(n), rng.standard_normal((g.m_delay, n))
        u, w0 = rng.standard_normal((g.M + 1, n)), rng.standard_normal(n)
        gap = duality_gap(p, g, y0, th, u, w0) / duality_scale(g, y0, th, u, w0)
        worst = max(worst, gap)
    return Check("duality", worst <= 1e-10, worst, 1e-10)


def check_control(cfg: ExperimentConfig) -> Check:
    p = cfg.build_problem()
    g = cfg.build_grid(p)
    y0, th = cfg.initial_data(g)
    res = epsilon_sweep(p, g, y0, th, cfg.control.epsilons, cfg.control.cg_tol, cfg.control.max_iter, seed=cfg.seed)
    terms = [r.terminal_norm for r in res]
    data = m2_norm(y0, th, g)
    strictly = all(b < a for a, b in zip(terms, terms[1:])) or data == 0
    final = terms[-1] / data if data > 0 else 0.0
    return Check("control_sweep", bool(strictly and final <= 1e-2), final, 1e-2,
                 "terminal/data at smallest epsilon; sweep strictly decreasing" if strictly else "sweep not monotone")


def check_energy(cfg: ExperimentConfig) -> Check:
    frozen = calibration.load()["frozen"]["C_E"]
    worst = calibration.energy_benchmark(runs=5, seed=cfg.seed)
    Ms = sorted(worst)
    T = calibration.ENERGY_BENCH["T"]
    within = all(worst[M] <= frozen * (T / M) + 1e-14 for M in Ms)
    shrink = all(worst[b] <= 0.75 * worst[a] + 1e-14 for a, b in zip(Ms, Ms[1:]))
    return Check("energy_monotone", within and shrink, max(worst.values()), frozen * T / Ms[0] + 1e-14)


def check_hardy(cfg: ExperimentConfig) -> Check:
    rng = _rng(cfg.seed, 4)
    worst = 0.0
    for alpha in cfg.carleman.hardy_alphas:
        a = classify_degeneracy(PowerLaw(alpha))
        x = np.linspace(0.0, 1.0, cfg.carleman.hardy_nodes)
        top, _ = hardy_eigen_bound(a, x)
        worst = max(worst, top / hardy_bound(alpha))
        for _ in range(cfg.carleman.hardy_samples):
            worst = max(worst, hardy_poincare_ratio(a, random_hardy_state(rng, x), x) / hardy_bound(alpha))
    return Check("hardy", worst <= 1.05, worst, 1.05, "ratio / (4 / (1 - alpha)^2)")


def check_carleman(cfg: ExperimentConfig) -> list[Check]:
    frozen = calibration.load()["frozen"]
    carl = calibration.carleman_benchmark()
    l42 = calibration.lem42_benchmark()
    return [Check("carleman", carl.max_ratio <= frozen["C_cal"], carl.max_ratio, frozen["C_cal"]),
            Check("lem42", l42.max_ratio <= frozen["C_cal42"], l42.max_ratio, frozen["C_cal42"])]


def check_decay(cfg: ExperimentConfig) -> Check:
    T, om = 0.5, (0.3, 0.8)
    got = [decay_condition_check(c, T, om).verdict
           for c in (FlatDecay(T), Constant(1.0), Indicator(Constant(1.0), *om))]
    want = ["satisfied", "violated", "satisfied"]
    return Check("decay_verdicts", got == want, float(sum(a == b for a, b in zip(got, want))), 3.0, ",".join(got))


def check_boundary(cfg: ExperimentConfig) -> Check:
    p = power_law_problem(0.5, h=0.25, T=0.5, omega=(0.3, 0.8))
    g = Grid.for_problem(p, 50, 100)
    y0 = np.sin(np.pi * g.x)
    res = boundary_null_control(p, g, cfg.boundary.omega_ext, y0, epsilon=1e-6, seed=cfg.seed)
    rt = res.roundtrip
    ratio = rt.terminal_norm / norm_h(y0, g)
    ok = ratio <= 1e-2 and rt.discrepancy <= rt.bound and rt.trace_error == 0.0
    return Check("boundary_roundtrip", ok, ratio, 1e-2, f"discrepancy={rt.discrepancy!r}")


def heat_error(N: int, M: int, T: float = 0.1) -> float:
    a = classify_degeneracy(PowerLaw(0.0))
    p = DelayProblem(a, Constant(0.0), Constant(0.0), T / 2, T, (0.3, 0.8))
    g = Grid.for_problem(p, N, M)
    y = Discretization(p, g).forward(np.sin(np.pi * g.x)).y_T
    exact = math.exp(-math.pi ** 2 * T) * np.sin(np.pi * g.x)
    return norm_h(y - exact, g) / norm_h(exact, g)


def dissipation_violation(alpha: float, bc=None, N: int = 40, M: int = 80, seed: int = 0) -> float:
    rng = np.random.default_rng(seed)
    p = power_law_problem(alpha, bc_kind=bc)
    g = Grid.for_problem(p, N, M)
    norms = Discretization(p, g).forward(rng.standard_normal(N + 1)).norms()
    return max(0.0, float(np.max(np.diff(norms)) / norms[0]))


def check_solver(cfg: ExperimentConfig) -> Check:
    e1, e2 = heat_error(200, 2000), heat_error(400, 8000)
    diss = max(dissipation_violation(al, bc, seed=cfg.seed) for al, bc in
               ((0.5, None), (1.5, None), (0.0, "dirichlet"), (0.0, "neumann-left")))
    ok = e1 <= 0.01 and e1 / e2 >= 3.0 and diss <= 1e-14
    return Check("solver_heat", ok, e1, 0.01, f"reduction={e1 / e2!r} dissipation={diss!r}")


def check_certificate(cfg: ExperimentConfig) -> Check:
    vals, mono = [], 0.0
    for om in ((0.4, 0.6), (0.2, 0.8)):
        p = power_law_problem(0.5, h=0.25, T=0.5, omega=om)
        cert = observability_certificate(p, Grid.for_problem(p, 30, 60), samples=8, power_iters=40, seed=cfg.seed)
        r = np.asarray(cert.rayleigh)
        mono = max(mono, float(np.max(r[:-1] - r[1:]) / r[-1]) if r.size > 1 else 0.0)
        vals.append(cert.C_lower)
    ok = vals[0] >= vals[1] and mono <= 1e-10
    return Check("certificate", ok, vals[0] / vals[1], 1.0, f"max relative Rayleigh decrease={mono!r}")


def run_all(cfg: ExperimentConfig, threads: int = 1) -> list[Check]:
    jobs = [check_duality, check_control, check_energy, check_hardy, check_carleman, check_decay,
            check_boundary, check_solver, check_certificate]
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        results = list(pool.map(lambda f: f(cfg), jobs))
    out = []
    for r in results:
        out.extend(r if isinstance(r, list) else [r])
    return out
