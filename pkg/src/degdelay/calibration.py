"""Frozen regression bounds and the benchmark configurations they were measured on.

``scripts/calibrate.py`` recomputes the raw maxima and rewrites
``calibration.json``; each frozen bound is the raw maximum times ``MARGIN``.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .carleman import (carleman_audit, default_params, energy_functional, energy_violation,
                       lem42_weighted_observability, random_field)
from .model import DelayProblem, Grid, power_law_problem
from .solver import Discretization, energy_estimate_ratio

MARGIN = 1.5
PATH = Path(__file__).with_name("calibration.json")

CARLEMAN_BENCH = {"alpha": 0.5, "T": 1.0, "h": 1.0 / 3.0, "omega": (0.3, 0.8), "N": 100, "M": 150,
                  "n_samples": 50, "seed": 0}
LEM42_BENCH = {"alpha": 0.5, "T": 0.5, "h": 0.25, "omega": (0.3, 0.8), "N": 100, "M": 200,
               "n_samples": 50, "seed": 0}
ENERGY_BENCH = {"alpha": 0.5, "T": 0.5, "h": 0.5 / 3.0, "omega": (0.3, 0.8), "N": 50, "M": (60, 120, 240),
                "runs": 20, "seed": 0}
ESTIMATE_BENCH = {"alphas": (0.5, 1.5), "T": 0.5, "h": 0.25, "omega": (0.3, 0.8), "N": 120, "M": 160,
                  "runs": 10, "seed": 0}


def load() -> dict:
    return json.loads(PATH.read_text())


def carleman_benchmark(n_samples=None, seed=None):
    bm = CARLEMAN_BENCH
    p = power_law_problem(bm["alpha"], h=bm["h"], T=bm["T"], omega=bm["omega"])
    g = Grid.for_problem(p, bm["N"], bm["M"])
    cp = default_params(p, varsigma=0.0, l=bm["T"])
    return carleman_audit(p, g, cp, n_samples or bm["n_samples"], seed=bm["seed"] if seed is None else seed)


def lem42_benchmark(n_samples=None, seed=None):
    bm = LEM42_BENCH
    p = power_law_problem(bm["alpha"], h=bm["h"], T=bm["T"], omega=bm["omega"])
    g = Grid.for_problem(p, bm["N"], bm["M"])
    return lem42_weighted_observability(p, g, None, n_samples or bm["n_samples"],
                                        seed=bm["seed"] if seed is None else seed)


def energy_benchmark(runs=None, seed=None):
    """Worst relative E-decrease per refinement level, divided by dt (the C_E candidates)."""
    bm = ENERGY_BENCH
    rng = np.random.default_rng(bm["seed"] if seed is None else seed)
    base = power_law_problem(bm["alpha"], h=bm["h"], T=bm["T"], omega=bm["omega"])
    worst = {M: 0.0 for M in bm["M"]}
    for _ in range(runs or bm["runs"]):
        p = DelayProblem(base.a, random_field(rng, 3.0), random_field(rng, 3.0), base.h, base.T, base.omega)
        w0 = rng.standard_normal(bm["N"] + 1)
        for M in bm["M"]:
            g = Grid.for_problem(p, bm["N"], M)
            E = energy_functional(p, g, Discretization(p, g).adjoint(w0))
            worst[M] = max(worst[M], energy_violation(E))
    return worst


def estimate_benchmark(runs=None, seed=None) -> float:
    bm = ESTIMATE_BENCH
    rng = np.random.default_rng(bm["seed"] if seed is None else seed)
    worst = 0.0
    for alpha in bm["alphas"]:
        base = power_law_problem(alpha, h=bm["h"], T=bm["T"], omega=bm["omega"])
        for _ in range(runs or bm["runs"]):
            p = DelayProblem(base.a, random_field(rng), random_field(rng), base.h, base.T, base.omega)
            g = Grid.for_problem(p, bm["N"], bm["M"])
            n = g.N + 1
            y0 = rng.standard_normal(n)
            th = rng.standard_normal((g.m_delay, n))
            u = rng.standard_normal((g.M + 1, n))
            worst = max(worst, energy_estimate_ratio(Discretization(p, g), y0, th, u))
    return worst
