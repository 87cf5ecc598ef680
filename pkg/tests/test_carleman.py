import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from degdelay import calibration
from degdelay.carleman import (BumpProfile, CarlemanParams, carleman_audit, carleman_terms_for,
                               decay_condition_check, default_params, default_s0, energy_functional, energy_K,
                               energy_violation, hardy_bound, hardy_eigen_bound, hardy_poincare_ratio,
                               lem42_terms, lem42_weighted_observability, random_hardy_state, weight_fields,
                               weight_theta)
from degdelay.errors import ConfigError, OutOfWindow, ZeroDenominator
from degdelay.model import (Constant, DelayProblem, FlatDecay, Grid, Indicator, PowerLaw, classify_degeneracy,
                            power_law_problem)
from degdelay.solver import Discretization


def test_theta_midpoint():
    assert weight_theta(0.5, 0.0, 1.0) == 256.0


@pytest.mark.parametrize("T, Th", [(0.5, 0.25), (1.0, 0.0), (2.0, 1.5)])
def test_theta_quarter_point(T, Th):
    nu = (T - Th) / 4
    assert weight_theta(Th + nu, Th, T - Th) == pytest.approx(4 ** 8 / (3 ** 4 * (T - Th) ** 8), rel=1e-12)


@given(tp=st.floats(0.01, 0.99), s=st.floats(-2, 2), l=st.floats(0.1, 3))
def test_theta_symmetry(tp, s, l):
    assert weight_theta(s + tp * l, s, l) == pytest.approx(weight_theta(s + l - tp * l, s, l), rel=1e-9)


@given(frac=st.floats(1e-3, 0.25), l=st.floats(0.1, 2.0))
def test_theta_blowup(frac, l):
    d = frac * l
    assert weight_theta(d, 0.0, l) >= d ** -4 * l ** -4 / 2


@pytest.mark.parametrize("t", [0.0, 1.0, -0.1, 1.5])
def test_theta_out_of_window(t):
    with pytest.raises(OutOfWindow):
        weight_theta(t, 0.0, 1.0)


def test_psi_for_linear_a():
    a = classify_degeneracy(PowerLaw(1.0))
    cp = CarlemanParams(a, BumpProfile((0.3, 0.8)), lam=1.0, d=5.0)
    x = np.linspace(0, 1, 101)
    assert np.allclose(cp.psi(x), x - 5.0, atol=1e-10)
    assert cp.psi(0.0) == pytest.approx(-5.0)
    assert cp.M == pytest.approx(5.0)


def test_d_constraint():
    a = classify_degeneracy(PowerLaw(0.5))
    with pytest.raises(ConfigError):
        CarlemanParams(a, BumpProfile((0.3, 0.8)), d=4 * 2 / 3)


@pytest.mark.parametrize("alpha", [0.25, 0.5, 1.0, 1.5])
@pytest.mark.parametrize("rho", [0.1, 1.0, 3.0])
def test_weights_negative(alpha, rho):
    a = classify_degeneracy(PowerLaw(alpha))
    cp = CarlemanParams(a, BumpProfile((0.3, 0.8)), rho=rho)
    x = np.linspace(0, 1, 401)
    wf = weight_fields(cp, x, np.array([0.3, 0.5]))
    assert np.all(wf.psi < 0) and np.all(wf.Psi < 0) and np.all(wf.phi < 0)
    # the default lambda puts psi below Psi
    assert np.all(wf.psi <= wf.Psi)


def test_rho_to_zero():
    a = classify_degeneracy(PowerLaw(0.5))
    cp = CarlemanParams(a, BumpProfile((0.3, 0.8)), rho=1e-12)
    assert np.allclose(cp.Psi(np.linspace(0, 1, 11)), 0.0, atol=1e-11)


def test_sigma_profile():
    bump = BumpProfile((0.3, 0.9))
    a = classify_degeneracy(PowerLaw(0.5))
    cp = CarlemanParams(a, bump)
    x = np.linspace(0, 1, 601)
    assert cp.validate_sigma(x, bump.omega_tilde) > 0
    assert float(np.max(bump(x))) == 1.0


def test_s0_representable():
    p = power_law_problem(0.5, h=1 / 3, T=1.0)
    cp = default_params(p, l=1.0)
    s0 = default_s0(cp)
    assert 2 * s0 * cp.M * weight_theta(0.5, 0.0, 1.0) < 700


def test_zero_sample_skipped():
    p = power_law_problem(0.5, h=1 / 3, T=1.0)
    g = Grid.for_problem(p, 20, 30)
    cp = default_params(p, l=1.0)
    z = np.zeros((g.M + 1, g.N + 1))
    assert carleman_terms_for(z, z, cp, g, p.omega, default_s0(cp)) == (0.0, 0.0)


def test_carleman_within_calibration():
    frozen = calibration.load()["frozen"]["C_cal"]
    rep = calibration.carleman_benchmark(n_samples=20)
    assert rep.max_ratio <= frozen
    assert all(r["lhs"] >= 0 and r["rhs"] > 0 for r in rep.rows if r["ratio"] is not None)


def test_carleman_underflow_flagged():
    p = power_law_problem(0.5, h=1 / 3, T=1.0)
    g = Grid.for_problem(p, 20, 30)
    cp = default_params(p, l=1.0)
    rep = carleman_audit(p, g, cp, 1, s_values=[1e3])
    assert rep.skipped == 1 and rep.rows[0]["flag"] == "underflow"


def test_lem42_s_monotone():
    p = power_law_problem(0.5, h=0.25, T=0.5)
    g = Grid.for_problem(p, 30, 60)
    cp = default_params(p).with_window(0.25, 0.25)
    W = Discretization(p, g).adjoint(np.sin(np.pi * g.x)).values
    s0 = default_s0(cp)
    lhs = [lem42_terms(W, g, cp, p.omega, s, p.h)[0] for s in (s0, 1.5 * s0, 2 * s0)]
    assert lhs[0] > lhs[1] > lhs[2] > 0


def test_lem42_zero_skipped():
    p = power_law_problem(0.5, h=0.25, T=0.5)
    g = Grid.for_problem(p, 20, 20)
    rep = lem42_weighted_observability(p, g, n_samples=1)
    assert rep.skipped == 0
    assert lem42_terms(np.zeros((g.M + 1, g.N + 1)), g, default_params(p), p.omega, 1.0, p.h) == (0.0, 0.0)


def test_lem42_within_calibration():
    frozen = calibration.load()["frozen"]["C_cal42"]
    assert calibration.lem42_benchmark(n_samples=20).max_ratio <= frozen


@pytest.mark.parametrize("alpha", [0.25, 0.5, 0.75])
def test_hardy_eigen_bound(alpha):
    a = classify_degeneracy(PowerLaw(alpha))
    x = np.linspace(0, 1, 801)
    top, W = hardy_eigen_bound(a, x)
    assert top <= hardy_bound(alpha) * 1.05
    assert hardy_poincare_ratio(a, W, x) == pytest.approx(top, rel=1e-8)


def test_hardy_eigen_against_dense_quadrature():
    # brute force: midpoint rule on a fine mesh for the P1 interpolant of the maximiser
    a = classify_degeneracy(PowerLaw(0.5))
    x = np.linspace(0, 1, 201)
    top, W = hardy_eigen_bound(a, x)
    xf = np.linspace(0, 1, 200 * 400 + 1)
    xm = 0.5 * (xf[1:] + xf[:-1])
    Wm = np.interp(xm, x, W)
    dW = np.diff(np.interp(xf, x, W)) / np.diff(xf)
    num = np.sum(xm ** -1.5 * Wm ** 2) / xm.size
    den = np.sum(xm ** 0.5 * dW ** 2) / xm.size
    assert num / den == pytest.approx(top, rel=1e-3)


def test_hardy_one_minus_x():
    a = classify_degeneracy(PowerLaw(0.5))
    x = np.linspace(0, 1, 401)
    assert hardy_poincare_ratio(a, 1 - x, x) <= hardy_bound(0.5) * 1.02


def test_hardy_zero():
    a = classify_degeneracy(PowerLaw(0.5))
    with pytest.raises(ZeroDenominator):
        hardy_poincare_ratio(a, np.zeros(11))


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2 ** 31), alpha=st.sampled_from([0.25, 0.5, 0.75]))
def test_hardy_random(seed, alpha):
    a = classify_degeneracy(PowerLaw(alpha))
    x = np.linspace(0, 1, 201)
    W = random_hardy_state(np.random.default_rng(seed), x)
    assert hardy_poincare_ratio(a, W, x) <= hardy_bound(alpha) * 1.05


def test_energy_zero():
    p = power_law_problem(0.5)
    g = Grid.for_problem(p, 20, 20)
    adj = Discretization(p, g).adjoint(np.zeros(21))
    assert not np.any(energy_functional(p, g, adj))


def test_energy_no_coefficients():
    p = power_law_problem(0.5, h=0.5 / 3)
    g = Grid.for_problem(p, 20, 30)
    adj = Discretization(p, g).adjoint(np.random.default_rng(0).standard_normal(21))
    assert energy_K(p) == 5.0
    E = energy_functional(p, g, adj)
    t = np.arange(g.M + 1) * g.dt
    assert np.allclose(E, np.exp(5 * t) * adj.norms() ** 2, rtol=1e-12)


def test_energy_monotone_refinement():
    frozen = calibration.load()["frozen"]["C_E"]
    worst = calibration.energy_benchmark(runs=4, seed=7)
    Ms = sorted(worst)
    T = calibration.ENERGY_BENCH["T"]
    for M in Ms:
        assert worst[M] <= frozen * T / M + 1e-14
    for a, b in zip(Ms, Ms[1:]):
        assert worst[b] <= 0.75 * worst[a] + 1e-14


@pytest.mark.parametrize("c, verdict", [(FlatDecay(0.5), "satisfied"), (Constant(1.0), "violated"),
                                        (Indicator(Constant(1.0), 0.3, 0.8), "satisfied")])
def test_decay_verdicts(c, verdict):
    assert decay_condition_check(c, 0.5, (0.3, 0.8)).verdict == verdict


def test_decay_probe_values():
    v = decay_condition_check(FlatDecay(1.0), 1.0, (0.3, 0.8), n_probe=6)
    for pr in v.probes:
        assert pr["g"] == pytest.approx(-1.0 / (1.0 - pr["t"]), rel=1e-12)


def test_decay_needs_four_probes():
    with pytest.raises(ConfigError):
        decay_condition_check(Constant(1.0), 1.0, (0.3, 0.8), n_probe=3)


@pytest.mark.parametrize("h, T", [(0.25, 0.5), (0.75, 0.5), (1 / 3, 1.0)])
def test_theoretical_log_factor_at_default_s0(h, T):
    from degdelay.carleman import theoretical_log_factor
    p = power_law_problem(0.5, h=h, T=T)
    # the default s0 pins s0 * M * theta(quarter point) = 500, so the exponent is 1000 + K T
    assert theoretical_log_factor(p) == pytest.approx(1000.0 + energy_K(p) * T, rel=1e-12)
    assert theoretical_log_factor(p, s=2 * default_s0(default_params(p).with_window(max(0, T - h), min(h, T)))) \
        == pytest.approx(2000.0 + energy_K(p) * T, rel=1e-12)
