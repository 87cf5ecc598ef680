import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from degdelay.carleman import random_field
from degdelay.errors import ConfigError, OffGridTime
from degdelay.model import BCKind, Constant, DelayProblem, Grid, norm_h, power_law_problem
from degdelay.solver import (Discretization, SpatialOperator, duality_gap, duality_pieces, duality_scale,
                             energy_estimate_ratio, history_view, solve_adjoint, solve_forward)
from degdelay.verify import dissipation_violation, heat_error

CASES = [(0.5, None), (1.5, None), (0.0, BCKind.DIRICHLET_BOTH), (0.0, BCKind.NEUMANN_LEFT)]


def _random_problem(rng, alpha, h, T=0.5, bc=None):
    base = power_law_problem(alpha, h=h, T=T, bc_kind=bc)
    return DelayProblem(base.a, random_field(rng), random_field(rng), h, T, base.omega, base.bc_kind)


@pytest.mark.parametrize("alpha, bc", CASES)
def test_operator_symmetric_and_dissipative(alpha, bc):
    p = power_law_problem(alpha, bc_kind=bc)
    g = Grid.for_problem(p, 30, 40)
    op = SpatialOperator(p.a, g, p.bc_kind)
    # D^{-1} K is self-adjoint in the D inner product with nonnegative spectrum
    DK = op.d[:, None] * op.dense()
    assert np.allclose(DK, DK.T, atol=1e-10 * np.abs(DK).max())
    assert np.linalg.eigvalsh(DK).min() > -1e-10


def test_zero_data_zero_trajectory():
    p = power_law_problem(0.5)
    g = Grid.for_problem(p, 20, 20)
    traj = solve_forward(p, g, np.zeros(21))
    assert not np.any(traj.values)
    assert not np.any(solve_adjoint(p, g, np.zeros(21)).values)


@pytest.mark.parametrize("alpha, bc", CASES)
def test_dissipativity(alpha, bc):
    assert dissipation_violation(alpha, bc) <= 1e-14


def test_adjoint_norm_nondecreasing_in_time():
    p = power_law_problem(0.5)
    g = Grid.for_problem(p, 40, 60)
    w = solve_adjoint(p, g, np.random.default_rng(1).standard_normal(41)).norms()
    assert np.all(np.diff(w) >= -1e-14 * w.max())


def test_neumann_left_zero_flux():
    p = power_law_problem(1.5)
    g = Grid.for_problem(p, 30, 40)
    traj = solve_forward(p, g, np.random.default_rng(2).standard_normal(31))
    assert np.all(traj.y[:, 0] == traj.y[:, 1])


def test_heat_oracle():
    e1 = heat_error(200, 2000)
    e2 = heat_error(400, 8000)
    assert e1 <= 0.01
    assert e1 / e2 >= 3.0


@pytest.mark.parametrize("alpha", [0.5, 1.5, 0.0])
@pytest.mark.parametrize("h", [0.2, 0.5, 0.75])
def test_duality_exact(alpha, h):
    rng = np.random.default_rng(int(10 * alpha + 100 * h))
    p = _random_problem(rng, alpha, h)
    g = Grid.for_problem(p, 24, 40)
    n = g.N + 1
    y0, th = rng.standard_normal(n), rng.standard_normal((g.m_delay, n))
    u, w0 = rng.standard_normal((g.M + 1, n)), rng.standard_normal(n)
    assert duality_gap(p, g, y0, th, u, w0) <= 1e-10 * duality_scale(g, y0, th, u, w0)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), alpha=st.sampled_from([0.5, 1.5, 0.0]), h=st.sampled_from([0.1, 0.3, 0.9]))
def test_duality_property(seed, alpha, h):
    rng = np.random.default_rng(seed)
    p = _random_problem(rng, alpha, h)
    g = Grid.for_problem(p, 16, 20)
    n = g.N + 1
    y0, th, w0 = rng.standard_normal(n), rng.standard_normal((g.m_delay, n)), rng.standard_normal(n)
    # u = 0: the M2 pairing alone
    assert duality_gap(p, g, y0, th, None, w0) <= 1e-10 * duality_scale(g, y0, th, None, w0)


def test_duality_zero_inputs():
    p = power_law_problem(0.5)
    g = Grid.for_problem(p, 16, 16)
    z = np.zeros(17)
    assert duality_gap(p, g, z, None, None, z) == 0.0


def test_history_view():
    p = power_law_problem(0.5, h=0.25, T=0.5)
    g = Grid.for_problem(p, 16, 20)
    rng = np.random.default_rng(3)
    th = rng.standard_normal((g.m_delay, 17))
    th[:, [0, -1]] = 0.0
    y0 = np.sin(np.pi * g.x)
    y0[-1] = 0.0
    traj = solve_forward(p, g, y0, th)
    z0 = history_view(traj, 0.0)
    assert np.array_equal(z0[:-1], th) and np.array_equal(z0[-1], y0)
    zh = history_view(traj, p.h)
    assert np.array_equal(zh, traj.values[g.m_delay:2 * g.m_delay + 1])
    z1 = history_view(traj, g.dt)
    assert np.array_equal(z1[:-1], z0[1:])
    with pytest.raises(OffGridTime):
        history_view(traj, 0.5 * g.dt)


def test_history_shape_checked():
    p = power_law_problem(0.5)
    g = Grid.for_problem(p, 16, 16)
    with pytest.raises(ConfigError):
        solve_forward(p, g, np.zeros(17), np.zeros((1, 17)))


def test_energy_estimate_bounded():
    from degdelay import calibration
    bound = calibration.load()["frozen"]["C_estimate"]
    rng = np.random.default_rng(5)
    p = _random_problem(rng, 0.5, 0.25)
    g = Grid.for_problem(p, 60, 80)
    n = g.N + 1
    r = energy_estimate_ratio(Discretization(p, g), rng.standard_normal(n), rng.standard_normal((g.m_delay, n)),
                              rng.standard_normal((g.M + 1, n)))
    assert r <= bound


def test_dirichlet_right_sets_boundary():
    p = power_law_problem(0.5)
    g = Grid.for_problem(p, 16, 20)
    gr = np.linspace(0, 1, g.M + 1)
    traj = solve_forward(p, g, np.zeros(17), dirichlet_right=gr)
    assert np.array_equal(traj.y[:, -1], gr)
    assert norm_h(traj.y_T, g) > 0
