import numpy as np
import pytest

from degdelay.boundary import boundary_null_control, extend_problem, extended_grid, extended_kinds
from degdelay.carleman import decay_condition_check
from degdelay.errors import BadControlWindow
from degdelay.model import Constant, DelayProblem, Grid, Kind, norm_h, power_law_problem


@pytest.fixture(scope="module")
def base():
    return power_law_problem(0.5, h=0.25, T=0.5, omega=(0.3, 0.8))


def test_extended_coefficient(base):
    ep = extend_problem(base, (1.2, 1.8))
    x = np.linspace(1.0, 2.0, 11)
    assert np.all(ep.extended.a(x) == 1.0)
    assert ep.extended.a(0.25) == pytest.approx(0.5)
    kind, bounded_below = extended_kinds(ep)
    assert kind is Kind.WEAK and bounded_below


@pytest.mark.parametrize("window", [(1.0, 1.5), (1.5, 2.0), (0.5, 1.5), (1.8, 1.2)])
def test_bad_window(base, window):
    with pytest.raises(BadControlWindow):
        extend_problem(base, window)


def test_zero_extension_of_history(base):
    ep = extend_problem(base, (1.2, 1.8))
    th = np.ones((3, 11))
    ext = ep.extend_state(th)
    assert ext.shape == (3, 21)
    assert np.all(ext[:, 11:] == 0) and np.all(ext[:, :11] == 1)


def test_c_transfers_to_extension(base):
    p = DelayProblem(base.a, Constant(0.0), Constant(1.0), 0.25, 0.5, base.omega)
    ep = extend_problem(p, (1.2, 1.8))
    x = np.linspace(0, 2, 201)
    assert np.all(ep.extended.c(0.1, x[x > 1]) == 0.0)
    v = decay_condition_check(ep.extended.c, 0.5, (1.2, 1.8), x=x)
    assert v.verdict == "violated"


def test_zero_data(base):
    g = Grid.for_problem(base, 30, 40)
    res = boundary_null_control(base, g, (1.2, 1.8), np.zeros(31))
    assert not np.any(res.h_trace)
    assert res.roundtrip.terminal_norm == 0.0


def test_roundtrip_null_control(base):
    g = Grid.for_problem(base, 50, 100)
    y0 = np.sin(np.pi * g.x)
    res = boundary_null_control(base, g, (1.2, 1.8), y0, epsilon=1e-6)
    rt = res.roundtrip
    assert rt.terminal_norm <= 1e-2 * norm_h(y0, g)
    assert rt.discrepancy <= rt.bound
    assert rt.trace_error == 0.0
    assert extended_grid(g).x[g.N] == 1.0


def test_delay_longer_than_horizon():
    p = power_law_problem(0.5, h=0.75, T=0.5)
    g = Grid.for_problem(p, 30, 40)
    assert g.m_delay > g.M
    th = np.tile(np.sin(np.pi * g.x), (g.m_delay, 1))
    res = boundary_null_control(p, g, (1.2, 1.8), np.sin(np.pi * g.x), th, epsilon=1e-4)
    assert res.roundtrip.discrepancy <= res.roundtrip.bound
