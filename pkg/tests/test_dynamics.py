import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blowup_control import (
    ControlGeometry,
    ControlLaw,
    IntegrateOptions,
    MatrixDrift,
    NoBlowup,
    PreconditionError,
    blowup_time,
    chatter_convergence,
    chattering_law,
    integrate,
    make_catalog_system,
    make_system,
)
from blowup_control.core import COMPACT, zero_growth
from conftest import scalar_power

ZERO = ControlLaw.constant([0.0])


@pytest.mark.parametrize("y0,p,T", [(1.0, 2.0, 1.0), (2.0, 2.0, 0.5), (1.0, 3.0, 0.5), (0.5, 2.0, 2.0)])
def test_uncontrolled_power_closed_form(y0, p, T):
    T_hat, err = blowup_time(scalar_power(y0, p), ZERO)
    assert abs(T_hat - T) < 1e-9
    assert err < 1e-6


def test_exponential_closed_form():
    s = make_catalog_system("exponential", 2.0, 2.0, 1.0, 1, y0=[1.0])
    assert blowup_time(s, ZERO)[0] == pytest.approx(-math.log(-math.expm1(-1.0)), abs=1e-9)


def test_constant_forcing_from_rest():
    s = make_catalog_system("power", 2.0, 2.0, 1.0, 1, y0=[0.0], controls=ControlGeometry.finite([[1.0]], 1))
    assert blowup_time(s, ControlLaw.constant([1.0]))[0] == pytest.approx(math.pi / 2, abs=1e-9)


def test_trajectory_ends_in_compact_chart_with_levels():
    tr = integrate(scalar_power(1.0), ZERO)
    assert tr.charts[-1] == COMPACT
    assert len(tr.level_times) == 4
    assert np.all(np.diff(tr.t) >= 0)
    assert tr.y_at(0.5)[0] == pytest.approx(2.0, rel=1e-8)


def test_rotation_does_not_change_radial_blowup():
    s = make_catalog_system("power", 2.0, 2.0, 1.0, 2, A=MatrixDrift.rotation(3.0, 2), y0=[0.6, 0.8])
    assert blowup_time(s, ControlLaw.constant([0.0, 0.0]))[0] == pytest.approx(1.0, abs=1e-9)


def test_switch_radius_does_not_change_answer():
    s = scalar_power(0.5)
    a = blowup_time(s, ZERO, IntegrateOptions(switch_radius=50.0))[0]
    b = blowup_time(s, ZERO, IntegrateOptions(switch_radius=5e3))[0]
    assert a == pytest.approx(b, abs=1e-9)


def test_no_blowup_for_zero_growth():
    s = make_system(zero_growth(), 1, y0=[1.0])
    tr = integrate(s, ZERO, IntegrateOptions(t_max=3.0))
    assert tr.blowup is None and tr.t[-1] == pytest.approx(3.0)
    with pytest.raises(NoBlowup):
        blowup_time(s, ZERO, IntegrateOptions(t_max=3.0))


def test_crossing_origin_then_blowing_up_downward():
    # y' = |y| y - 1 from 0.5: reaches 0 after atanh(0.5), then y' = -(y^2 + 1)
    s = make_catalog_system("power", 2.0, 2.0, 1.0, 1, y0=[0.5], controls=ControlGeometry.finite([[-1.0]], 1))
    tr = integrate(s, ControlLaw.constant([-1.0]))
    assert tr.blowup[0] == pytest.approx(math.atanh(0.5) + math.pi / 2, abs=1e-8)
    assert tr.y_at(tr.t[-1])[0] < 0


def test_invalid_eps_blow():
    with pytest.raises(PreconditionError):
        integrate(scalar_power(), ZERO, IntegrateOptions(eps_blow=1.0))


@settings(max_examples=15, deadline=None)
@given(y0=st.floats(min_value=0.2, max_value=50.0), p=st.sampled_from([2.0, 3.0]))
def test_scaling_law_property(y0, p):
    T1 = blowup_time(scalar_power(y0, p), ZERO)[0]
    T2 = blowup_time(scalar_power(2 * y0, p), ZERO)[0]
    assert abs(T2 - 2 ** (1 - p) * T1) / T1 <= 1e-8


@settings(max_examples=10, deadline=None)
@given(a=st.floats(min_value=0.3, max_value=5.0), b=st.floats(min_value=0.3, max_value=5.0))
def test_blowup_time_decreases_with_initial_radius(a, b):
    lo, hi = sorted((a, b))
    if hi - lo < 1e-6:
        return
    assert blowup_time(scalar_power(hi), ZERO)[0] < blowup_time(scalar_power(lo), ZERO)[0]


def test_chattering_law_is_centered():
    law = chattering_law([1.0], [-1.0], 0.5, 0.1, 0.2)
    assert law.value(0.01)[0] == -1.0
    assert law.value(0.05)[0] == 1.0
    assert law.value(0.09)[0] == -1.0


def test_chatter_converges_to_average():
    s = make_catalog_system("power", 2.0, 2.0, 1.0, 1, y0=[2.0], controls=ControlGeometry.finite([[1.0], [-1.0]], 1))
    res, T_avg = chatter_convergence(s, [1.0], [-1.0], 0.5, [0.1, 0.05, 0.025])
    assert T_avg == pytest.approx(0.5, abs=1e-9)
    errs = [abs(T - 0.5) for _, T in res]
    assert errs[0] > errs[1] > errs[2]
    # second order in the period
    assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.1)
