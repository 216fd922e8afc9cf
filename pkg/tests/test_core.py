import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blowup_control import (
    ChartDomainError,
    Coefficient,
    ConfigError,
    ControlGeometry,
    ControlLaw,
    MatrixDrift,
    PreconditionError,
    integrate,
    make_catalog_system,
)
from blowup_control.core import evaluate_rhs

KINDS = ["power", "logpower", "exponential"]


def test_coefficient_table_interpolates_and_holds_ends():
    g = Coefficient(table=((0.0, 1.0), (1.0, 3.0)))
    assert g(0.5) == pytest.approx(2.0)
    assert g(5.0) == pytest.approx(3.0)
    assert g.lower() == 1.0


@pytest.mark.parametrize("bad", [dict(const=-1.0), dict(table=((1.0, 1.0), (0.5, 2.0))), dict()])
def test_coefficient_rejects_invalid(bad):
    with pytest.raises(ConfigError):
        Coefficient(**bad)


@pytest.mark.parametrize("kind", KINDS)
@settings(max_examples=40, deadline=None)
@given(log_r=st.floats(min_value=math.log(3.0), max_value=80.0))
def test_chart_round_trip(kind, log_r):
    comp = make_catalog_system(kind, 3.0, 2.0, 1.0, 1).compactifier
    r = math.exp(log_r)
    # the exponential chart maps r to s ~ e^(-r/beta), which underflows past r ~ 1400
    if r <= comp.r_min or (kind == "exponential" and r > 1000):
        return
    s = float(comp.Phi(r))
    assert 0 < s < comp.s0
    assert float(comp.log_phi(s)) == pytest.approx(log_r, rel=1e-9)


def test_inverse_rejects_small_radius():
    comp = make_catalog_system("power", 2.0, 2.0, 1.0, 1).compactifier
    with pytest.raises(ChartDomainError):
        comp.inverse(1.5)


def test_exponential_chart_far_radius_is_finite():
    comp = make_catalog_system("exponential", 2.0, 2.0, 1.0, 1).compactifier
    with np.errstate(over="raise", invalid="raise"):
        s = float(comp.Phi(1e6))
        assert 0 <= s < 1e-100
        assert float(comp.phi(float(comp.Phi(900.0)))) == pytest.approx(900.0, rel=1e-12)


def test_catalog_beta_lower_limit():
    with pytest.raises(ConfigError):
        make_catalog_system("power", 2.0, 0.9, 1.0, 1)


def test_rhs_radial_term_vanishes_at_origin():
    s = make_catalog_system("power", 2.0, 2.0, 1.0, 2, A=MatrixDrift.rotation(1.0, 2))
    assert np.allclose(evaluate_rhs(s, 0.0, [0.0, 0.0]), 0.0)
    assert np.allclose(evaluate_rhs(s, 0.0, [2.0, 0.0]), [4.0, 2.0])


def test_finite_controls_reject_foreign_values():
    geo = ControlGeometry.finite([[1.0], [-1.0]], 1)
    with pytest.raises(PreconditionError):
        geo.b(0.0, [0.5])


def test_control_law_lookup_and_json():
    law = ControlLaw.piecewise([0.0, 0.5], [[1.0], [-1.0]])
    assert law.value(0.25)[0] == 1.0 and law.value(0.75)[0] == -1.0
    assert law.to_json() == {"breakpoints": [0.0, 0.5], "values": [[1.0], [-1.0]]}
    with pytest.raises(PreconditionError):
        ControlLaw.piecewise([0.5, 0.0], [[1.0], [-1.0]])


def test_trajectory_csv_round_trip(tmp_path):
    from blowup_control import Trajectory

    s = make_catalog_system("power", 2.0, 2.0, 1.0, 1, y0=[1.0])
    tr = integrate(s, ControlLaw.constant([0.0]))
    tr.to_csv(tmp_path / "t.csv")
    back = Trajectory.from_csv(tmp_path / "t.csv", s.compactifier)
    assert np.array_equal(back.t, tr.t)
    assert back.charts == tr.charts
    assert np.array_equal(back.states, tr.states)
