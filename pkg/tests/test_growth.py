import math

import pytest

from blowup_control import FAIL, PASS, ControlGeometry, audit, make_catalog_system, make_system
from blowup_control.core import linear_growth
from blowup_control.growth import (
    NotSatisfiable,
    adaptive_simpson,
    blowup_time_lower_bound,
    power_zeta,
    rho_threshold,
    tail_integral,
)


@pytest.mark.parametrize("kind", ["power", "logpower", "exponential"])
def test_catalog_passes_growth_and_chart_assumptions(kind):
    rep = audit(make_catalog_system(kind, 2.0, 2.0, 1.0, 1))
    assert rep.status("S2") == PASS
    assert rep.status("S3") == PASS


def test_linear_growth_fails_superlinearity():
    rep = audit(make_system(linear_growth(1.0), 1))
    assert rep.check("S2", "inf_t G/r -> inf").status == FAIL


def test_power_zeta_tail_matches_closed_form():
    s = make_catalog_system("power", 2.0, 2.0, 1.0, 1, controls=ControlGeometry.ball([[1.0]], 1.0, 1))
    z = power_zeta(s)
    assert z.R0 == pytest.approx(2.0)
    val, _ = tail_integral(z)
    assert val == pytest.approx(2.0 / z.R0, abs=1e-8)
    assert audit(s.with_zeta(z)).status("P5") == PASS


def test_missing_zeta_fails_p5():
    assert audit(make_catalog_system("power", 2.0, 2.0, 1.0, 1)).status("P5") == FAIL


def test_adaptive_simpson_polynomial_and_oscillatory():
    val, _ = adaptive_simpson(lambda x: x**3, 0.0, 2.0)
    assert val == pytest.approx(4.0, abs=1e-12)
    val, _ = adaptive_simpson(math.sin, 0.0, math.pi, tol=1e-11)
    assert val == pytest.approx(2.0, abs=1e-10)


@pytest.mark.parametrize("kind,p", [("power", 2.0), ("logpower", 3.0), ("exponential", 2.0)])
def test_threshold_bundle_meets_its_conditions(kind, p):
    bundle = rho_threshold(make_catalog_system(kind, p, 2.0, 1.0, 2), 1.0, 1.0)
    assert all(bundle.conditions().values())
    assert bundle.rho > 2.0


def test_logpower_square_has_no_threshold():
    with pytest.raises(NotSatisfiable):
        rho_threshold(make_catalog_system("logpower", 2.0, 2.0, 1.0, 2), 1.0, 1.0)


def test_lower_bound_on_blowup_time():
    s = make_catalog_system("power", 2.0, 2.0, 1.0, 1)
    assert blowup_time_lower_bound(s, 1.0, 0.0) == pytest.approx(1.0, rel=1e-8)
    # a drift allowance can only shorten the guaranteed lifetime
    assert blowup_time_lower_bound(s, 1.0, 1.0) < 1.0
