import numpy as np
import pytest

from blowup_control import MatrixDrift, make_catalog_system, rho_threshold
from blowup_control.monotone import (
    HypothesisViolation,
    PiecewiseDrift,
    certify_monotone,
    gap,
    random_instance,
    run_batch,
)


@pytest.fixture(scope="module")
def plane_bundle():
    s = make_catalog_system("power", 2.0, 2.0, 1.0, 2, A=MatrixDrift.rotation(1.0, 2))
    return s, rho_threshold(s, 1.0, 1.0)


def test_gap_values():
    s = make_catalog_system("power", 2.0, 2.0, 1.0, 2)
    g = gap(s, [4.0, 0.0], [0.0, 16.0])
    assert g.X == pytest.approx(0.5 - 0.25)
    assert g.Theta_norm == pytest.approx(np.sqrt(2.0))
    assert g.gap == pytest.approx(g.X - g.Theta_norm)


def test_piecewise_drift():
    d = PiecewiseDrift((0.0, 0.5), (np.array([1.0, 0.0]), np.array([0.0, -0.5])))
    assert np.allclose(d(0.7), [0.0, -0.5])
    assert d.bound() == 1.0


def test_certified_pair(plane_bundle):
    s, b = plane_bundle
    r = certify_monotone(s, lambda t: np.array([0.1, 0.0]), [40.0, 0.0], [60.0, 0.0], (0.0, 0.01), b)
    assert r.passed and r.gap_end >= r.gap0


@pytest.mark.parametrize("pair,interval,drift", [
    (([1.0, 0.0], [60.0, 0.0]), (0.0, 0.01), 0.1),   # below the threshold
    (([60.0, 0.0], [40.0, 0.0]), (0.0, 0.01), 0.1),   # nonpositive gap
    (([40.0, 0.0], [60.0, 0.0]), (0.0, 0.01), 5.0),   # drift above M
    (([40.0, 0.0], [60.0, 0.0]), (0.0, 2.0), 0.1),    # past the bundle horizon
])
def test_hypothesis_violations(plane_bundle, pair, interval, drift):
    s, b = plane_bundle
    with pytest.raises(HypothesisViolation):
        certify_monotone(s, lambda t: np.array([drift, 0.0]), pair[0], pair[1], interval, b)


def test_random_instance_is_reproducible():
    a, b = random_instance("power", 7), random_instance("power", 7)
    assert np.array_equal(a.y_hat0, b.y_hat0) and a.interval == b.interval
    assert gap(a.system, a.y_hat0, a.y_tilde0).gap > 0


@pytest.mark.parametrize("kind", ["power", "logpower", "exponential"])
def test_small_batch(kind):
    rows = run_batch(kind, range(5))
    assert all(r["pass"] for r in rows)
