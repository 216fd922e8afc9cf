import numpy as np
import pytest

from blowup_control import (
    FAIL,
    PASS,
    TI,
    TS,
    AdjointMatrixSpec,
    ControlGeometry,
    ControlLaw,
    PreconditionError,
    certify,
    hamiltonian_control,
    integrate,
    integrate_adjoint,
    make_catalog_system,
    shoot,
)
from blowup_control.pmp import adjoint_rhs
from conftest import rotating_plane, scalar_power


@pytest.fixture(scope="module")
def free_path():
    s = scalar_power(1.0)
    return s, integrate(s, ControlLaw.constant([0.0]))


def test_adjoint_closed_form(free_path):
    s, tr = free_path
    cp = integrate_adjoint(tr, s, (0.0, [1.0]))
    ts = np.linspace(0.0, 0.9, 200)
    assert max(abs(cp.at(t)[0] - (1 - t) ** 2) for t in ts) < 1e-8


def test_adjoint_backward_forward_round_trip(free_path):
    s, tr = free_path
    back = integrate_adjoint(tr, s, (0.5, [0.25]), direction="backward")
    assert back.at(0.0)[0] == pytest.approx(1.0, abs=1e-9)
    fwd = integrate_adjoint(tr, s, (0.0, back.at(0.0)), t_end=0.9)
    assert fwd.at(0.9)[0] == pytest.approx(0.01, abs=1e-9)


def test_zero_costate_stays_zero(free_path):
    s, tr = free_path
    cp = integrate_adjoint(tr, s, (0.0, [0.0]))
    assert np.all(cp.psi == 0.0)


@pytest.mark.parametrize("kind", ["power", "logpower", "exponential"])
def test_structured_matches_full_jacobian(kind):
    s = make_catalog_system(kind, 2.0, 2.0, 1.0, 2, A=[[0.1, 0.3], [-0.2, 0.05]])
    full = AdjointMatrixSpec.autonomous_full()
    for y in ([3.0, 1.0], [0.3, -2.0], [0.01, 0.02]):
        a = adjoint_rhs(s, 0.0, y, [0.7, -0.2])
        b = adjoint_rhs(s, 0.0, y, [0.7, -0.2], full)
        assert np.max(np.abs(a - b)) <= 1e-12 * max(1.0, np.max(np.abs(a)))


def test_hamiltonian_ball_and_finite():
    s = make_catalog_system("power", 2.0, 2.0, 1.0, 2, controls=ControlGeometry.ball(np.eye(2), 2.0, 2))
    choice = hamiltonian_control(s, 0.0, [3.0, 4.0])
    assert np.allclose(choice.u, [1.2, 1.6]) and choice.value == pytest.approx(10.0)
    assert hamiltonian_control(s, 0.0, [0.0, 0.0]).degenerate
    f = make_catalog_system("power", 2.0, 2.0, 1.0, 1, controls=ControlGeometry.finite([[1.0], [-1.0], [0.0]], 1))
    assert hamiltonian_control(f, 0.0, [-2.0]).u[0] == -1.0
    assert hamiltonian_control(f, 0.0, [0.0]).degenerate


def test_shoot_rejects_non_unit_costate(ctl_scalar):
    with pytest.raises(PreconditionError):
        shoot(ctl_scalar, [2.0])


@pytest.mark.parametrize("mode,psi0,T", [(TI, 1.0, np.pi / 2 - np.arctan(2.0)), (TS, -1.0, 0.5 * np.log(3.0))])
def test_scalar_extremals_certify(ctl_scalar, mode, psi0, T):
    tr, cp = shoot(ctl_scalar, [psi0], mode=mode)
    assert tr.blowup[0] == pytest.approx(T, abs=1e-8)
    assert set(tr.controls[:, 0]) == {psi0}
    rep = certify(tr, cp, ctl_scalar, mode)
    assert rep.verdicts == {"H_max": PASS, "transversality": PASS, "sign": PASS, "weighted_monotone": True}
    assert rep.hamiltonian_gap == 0.0


def test_wrong_mode_sign_fails(ctl_scalar):
    tr, cp = shoot(ctl_scalar, [1.0])
    assert certify(tr, cp, ctl_scalar, TS).verdicts["sign"] == FAIL


def test_perturbed_law_violates_maximization(ctl_scalar):
    law = ControlLaw.piecewise([0.0, 0.1], [[-1.0], [1.0]])
    tr = integrate(ctl_scalar, law)
    cp = integrate_adjoint(tr, ctl_scalar, (0.0, [1.0]))
    rep = certify(tr, cp, ctl_scalar, TI)
    assert rep.verdicts["H_max"] == FAIL
    assert rep.hamiltonian_gap > 1.0


def test_planar_extremal_certifies():
    s = rotating_plane()
    tr, cp = shoot(s, [1.0, 0.0])
    rep = certify(tr, cp, s, TI)
    assert rep.verdicts == {"H_max": PASS, "transversality": PASS, "sign": PASS, "weighted_monotone": True}
