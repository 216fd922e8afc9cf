import numpy as np
import pytest

from blowup_control import ControlGeometry, MatrixDrift, make_catalog_system
from blowup_control.growth import power_zeta


def scalar_power(y0=1.0, p=2.0, controls=None):
    return make_catalog_system("power", p, 2.0, 1.0, 1, y0=[y0], controls=controls)


def controlled_scalar(y0=2.0, zeta=True):
    """y' = y^2 + u with |u| <= 1."""
    s = make_catalog_system("power", 2.0, 2.0, 1.0, 1, y0=[y0], controls=ControlGeometry.ball([[1.0]], 1.0, 1))
    return s.with_zeta(power_zeta(s)) if zeta else s


def rotating_plane(omega=1.0, y0=(2.0, 0.0)):
    return make_catalog_system("power", 2.0, 2.0, 1.0, 2, A=MatrixDrift.rotation(omega, 2), y0=list(y0),
                               controls=ControlGeometry.ball(np.eye(2), 1.0, 2))


@pytest.fixture
def ctl_scalar():
    return controlled_scalar()


@pytest.fixture
def plane():
    return rotating_plane()
