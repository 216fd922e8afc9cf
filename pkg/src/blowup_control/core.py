"""Domain types for controlled systems dy/dt = G(t,|y|) y/|y| + A(t) y + b(t,u).

Everything here is immutable after construction. Function fields are plain
callables that accept numpy arrays where noted so the analytics in
:mod:`blowup_control.growth` can evaluate them on grids.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import expit


class BlowupControlError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(BlowupControlError):
    pass


class EvaluationError(BlowupControlError):
    """A model function returned a non-finite value."""


class PreconditionError(BlowupControlError):
    pass


class ChartDomainError(PreconditionError):
    """A radius lies outside the range on which the compactifier is invertible."""


# ---------------------------------------------------------------------------
# coefficient g(t)


@dataclass(frozen=True)
class Coefficient:
    """Positive time coefficient: a constant or a piecewise-linear table.

    Table values are held constant outside the tabulated range.
    """

    const: Optional[float] = None
    table: Optional[tuple] = None

    def __post_init__(self):
        if (self.const is None) == (self.table is None):
            raise ConfigError("coefficient needs exactly one of const/table")
        if self.const is not None and not self.const > 0:
            raise ConfigError(f"coefficient must be positive, got {self.const}")
        if self.table is not None:
            ts = [row[0] for row in self.table]
            vs = [row[1] for row in self.table]
            if len(ts) == 0 or any(b <= a for a, b in zip(ts, ts[1:])):
                raise ConfigError("coefficient table times must be strictly increasing")
            if min(vs) <= 0:
                raise ConfigError(f"coefficient table has nonpositive sample {min(vs)}")

    @classmethod
    def coerce(cls, g) -> "Coefficient":
        if isinstance(g, Coefficient):
            return g
        if isinstance(g, (int, float)):
            return cls(const=float(g))
        return cls(table=tuple((float(t), float(v)) for t, v in g))

    @property
    def is_constant(self) -> bool:
        return self.const is not None

    def __call__(self, t):
        if self.const is not None:
            return self.const * np.ones_like(np.asarray(t, dtype=float)) if np.ndim(t) else self.const
        ts, vs = zip(*self.table)
        return np.interp(t, ts, vs)

    def lower(self) -> float:
        """Infimum over all t >= 0."""
        return self.const if self.const is not None else min(v for _, v in self.table)

    def to_json(self) -> dict:
        if self.const is not None:
            return {"const": self.const}
        return {"table": [list(row) for row in self.table]}


# ---------------------------------------------------------------------------
# growth model


class CatalogKind(str, enum.Enum):
    POWER = "power"
    LOGPOWER = "logpower"
    EXPONENTIAL = "exponential"
    LINEAR = "linear"
    ZERO = "zero"
    CUSTOM = "custom"


def _log1pexp(L):
    # log(1 + e^L) without overflow
    return np.logaddexp(0.0, L)


@dataclass(frozen=True)
class GrowthModel:
    """Radial growth G(t, r) = coeff(t) * h(r) together with its r-derivative.

    ``rate`` is G/r and ``excess`` is G_r - G/r. Both also come in
    log-radius form (argument L = ln r) so that the compact chart can work
    with radii far beyond the float range.
    """

    G: Callable
    G_r: Callable
    coeff: Coefficient
    kind: CatalogKind = CatalogKind.CUSTOM
    p: Optional[float] = None
    rate: Optional[Callable] = None
    excess: Optional[Callable] = None
    rate_log: Optional[Callable] = None
    excess_log: Optional[Callable] = None
    shape_rate_log: Optional[Callable] = None
    shape_excess_log: Optional[Callable] = None
    outer_cap: float = 1e3

    def rate_at(self, t, r):
        if self.rate is not None:
            return self.rate(t, r)
        r = np.asarray(r, dtype=float)
        return np.where(r > 0, self.G(t, r) / np.where(r > 0, r, 1.0), self.G_r(t, 0.0 * r))

    def excess_at(self, t, r):
        if self.excess is not None:
            return self.excess(t, r)
        return self.G_r(t, r) - self.rate_at(t, r)

    def rate_at_log(self, t, L):
        if self.rate_log is not None:
            return self.rate_log(t, L)
        return self.rate_at(t, np.exp(L))

    def excess_at_log(self, t, L):
        if self.excess_log is not None:
            return self.excess_log(t, L)
        return self.excess_at(t, np.exp(L))

    @property
    def catalog_tag(self) -> dict:
        return {"kind": self.kind.value, "p": self.p, "coeff": self.coeff.to_json()}


def power_growth(p: float, g) -> GrowthModel:
    g = Coefficient.coerce(g)
    return GrowthModel(
        G=lambda t, r: g(t) * np.power(r, p),
        G_r=lambda t, r: g(t) * p * np.power(r, p - 1),
        coeff=g,
        kind=CatalogKind.POWER,
        p=p,
        rate=lambda t, r: g(t) * np.power(r, p - 1),
        excess=lambda t, r: g(t) * (p - 1) * np.power(r, p - 1),
        rate_log=lambda t, L: g(t) * np.exp((p - 1) * L),
        excess_log=lambda t, L: g(t) * (p - 1) * np.exp((p - 1) * L),
        shape_rate_log=lambda L: np.exp((p - 1) * L),
        shape_excess_log=lambda L: (p - 1) * np.exp((p - 1) * L),
    )


def logpower_growth(p: float, g) -> GrowthModel:
    g = Coefficient.coerce(g)

    def shape_rate_log(L):
        return _log1pexp(L) ** p

    def shape_excess_log(L):
        # p r ln^{p-1}(1+r) / (1+r)
        return p * _log1pexp(L) ** (p - 1) * expit(L)

    def excess(t, r):
        r = np.asarray(r, dtype=float)
        return g(t) * p * r * np.log1p(r) ** (p - 1) / (1.0 + r)

    return GrowthModel(
        G=lambda t, r: g(t) * r * np.log1p(r) ** p,
        G_r=lambda t, r: g(t) * (np.log1p(r) ** p + p * r * np.log1p(r) ** (p - 1) / (1.0 + r)),
        coeff=g,
        kind=CatalogKind.LOGPOWER,
        p=p,
        rate=lambda t, r: g(t) * np.log1p(r) ** p,
        excess=excess,
        rate_log=lambda t, L: g(t) * shape_rate_log(L),
        excess_log=lambda t, L: g(t) * shape_excess_log(L),
        shape_rate_log=shape_rate_log,
        shape_excess_log=shape_excess_log,
    )


def exponential_growth(p: float, g) -> GrowthModel:
    """g(t) (e^{(p-1) r} - 1); the -1 shift keeps G(t, 0) = 0."""
    g = Coefficient.coerce(g)
    k = p - 1.0

    def shape_rate(r):
        r = np.asarray(r, dtype=float)
        safe = np.where(r > 0, r, 1.0)
        with np.errstate(over="ignore", invalid="ignore"):
            val = np.expm1(k * r) / safe
        return np.where(r > 0, np.where(np.isnan(val), np.inf, val), k)

    def shape_excess(r):
        r = np.asarray(r, dtype=float)
        with np.errstate(over="ignore", invalid="ignore"):
            val = k * np.exp(k * r) - shape_rate(r)
        return np.where(np.isnan(val), np.inf, val)

    return GrowthModel(
        G=lambda t, r: g(t) * np.expm1(k * np.asarray(r, dtype=float)),
        G_r=lambda t, r: g(t) * k * np.exp(k * np.asarray(r, dtype=float)),
        coeff=g,
        kind=CatalogKind.EXPONENTIAL,
        p=p,
        rate=lambda t, r: g(t) * shape_rate(r),
        excess=lambda t, r: g(t) * shape_excess(r),
        shape_rate_log=lambda L: shape_rate(np.exp(L)),
        shape_excess_log=lambda L: shape_excess(np.exp(L)),
        outer_cap=30.0 / k,
    )


def linear_growth(g) -> GrowthModel:
    g = Coefficient.coerce(g)
    return GrowthModel(
        G=lambda t, r: g(t) * np.asarray(r, dtype=float),
        G_r=lambda t, r: g(t) * np.ones_like(np.asarray(r, dtype=float)),
        coeff=g,
        kind=CatalogKind.LINEAR,
        p=1.0,
        rate=lambda t, r: g(t) * np.ones_like(np.asarray(r, dtype=float)),
        excess=lambda t, r: 0.0 * np.asarray(r, dtype=float),
        shape_rate_log=lambda L: np.ones_like(np.asarray(L, dtype=float)),
        shape_excess_log=lambda L: 0.0 * np.asarray(L, dtype=float),
    )


def zero_growth() -> GrowthModel:
    zero = lambda t, r: 0.0 * np.asarray(r, dtype=float)
    return GrowthModel(
        G=zero, G_r=zero, coeff=Coefficient(const=1.0), kind=CatalogKind.ZERO,
        rate=zero, excess=zero,
        shape_rate_log=lambda L: 0.0 * np.asarray(L, dtype=float),
        shape_excess_log=lambda L: 0.0 * np.asarray(L, dtype=float),
    )


# ---------------------------------------------------------------------------
# compactifier


@dataclass(frozen=True)
class Compactifier:
    """Radial chart r = phi(s), s in (0, s0), with s -> 0 at infinity.

    Besides phi and its first two derivatives the chart carries closed forms
    that stay finite when phi(s) overflows: ``log_phi``, ``phi_over_d1``
    (phi/phi'), ``curvature`` (phi phi''/phi'^2), ``d2_over_d1sq``
    (phi''/phi'^2) and ``d1_over_phi2`` (phi'/phi^2).
    """

    phi: Callable
    phi_d1: Callable
    phi_d2: Callable
    Phi: Callable
    s0: float
    log_phi: Callable
    phi_over_d1: Callable
    curvature: Callable
    d1_over_phi2: Callable
    kind: str = "custom"
    beta: Optional[float] = None
    r_floor: float = 2.0
    omega: Optional[Callable] = None
    curvature_gap: Optional[Callable] = None

    def one_minus_curvature(self, s):
        """1 - phi phi''/phi'^2, in closed form where the difference cancels badly."""
        if self.curvature_gap is not None:
            return self.curvature_gap(s)
        return 1.0 - self.curvature(s)

    @property
    def r_min(self) -> float:
        """phi(s0^-), lower end of the radii mapped into (0, s0)."""
        return float(self.phi(self.s0))

    def d2_over_d1sq(self, s):
        return self.curvature(s) * np.exp(-self.log_phi(s))

    def inverse(self, r):
        """Phi(r) with a domain check against the natural domain phi > r_floor."""
        r = np.asarray(r, dtype=float)
        if np.any(r <= self.r_floor):
            raise ChartDomainError(f"radius {np.min(r)} not above chart floor {self.r_floor}")
        return self.Phi(r)

    def with_omega(self, omega: Callable) -> "Compactifier":
        return Compactifier(**{**self.__dict__, "omega": omega})


def power_compactifier(beta: float) -> Compactifier:
    """phi(s) = s^-beta."""
    s_root = 2.0 ** (-1.0 / beta)
    return Compactifier(
        phi=lambda s: np.power(s, -beta),
        phi_d1=lambda s: -beta * np.power(s, -beta - 1),
        phi_d2=lambda s: beta * (beta + 1) * np.power(s, -beta - 2),
        Phi=lambda r: np.power(r, -1.0 / beta),
        s0=s_root / 2,
        log_phi=lambda s: -beta * np.log(s),
        phi_over_d1=lambda s: -np.asarray(s, dtype=float) / beta,
        curvature=lambda s: (beta + 1) / beta + 0.0 * np.asarray(s, dtype=float),
        d1_over_phi2=lambda s: -beta * np.power(s, beta - 1),
        kind="power",
        beta=beta,
    )


def logpower_compactifier(beta: float) -> Compactifier:
    """phi(s) = exp(s^-beta)."""
    s_root = math.log(2.0) ** (-1.0 / beta)

    def d1_over_phi2(s):
        w = np.power(s, -beta)
        return -beta * np.power(s, -beta - 1) * np.exp(-w)

    return Compactifier(
        phi=lambda s: np.exp(np.power(s, -beta)),
        phi_d1=lambda s: -beta * np.power(s, -beta - 1) * np.exp(np.power(s, -beta)),
        phi_d2=lambda s: np.exp(np.power(s, -beta))
        * (beta**2 * np.power(s, -2 * beta - 2) + beta * (beta + 1) * np.power(s, -beta - 2)),
        Phi=lambda r: np.power(np.log(r), -1.0 / beta),
        s0=s_root / 2,
        log_phi=lambda s: np.power(s, -beta),
        phi_over_d1=lambda s: -np.power(s, beta + 1) / beta,
        curvature=lambda s: 1.0 + (beta + 1) / beta * np.power(s, beta),
        curvature_gap=lambda s: -(beta + 1) / beta * np.power(s, beta),
        d1_over_phi2=d1_over_phi2,
        kind="logpower",
        beta=beta,
    )


def exponential_compactifier(beta: float) -> Compactifier:
    """phi(s) = ln(1 + s^-beta)."""
    s_root = math.expm1(2.0) ** (-1.0 / beta)

    def phi(s):
        # ln(1 + s^-beta) = -beta ln s + ln(1 + s^beta), finite for tiny s
        with np.errstate(divide="ignore"):
            return -beta * np.log(s) + np.log1p(np.power(s, beta))

    def phi_d1(s):
        return -beta / (s * (1.0 + np.power(s, beta)))

    def phi_d2(s):
        sb = np.power(s, beta)
        return beta * (1.0 + (beta + 1) * sb) / (s**2 * (1.0 + sb) ** 2)

    def Phi(r):
        # (e^r - 1)^(-1/beta) through log(e^r - 1) = r + log(1 - e^-r)
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore"):
            log_em1 = r + np.log(-np.expm1(-r))
        return np.exp(-log_em1 / beta)

    return Compactifier(
        phi=phi,
        phi_d1=phi_d1,
        phi_d2=phi_d2,
        Phi=Phi,
        s0=s_root / 2,
        log_phi=lambda s: np.log(phi(s)),
        phi_over_d1=lambda s: phi(s) / phi_d1(s),
        curvature=lambda s: phi(s) * (1.0 + (beta + 1) * np.power(s, beta)) / beta,
        d1_over_phi2=lambda s: phi_d1(s) / phi(s) ** 2,
        kind="exponential",
        beta=beta,
    )


def omega_envelope(compactifier: Compactifier, growth: GrowthModel, n_grid: int = 80) -> Callable:
    """Monotone bound omega(s) for the curvature inequality of the chart.

    The pointwise ratio is (1 + |phi'/phi^2| + |phi phi''/phi'^2|) divided by
    inf_t (G_r - G phi''/phi'^2) at r = phi(s); omega(s) is its running
    supremum over (0, s], sampled on a log grid reaching down to 1e-8 s.
    For a separable growth g(t) h(r) the infimum over t is g_lower * h-term.
    """
    g_lo = growth.coeff.lower()
    rate_shape, excess_shape = growth.shape_rate_log, growth.shape_excess_log

    def ratio(s):
        s = np.asarray(s, dtype=float)
        L = compactifier.log_phi(s)
        K = compactifier.curvature(s)
        lhs = 1.0 + np.abs(compactifier.d1_over_phi2(s)) + np.abs(K)
        bracket = g_lo * (rate_shape(L) * compactifier.one_minus_curvature(s) + excess_shape(L))
        return np.where(bracket > 0, lhs / np.where(bracket > 0, bracket, 1.0), np.inf)

    def omega(s):
        s_arr = np.atleast_1d(np.asarray(s, dtype=float))
        out = np.empty_like(s_arr)
        for i, si in enumerate(s_arr):
            grid = si * np.logspace(-8, 0, n_grid)
            with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
                out[i] = np.max(ratio(grid))
        return out if np.ndim(s) else float(out[0])

    omega.pointwise = ratio
    return omega


# ---------------------------------------------------------------------------
# drift and controls


@dataclass(frozen=True)
class MatrixDrift:
    A: Callable
    n: int
    kind: str = "custom"
    const_norm: Optional[float] = None
    spec: Optional[dict] = None

    @classmethod
    def zero(cls, n: int) -> "MatrixDrift":
        Z = np.zeros((n, n))
        return cls(A=lambda t: Z, n=n, kind="const", const_norm=0.0, spec={"const": Z.tolist()})

    @classmethod
    def constant(cls, A, n: int) -> "MatrixDrift":
        M = np.array(A, dtype=float).reshape(n, n)
        return cls(A=lambda t: M, n=n, kind="const", const_norm=float(np.linalg.norm(M, 2)),
                   spec={"const": M.tolist()})

    @classmethod
    def rotation(cls, omega: float, n: int) -> "MatrixDrift":
        if n < 2:
            raise ConfigError("rotation drift needs n >= 2")
        M = np.zeros((n, n))
        M[0, 1], M[1, 0] = -omega, omega
        return cls(A=lambda t: M, n=n, kind="const", const_norm=abs(float(omega)),
                   spec={"rotation": omega})

    @property
    def is_constant(self) -> bool:
        return self.kind == "const"

    def norm_bound(self, t0: float, t1: float, samples: int = 257) -> float:
        """Upper bound for sup ||A(t)|| on [t0, t1] (sampled, 1% margin, for custom drifts)."""
        if self.const_norm is not None:
            return self.const_norm
        ts = np.linspace(t0, t1, samples)
        return 1.01 * max(np.linalg.norm(self.A(t), 2) for t in ts)


class ControlKind(str, enum.Enum):
    BALL = "ball"
    FINITE = "finite"
    CUSTOM = "custom"


@dataclass(frozen=True)
class ControlGeometry:
    """Control set U together with the map b(t, u).

    ``ball``: U = {|u| <= radius} in R^m, b = B(t) u.
    ``finite``: U is a list of values, b = B(t) u, evaluated only on the list.
    ``custom``: user b and a support evaluator (t, psi) -> (u*, value).
    """

    kind: ControlKind
    n: int
    m: int
    B: Optional[Callable] = None
    radius: float = 0.0
    values: tuple = ()
    b_custom: Optional[Callable] = None
    support: Optional[Callable] = None
    bound_fn: Optional[Callable] = None
    const_B: bool = True
    spec: Optional[dict] = None

    @classmethod
    def ball(cls, B, radius: float, n: int) -> "ControlGeometry":
        if radius < 0:
            raise ConfigError("ball radius must be nonnegative")
        if callable(B):
            m = np.atleast_2d(B(0.0)).shape[1]
            return cls(ControlKind.BALL, n, m, B=B, radius=float(radius), const_B=False)
        Bm = np.array(B, dtype=float).reshape(n, -1)
        return cls(ControlKind.BALL, n, Bm.shape[1], B=lambda t: Bm, radius=float(radius),
                   spec={"ball": {"B": Bm.tolist(), "radius": float(radius)}})

    @classmethod
    def finite(cls, values: Sequence, n: int, B=None) -> "ControlGeometry":
        vals = tuple(np.atleast_1d(np.array(v, dtype=float)) for v in values)
        if not vals:
            raise ConfigError("finite control set is empty")
        m = vals[0].size
        if any(v.size != m for v in vals):
            raise ConfigError("finite control values must share one dimension")
        if B is None:
            if m != n:
                raise ConfigError(f"control dimension {m} != state dimension {n}; supply B")
            B = np.eye(n)
        if callable(B):
            return cls(ControlKind.FINITE, n, m, B=B, values=vals, const_B=False)
        Bm = np.array(B, dtype=float).reshape(n, m)
        spec = {"finite": [v.tolist() for v in vals], "B": Bm.tolist()}
        return cls(ControlKind.FINITE, n, m, B=lambda t: Bm, values=vals, spec=spec)

    @classmethod
    def none(cls, n: int) -> "ControlGeometry":
        return cls.finite([np.zeros(n)], n)

    @classmethod
    def custom(cls, b: Callable, support: Callable, bound: Callable, n: int, m: int) -> "ControlGeometry":
        return cls(ControlKind.CUSTOM, n, m, b_custom=b, support=support, bound_fn=bound, const_B=False)

    def b(self, t: float, u) -> np.ndarray:
        u = np.atleast_1d(np.asarray(u, dtype=float))
        if self.kind is ControlKind.CUSTOM:
            return np.asarray(self.b_custom(t, u), dtype=float)
        if self.kind is ControlKind.FINITE and not any(np.array_equal(u, v) for v in self.values):
            raise PreconditionError(f"control {u} is not in the finite control set")
        return self.B(t) @ u

    def bound(self, t0: float, t1: float, samples: int = 65) -> float:
        """Upper bound M_b for sup |b(t, u)| over [t0, t1] x U."""
        ts = [t0] if self.const_B else np.linspace(t0, t1, samples)
        if self.kind is ControlKind.BALL:
            return self.radius * max(np.linalg.norm(self.B(t), 2) for t in ts)
        if self.kind is ControlKind.FINITE:
            return max(float(np.linalg.norm(self.B(t) @ v)) for t in ts for v in self.values)
        return float(self.bound_fn(t0, t1))

    def zero_control(self) -> np.ndarray:
        if self.kind is ControlKind.FINITE:
            # the element with the smallest image stands in for "no control"
            return min(self.values, key=lambda v: float(np.linalg.norm(self.B(0.0) @ v)))
        return np.zeros(self.m)


@dataclass(frozen=True)
class BlowupLowerBound:
    """zeta(r) on [R0, inf) with G - ||A|| r - sup|b| >= zeta(r)."""

    zeta: Callable
    R0: float
    spec: Optional[dict] = None


# ---------------------------------------------------------------------------
# system


@dataclass(frozen=True)
class ControlSystem:
    n: int
    growth: GrowthModel
    compactifier: Compactifier
    drift: MatrixDrift
    controls: ControlGeometry
    y0: np.ndarray
    zeta: Optional[BlowupLowerBound] = None
    beta: Optional[float] = None

    def __post_init__(self):
        y0 = np.atleast_1d(np.asarray(self.y0, dtype=float))
        object.__setattr__(self, "y0", y0)
        if y0.shape != (self.n,):
            raise ConfigError(f"y0 has shape {y0.shape}, expected ({self.n},)")
        if self.drift.n != self.n or self.controls.n != self.n:
            raise ConfigError("drift/control dimensions do not match n")
        for name, val in (("G", self.growth.G(0.0, 1.0)), ("A", self.drift.A(0.0)),
                          ("phi", self.compactifier.phi(self.compactifier.s0 / 2))):
            if not np.all(np.isfinite(val)):
                raise ConfigError(f"{name} is not finite at t = 0")

    @property
    def autonomous(self) -> bool:
        return self.growth.coeff.is_constant and self.drift.is_constant and self.controls.const_B

    def with_y0(self, y0) -> "ControlSystem":
        return ControlSystem(**{**self.__dict__, "y0": np.atleast_1d(np.asarray(y0, dtype=float))})

    def with_zeta(self, zeta: Optional[BlowupLowerBound]) -> "ControlSystem":
        return ControlSystem(**{**self.__dict__, "zeta": zeta})

    def bound_M(self, t0: float, t1: float) -> float:
        """max(sup ||A||, sup |b|) on [t0, t1]."""
        return max(self.drift.norm_bound(t0, t1), self.controls.bound(t0, t1))


_COMPACTIFIERS = {
    "power": power_compactifier,
    "logpower": logpower_compactifier,
    "exponential": exponential_compactifier,
}
_GROWTHS = {
    "power": power_growth,
    "logpower": logpower_growth,
    "exponential": exponential_growth,
}


def make_catalog_system(kind: str, p: float, beta: float, g, n: int, A=None, controls=None,
                        y0=None, zeta: Optional[BlowupLowerBound] = None) -> ControlSystem:
    """Build one of the three catalog systems with its matched chart.

    ``kind`` selects G = g r^p, g r ln^p(1+r) or g (e^{(p-1)r} - 1) and the
    chart s^-beta, exp(s^-beta) or ln(1+s^-beta) respectively. All three
    need p > 1 and beta > 1/(p-1); otherwise the chart curvature condition
    cannot hold near s = 0.
    """
    if kind not in _GROWTHS:
        raise ConfigError(f"unknown catalog kind {kind!r}")
    if not p > 1:
        raise ConfigError(f"p must exceed 1, got {p}")
    if not beta > 1.0 / (p - 1):
        raise ConfigError(f"beta must exceed 1/(p-1) = {1.0 / (p - 1):g} for kind {kind}, got {beta}")
    coeff = Coefficient.coerce(1.0 if g is None else g)
    growth = _GROWTHS[kind](p, coeff)
    comp = _COMPACTIFIERS[kind](beta)
    comp = comp.with_omega(omega_envelope(comp, growth))
    return _assemble(n, growth, comp, A, controls, y0, zeta, beta)


def make_system(growth: GrowthModel, n: int, A=None, controls=None, y0=None,
                compactifier: Optional[Compactifier] = None, beta: float = 2.0,
                zeta: Optional[BlowupLowerBound] = None) -> ControlSystem:
    """Non-catalog system; the chart defaults to phi(s) = s^-beta."""
    comp = compactifier or power_compactifier(beta)
    if comp.omega is None and growth.shape_rate_log is not None:
        comp = comp.with_omega(omega_envelope(comp, growth))
    return _assemble(n, growth, comp, A, controls, y0, zeta, beta)


def _assemble(n, growth, comp, A, controls, y0, zeta, beta) -> ControlSystem:
    if isinstance(A, MatrixDrift):
        drift = A
    elif A is None:
        drift = MatrixDrift.zero(n)
    elif callable(A):
        drift = MatrixDrift(A=A, n=n)
    else:
        drift = MatrixDrift.constant(A, n)
    controls = controls if controls is not None else ControlGeometry.none(n)
    y0 = np.zeros(n) if y0 is None else y0
    return ControlSystem(n=n, growth=growth, compactifier=comp, drift=drift, controls=controls,
                         y0=y0, zeta=zeta, beta=beta)


def evaluate_rhs(system: ControlSystem, t: float, y, u=None) -> np.ndarray:
    """G(t,|y|) y/|y| + A(t) y + b(t,u); the radial term is zero at y = 0."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if u is None:
        u = system.controls.zero_control()
    r = float(np.linalg.norm(y))
    radial = system.growth.rate_at(t, r) * y if r > 0 else np.zeros_like(y)
    out = radial + system.drift.A(t) @ y + system.controls.b(t, u)
    bad = np.flatnonzero(~np.isfinite(out))
    if bad.size:
        raise EvaluationError(f"rhs component {int(bad[0])} is {out[bad[0]]} at t={t}, |y|={r}")
    return out


# ---------------------------------------------------------------------------
# control laws, trajectories, costates, reports


@dataclass(frozen=True)
class ControlLaw:
    """Piecewise-constant schedule or costate feedback (t, psi) -> u.

    For a schedule, ``values[i]`` applies on [breakpoints[i], breakpoints[i+1]);
    the last value is held forever and values[0] also covers t < breakpoints[0].
    """

    breakpoints: tuple = ()
    values: tuple = ()
    feedback: Optional[Callable] = None

    def __post_init__(self):
        if self.feedback is None:
            if len(self.breakpoints) != len(self.values) or not self.values:
                raise PreconditionError("breakpoints and values must have equal nonzero length")
            bp = np.asarray(self.breakpoints, dtype=float)
            if np.any(np.diff(bp) <= 0):
                raise PreconditionError("breakpoints must be strictly increasing")

    @classmethod
    def constant(cls, u) -> "ControlLaw":
        return cls((0.0,), (np.atleast_1d(np.asarray(u, dtype=float)),))

    @classmethod
    def piecewise(cls, breakpoints, values) -> "ControlLaw":
        return cls(tuple(float(b) for b in breakpoints),
                   tuple(np.atleast_1d(np.asarray(v, dtype=float)) for v in values))

    @classmethod
    def from_feedback(cls, fn: Callable) -> "ControlLaw":
        return cls(feedback=fn)

    @property
    def is_feedback(self) -> bool:
        return self.feedback is not None

    def value(self, t: float) -> np.ndarray:
        if self.is_feedback:
            raise PreconditionError("feedback law needs a costate; use pmp.shoot")
        i = int(np.searchsorted(self.breakpoints, t, side="right")) - 1
        return self.values[max(i, 0)]

    def breaks_in(self, t0: float, t1: float) -> list:
        return [b for b in self.breakpoints if t0 < b < t1]

    def to_json(self) -> dict:
        if self.is_feedback:
            return {"feedback": True}
        return {"breakpoints": list(self.breakpoints), "values": [v.tolist() for v in self.values]}


OUTER, COMPACT = "outer", "compact"


@dataclass
class Trajectory:
    """Time samples in two charts plus an optional blowup certificate.

    ``states[i]`` is y in the outer chart and x = Phi(|y|) y/|y| in the
    compact chart, as tagged by ``charts[i]``. ``segments`` holds dense
    interpolants (t_a, t_b, chart, sol) covering [t[0], t[-1]].
    """

    t: np.ndarray
    states: np.ndarray
    charts: list
    controls: np.ndarray
    compactifier: Compactifier
    switch_radius: float
    eps_blow: float
    blowup: Optional[tuple] = None
    segments: list = field(default_factory=list, repr=False)
    level_times: dict = field(default_factory=dict)
    n_steps: int = 0
    switches: int = 0
    degenerate: Optional[np.ndarray] = None
    # rescaled time of compact-chart samples (nan in the outer chart) and
    # the index of the segment each sample was produced by
    taus: Optional[np.ndarray] = None
    seg_ids: Optional[np.ndarray] = None
    # cumulative growth exponent at the samples, when computed on the dense
    # output before the trajectory was written to disk
    exponent: Optional[np.ndarray] = None

    def __len__(self):
        return len(self.t)

    def log_radii(self) -> np.ndarray:
        out = np.empty(len(self.t))
        for i, (c, x) in enumerate(zip(self.charts, self.states)):
            nrm = np.linalg.norm(x)
            if c == OUTER:
                out[i] = np.log(nrm) if nrm > 0 else -np.inf
            else:
                out[i] = self.compactifier.log_phi(nrm)
        return out

    def radii(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.exp(self.log_radii())

    def directions(self) -> np.ndarray:
        nrm = np.linalg.norm(self.states, axis=1, keepdims=True)
        return np.divide(self.states, nrm, out=np.zeros_like(self.states), where=nrm > 0)

    def y(self) -> np.ndarray:
        with np.errstate(over="ignore", invalid="ignore"):
            return self.radii()[:, None] * self.directions()

    def chart_state_at(self, t: float):
        """(chart, state) at time t from the dense output."""
        if not self.segments:
            raise ValueError("trajectory carries no dense output")
        if t < self.t[0] - 1e-14 or t > self.t[-1] + 1e-14:
            raise ValueError(f"t={t} outside trajectory range [{self.t[0]}, {self.t[-1]}]")
        for ta, tb, chart, sol in self.segments:
            if ta <= t <= tb:
                return chart, np.asarray(sol(t))[: self.states.shape[1]]
        return self.charts[-1], self.states[-1]

    def y_at(self, t: float) -> np.ndarray:
        chart, v = self.chart_state_at(t)
        if chart == OUTER:
            return v
        s = np.linalg.norm(v)
        return float(self.compactifier.phi(s)) * v / s

    def summary(self) -> dict:
        T_hat, err = self.blowup if self.blowup else (None, None)
        return {"T_hat": T_hat, "err": err, "blowup": self.blowup is not None,
                "n_steps": self.n_steps, "switches": self.switches,
                "t_end": float(self.t[-1]), "switch_radius": self.switch_radius,
                "eps_blow": self.eps_blow}

    def to_csv(self, path) -> None:
        import csv

        n = self.states.shape[1]
        m = self.controls.shape[1]
        radii = self.radii()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            extra = ["g"] if self.exponent is not None else []
            w.writerow(["t", "chart", *[f"c{i}" for i in range(n)], *[f"u{i}" for i in range(m)], "radius",
                        *extra])
            for i, (ti, c, x, u, r) in enumerate(zip(self.t, self.charts, self.states, self.controls, radii)):
                g = [repr(float(self.exponent[i]))] if extra else []
                w.writerow([repr(float(ti)), c, *[repr(float(v)) for v in x], *[repr(float(v)) for v in u],
                            repr(float(r)), *g])

    @classmethod
    def from_csv(cls, path, compactifier: Compactifier, blowup: Optional[tuple] = None,
                 switch_radius: float = math.nan, eps_blow: float = math.nan) -> "Trajectory":
        """Samples written by ``to_csv``; the result has no dense output."""
        import csv

        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        head = rows[0]
        if len(head) < 3 or head[:2] != ["t", "chart"]:
            raise ConfigError(f"{path} is not a trajectory CSV")
        ci = [k for k, h in enumerate(head) if h.startswith("c") and h[1:].isdigit()]
        ui = [k for k, h in enumerate(head) if h.startswith("u") and h[1:].isdigit()]
        body = rows[1:]
        gi = head.index("g") if "g" in head else None
        return cls(
            exponent=None if gi is None else np.array([float(r[gi]) for r in body]),
            t=np.array([float(r[0]) for r in body]),
            states=np.array([[float(r[k]) for k in ci] for r in body]),
            charts=[r[1] for r in body],
            controls=np.array([[float(r[k]) for k in ui] for r in body]),
            compactifier=compactifier,
            switch_radius=switch_radius,
            eps_blow=eps_blow,
            blowup=blowup,
        )


@dataclass
class CostatePath:
    t: np.ndarray
    psi: np.ndarray
    normalization: tuple = (0.0, 1.0)
    dense: Optional[Callable] = field(default=None, repr=False)
    flags: dict = field(default_factory=dict)

    def at(self, t: float) -> np.ndarray:
        if self.dense is not None:
            return np.asarray(self.dense(t))
        return np.array([np.interp(t, self.t, self.psi[:, j]) for j in range(self.psi.shape[1])])

    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.psi, axis=1)

    def rescaled(self, factor: float) -> "CostatePath":
        dense = self.dense
        return CostatePath(self.t, self.psi * factor,
                           (self.normalization[0], self.normalization[1] * factor),
                           None if dense is None else (lambda t: factor * np.asarray(dense(t))),
                           dict(self.flags))

    def to_csv(self, path) -> None:
        import csv

        n = self.psi.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", *[f"psi{i}" for i in range(n)], "psi_norm"])
            for ti, p in zip(self.t, self.psi):
                w.writerow([repr(float(ti)), *[repr(float(v)) for v in p], repr(float(np.linalg.norm(p)))])

    @classmethod
    def from_csv(cls, path) -> "CostatePath":
        import csv

        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        head = rows[0]
        pi = [k for k, h in enumerate(head) if h.startswith("psi") and h[3:].isdigit()]
        if not head or head[0] != "t" or not pi:
            raise ConfigError(f"{path} is not a costate CSV")
        body = rows[1:]
        return cls(np.array([float(r[0]) for r in body]), np.array([[float(r[k]) for k in pi] for r in body]))


@dataclass
class PMPReport:
    hamiltonian_gap: float
    costate_tail: list
    sign_inner: list
    weighted_inner: list
    verdicts: dict
    mode: str = "TI"
    details: dict = field(default_factory=dict)

    @property
    def weighted_monotone(self) -> bool:
        return bool(self.verdicts.get("weighted_monotone", False))

    def to_json(self) -> dict:
        return {
            "mode": self.mode,
            "hamiltonian_gap": self.hamiltonian_gap,
            "tail": [{"t": t, "psi_norm": v} for t, v in self.costate_tail],
            "sign_inner": [{"t": t, "value": v} for t, v in self.sign_inner],
            "weighted_inner": [{"t": t, "value": v} for t, v in self.weighted_inner],
            "weighted_monotone": self.weighted_monotone,
            "verdicts": self.verdicts,
            "details": self.details,
        }


PASS, FAIL, NOT_CHECKABLE = "pass", "fail", "not-checkable"


@dataclass
class AssumptionRecord:
    id: str
    check: str
    status: str
    witness: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"id": self.id, "check": self.check, "status": self.status, "witness": self.witness}


@dataclass
class AssumptionReport:
    records: list = field(default_factory=list)

    def add(self, id: str, check: str, ok, witness: Optional[dict] = None) -> None:
        status = ok if isinstance(ok, str) else (PASS if ok else FAIL)
        self.records.append(AssumptionRecord(id, check, status, witness or {}))

    def status(self, id: str) -> str:
        """Aggregate status: fail if any check fails, not-checkable if any is, else pass."""
        sts = [r.status for r in self.records if r.id == id]
        if not sts:
            return NOT_CHECKABLE
        if FAIL in sts:
            return FAIL
        return NOT_CHECKABLE if NOT_CHECKABLE in sts else PASS

    def check(self, id: str, check: str) -> AssumptionRecord:
        for r in self.records:
            if r.id == id and r.check == check:
                return r
        raise KeyError((id, check))

    def to_json(self) -> list:
        return [r.to_json() for r in self.records]
