"""Comparison gap between two solutions sharing one drift, and its monotonicity."""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .core import (
    ChartDomainError,
    ControlSystem,
    MatrixDrift,
    PreconditionError,
    make_catalog_system,
)
from .growth import ThresholdBundle, blowup_time_lower_bound, rho_threshold

MIN_GRID = 200


class HypothesisViolation(PreconditionError):
    """The pair, drift or interval does not meet the comparison hypotheses."""


@dataclass(frozen=True)
class GapSample:
    t: float
    X: float
    Theta_norm: float
    gap: float


@dataclass(frozen=True)
class PiecewiseDrift:
    """Piecewise-constant forcing g(t) = values[i] on [breakpoints[i], breakpoints[i+1])."""

    breakpoints: tuple
    values: tuple

    def __call__(self, t: float) -> np.ndarray:
        i = int(np.searchsorted(self.breakpoints, t, side="right")) - 1
        return self.values[max(i, 0)]

    def bound(self) -> float:
        return max(float(np.linalg.norm(v)) for v in self.values)

    def to_json(self) -> dict:
        return {"breakpoints": list(self.breakpoints), "values": [np.asarray(v).tolist() for v in self.values]}


def _radius_direction(y) -> tuple:
    y = np.atleast_1d(np.asarray(y, dtype=float))
    r = float(np.linalg.norm(y))
    return r, (y / r if r > 0 else y)


def gap(system: ControlSystem, y_hat, y_tilde, t: float = 0.0) -> GapSample:
    """Phi(|y_hat|) - Phi(|y_tilde|) - |y_hat/|y_hat| - y_tilde/|y_tilde||."""
    comp = system.compactifier
    r1, th1 = _radius_direction(y_hat)
    r2, th2 = _radius_direction(y_tilde)
    X = float(comp.inverse(r1)) - float(comp.inverse(r2))
    theta = float(np.linalg.norm(th1 - th2))
    return GapSample(float(t), X, theta, X - theta)


@dataclass
class MonotoneResult:
    min_increment: float
    passed: bool
    samples: list = field(repr=False)
    refined: bool = False

    @property
    def gap0(self) -> float:
        return self.samples[0].gap

    @property
    def gap_end(self) -> float:
        return self.samples[-1].gap


def _forced_rhs(system: ControlSystem, drift: Callable, n: int) -> Callable:
    gm, A = system.growth, system.drift.A

    def rhs(t, z):
        out = np.empty_like(z)
        for k in range(2):
            y = z[k * n:(k + 1) * n]
            r = math.sqrt(float(y @ y))
            rate = float(gm.rate_at(t, r)) if r > 0 else 0.0
            out[k * n:(k + 1) * n] = rate * y + A(t) @ y + drift(t)
        return out

    return rhs


def _pair_path(system, drift, y_hat0, y_tilde0, t0, T, grid, rel_tol):
    """Both solutions on a uniform grid; integration restarts at drift breakpoints."""
    n = system.n
    rhs = _forced_rhs(system, drift, n)
    cuts = [t0] + [b for b in getattr(drift, "breakpoints", ()) if t0 < b < T] + [T]
    ts = np.linspace(t0, T, grid)
    z = np.concatenate([y_hat0, y_tilde0]).astype(float)
    out = [(t0, y_hat0.copy(), y_tilde0.copy())]
    for a, b in zip(cuts[:-1], cuts[1:]):
        inside = ts[(ts > a) & (ts < b)]
        t_eval = np.append(inside, b)
        with np.errstate(over="ignore", invalid="ignore"):
            sol = solve_ivp(rhs, (a, b), z, method="DOP853", rtol=rel_tol, atol=rel_tol * 1e-2,
                            t_eval=t_eval)
        if sol.status == -1 or not np.all(np.isfinite(sol.y)):
            raise HypothesisViolation(f"solutions do not stay finite on [{a:g}, {b:g}]")
        keep = sol.t < b if b < T else np.ones(sol.t.size, dtype=bool)
        for tk, zk in zip(sol.t[keep], sol.y.T[keep]):
            out.append((float(tk), zk[:n].copy(), zk[n:].copy()))
        z = sol.y[:, -1]
    return out


def certify_monotone(system: ControlSystem, drift: Callable, y_hat0, y_tilde0, interval: tuple,
                     bundle: ThresholdBundle, grid: int = MIN_GRID, rel_tol: float = 1e-11,
                     slack: float = 1e-9) -> MonotoneResult:
    """Check that the gap between the two forced solutions never decreases on the interval.

    Raises HypothesisViolation when the pair, drift or interval falls
    outside the comparison hypotheses; a failed monotonicity check is a
    result, not an exception. A failure is re-examined on a 4x finer grid
    with tighter tolerance before it is reported.
    """
    t0, T = map(float, interval)
    y_hat0 = np.atleast_1d(np.asarray(y_hat0, dtype=float))
    y_tilde0 = np.atleast_1d(np.asarray(y_tilde0, dtype=float))
    if not T > t0:
        raise HypothesisViolation("interval must have positive length")
    if t0 < 0 or T > bundle.T * (1 + 1e-12):
        raise HypothesisViolation(f"interval [{t0}, {T}] is not inside the bundle horizon [0, {bundle.T}]")
    if not float(np.linalg.norm(y_hat0)) > bundle.rho:
        raise HypothesisViolation(f"|y_hat0| = {np.linalg.norm(y_hat0):g} must exceed rho = {bundle.rho:g}")
    try:
        g0 = gap(system, y_hat0, y_tilde0, t0)
    except ChartDomainError as exc:
        raise HypothesisViolation(str(exc)) from exc
    if not g0.gap > 0:
        raise HypothesisViolation(f"initial gap {g0.gap:g} is not positive")
    probe = np.linspace(t0, T, 257)
    drift_sup = max(float(np.linalg.norm(drift(t))) for t in probe)
    a_sup = system.drift.norm_bound(t0, T)
    if drift_sup > bundle.M * (1 + 1e-12) or a_sup > bundle.M * (1 + 1e-12):
        raise HypothesisViolation(f"drift bound {max(drift_sup, a_sup):g} exceeds M = {bundle.M:g}")
    if not all(bundle.conditions().values()):
        raise HypothesisViolation("threshold bundle does not meet its own conditions")

    grid = max(int(grid), MIN_GRID)
    result = _evaluate(system, drift, y_hat0, y_tilde0, t0, T, grid, rel_tol, slack)
    if not result.passed:
        result = _evaluate(system, drift, y_hat0, y_tilde0, t0, T, 4 * grid, rel_tol / 10, slack)
        result.refined = True
    return result


def _evaluate(system, drift, y_hat0, y_tilde0, t0, T, grid, rel_tol, slack) -> MonotoneResult:
    path = _pair_path(system, drift, y_hat0, y_tilde0, t0, T, grid, rel_tol)
    samples = [gap(system, a, b, t) for t, a, b in path]
    inc = [s2.gap - s1.gap for s1, s2 in zip(samples, samples[1:])]
    ok = all(d >= -slack * (1 + abs(s.gap)) for d, s in zip(inc, samples))
    return MonotoneResult(float(min(inc)), bool(ok), samples)


# ---------------------------------------------------------------------------
# random hypothesis-satisfying instances

CATALOG_DEFAULTS = {"power": (2.0, 2.0), "logpower": (3.0, 2.0), "exponential": (2.0, 2.0)}


@functools.lru_cache(maxsize=None)
def _catalog_bundle(kind: str, p: float, beta: float, M: float, horizon: float):
    base = make_catalog_system(kind, p, beta, 1.0, 2)
    return base, rho_threshold(base, horizon, M)


@dataclass
class Instance:
    seed: int
    kind: str
    system: ControlSystem
    drift: PiecewiseDrift
    y_hat0: np.ndarray
    y_tilde0: np.ndarray
    interval: tuple
    bundle: ThresholdBundle


def random_instance(kind: str, seed: int, M: float = 1.0, horizon: float = 1.0,
                    margin: float = 0.1) -> Instance:
    """Draw a drift and an initial pair that satisfy the comparison hypotheses.

    The matrix drift is a rotation plus a small symmetric part with norm at
    most 0.9 M, the forcing is piecewise constant with |g| <= 0.9 M, and the
    pair is rejection-sampled until the initial gap is at least ``margin``
    times the radial term X.
    """
    p, beta = CATALOG_DEFAULTS[kind]
    base, bundle = _catalog_bundle(kind, p, beta, float(M), float(horizon))
    rng = np.random.default_rng(seed)
    comp = base.compactifier

    omega = rng.uniform(-0.6, 0.6) * M
    S = rng.normal(size=(2, 2))
    S = S + S.T
    S *= 0.3 * M / max(np.linalg.norm(S, 2), 1e-12)
    A = np.array([[0.0, -omega], [omega, 0.0]]) + S
    A *= min(1.0, 0.9 * M / np.linalg.norm(A, 2))
    system = make_catalog_system(kind, p, beta, 1.0, 2, A=MatrixDrift.constant(A, 2))

    while True:
        r_hat = bundle.rho * math.exp(rng.uniform(0.05, math.log(4.0)))
        r_tilde = r_hat * math.exp(rng.uniform(0.1, math.log(10.0)))
        X = float(comp.Phi(r_hat) - comp.Phi(r_tilde))
        a = rng.uniform(0, 2 * math.pi)
        delta = rng.uniform(-1, 1) * min(math.pi, 2 * math.asin(min(1.0, (1 - margin) * X / 2)))
        th_hat = np.array([math.cos(a), math.sin(a)])
        th_tilde = np.array([math.cos(a + delta), math.sin(a + delta)])
        g = X - float(np.linalg.norm(th_hat - th_tilde))
        if g >= margin * X:
            break
    y_hat0, y_tilde0 = r_hat * th_hat, r_tilde * th_tilde

    # the larger solution blows up first; stay well inside its lifetime
    T_blow = blowup_time_lower_bound(system, r_tilde, M)
    T = min(horizon, 0.8 * T_blow)
    k = int(rng.integers(1, 5))
    bps = tuple(np.concatenate([[0.0], np.sort(rng.uniform(0, T, k - 1))]))
    vals = []
    for _ in range(k):
        v = rng.normal(size=2)
        vals.append(v / np.linalg.norm(v) * rng.uniform(0, 0.9 * M))
    return Instance(seed, kind, system, PiecewiseDrift(bps, tuple(vals)), y_hat0, y_tilde0, (0.0, T), bundle)


def run_batch(kind: str, seeds: Sequence[int], M: float = 1.0, horizon: float = 1.0) -> list:
    """Certify one random instance per seed; returns JSON-ready records."""
    rows = []
    for seed in seeds:
        inst = random_instance(kind, int(seed), M, horizon)
        res = certify_monotone(inst.system, inst.drift, inst.y_hat0, inst.y_tilde0, inst.interval, inst.bundle)
        rows.append({"seed": int(seed), "kind": kind, "rho": inst.bundle.rho, "M": inst.bundle.M,
                     "min_increment": res.min_increment, "pass": res.passed})
    return rows
