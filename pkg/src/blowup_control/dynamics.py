"""Forward integration with a two-chart blowup certificate.

The outer chart integrates y directly. Once |y| reaches the switch radius
the state is mapped to x = Phi(|y|) y/|y| and the transformed field is
integrated instead; there blowup is the finite-time approach |x| -> 0,
which an embedded Runge-Kutta pair resolves with ordinary step control.

Compact-chart field, with s = |x|, theta = x/s, r = phi(s):

    ds/dt     = (phi/phi') (G/r + <A theta, theta> + <b, theta>/r)
    dtheta/dt = (I - theta theta^T)(A theta + b/r)

Both lines only need G/r and 1/r = exp(-log phi(s)), so radii beyond the
float range never have to be formed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .core import (
    COMPACT,
    OUTER,
    BlowupControlError,
    ControlGeometry,
    ControlLaw,
    ControlSystem,
    PreconditionError,
    Trajectory,
)
from .growth import ThresholdBundle

MAX_OSCILLATIONS = 10
# eps_blow fractions visited after blowup is declared (tail refinement)
LEVELS = (1.0, 0.5, 0.25, 1.0 / 16)


class StepFailure(BlowupControlError):
    pass


class ChartFailure(BlowupControlError):
    pass


class NoBlowup(BlowupControlError):
    pass


@dataclass(frozen=True)
class IntegrateOptions:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    switch_radius: Optional[float] = None
    eps_blow: Optional[float] = None
    t_max: float = 10.0
    max_steps: int = 200_000
    bundle: Optional[ThresholdBundle] = None
    method: str = "DOP853"

    def resolve(self, system: ControlSystem) -> "IntegrateOptions":
        """Fill in the default switch radius and eps_blow for ``system``."""
        comp = system.compactifier
        eps = self.eps_blow if self.eps_blow is not None else 1e-6 * comp.s0
        if not 0 < eps < comp.s0 / 10:
            raise PreconditionError(f"eps_blow={eps} must lie in (0, s0/10) with s0={comp.s0}")
        R = self.switch_radius
        if R is None:
            if self.bundle is not None:
                R = max(2 * self.bundle.rho, 10 * float(np.linalg.norm(system.y0)))
            else:
                R = min(1e3, system.growth.outer_cap)
            R = max(R, 2 * comp.r_min * (1 + 1e-9))
        if self.bundle is not None and not R > self.bundle.rho:
            raise PreconditionError(f"switch_radius {R} must exceed rho={self.bundle.rho}")
        if not R > comp.r_min:
            raise PreconditionError(f"switch_radius {R} must exceed phi(s0)={comp.r_min}")
        return replace(self, switch_radius=float(R), eps_blow=float(eps))


# ---------------------------------------------------------------------------
# fields


def _costate_rate(system: ControlSystem, t: float, chart: str, v: np.ndarray):
    """(G/r, G_r - G/r, theta) at the state v in the given chart."""
    nrm = math.sqrt(float(v @ v))
    gm = system.growth
    if chart == OUTER:
        if nrm == 0.0:
            return float(gm.G_r(t, 0.0)), 0.0, np.zeros_like(v)
        return float(gm.rate_at(t, nrm)), float(gm.excess_at(t, nrm)), v / nrm
    L = float(system.compactifier.log_phi(nrm))
    return float(gm.rate_at_log(t, L)), float(gm.excess_at_log(t, L)), v / nrm


def adjoint_apply(rate: float, excess: float, theta: np.ndarray, At: np.ndarray,
                  psi: np.ndarray) -> np.ndarray:
    """-(rate I + excess theta theta^T + A^T) psi."""
    return -(rate * psi + excess * theta * float(theta @ psi) + At.T @ psi)


def polar_costate(linear: Callable, p: np.ndarray) -> np.ndarray:
    """Costate carried as psi = exp(nu) phi with |phi| = 1.

    ``p = (nu, phi)`` and ``linear(phi)`` is the linear costate field at phi.
    The direction equation keeps |phi| = 1 attracting, so absolute error
    control on (nu, phi) is relative control on psi however small it gets.
    """
    phi = p[1:]
    phi = phi / math.sqrt(float(phi @ phi))
    d = linear(phi)
    a = float(phi @ d)
    return np.concatenate([[a], d - a * phi])


def _make_rhs(system: ControlSystem, chart: str, n: int, control: Callable, costate: bool):
    A = system.drift.A
    bfun = system.controls.b
    gm = system.growth
    comp = system.compactifier

    if chart == OUTER:
        def rhs(t, z):
            y = z[:n]
            u = control(t, z[n + 1:] if costate else None)
            At = A(t)
            r = math.sqrt(float(y @ y))
            rate = float(gm.rate_at(t, r)) if r > 0 else 0.0
            dy = rate * y + At @ y + bfun(t, u)
            if not costate:
                return dy
            rt, ex, th = _costate_rate(system, t, OUTER, y)
            return np.concatenate([dy, polar_costate(lambda f: adjoint_apply(rt, ex, th, At, f), z[n:])])
    else:
        # state w = (t, log s, theta[, costate]) in the rescaled time tau with
        # dt/dtau = s / (|phi/phi'| (1 + G/r)), so that log s falls at unit rate
        def rhs(tau, w):
            t = w[0]
            s = math.exp(w[1])
            th = w[2:n + 2]
            th = th / math.sqrt(float(th @ th))
            u = control(t, w[n + 3:] if costate else None)
            At = A(t)
            L = float(comp.log_phi(s))
            inv_r = math.exp(-L)
            rate = float(gm.rate_at_log(t, L))
            bu = bfun(t, u)
            Ath = At @ th
            q = float(comp.phi_over_d1(s))
            dlog_s = q * (rate + float(th @ Ath) + float(th @ bu) * inv_r) / s
            tang = Ath + bu * inv_r
            tang = tang - th * float(th @ tang)
            scale = compact_time_scale(s, q, rate)
            if not costate:
                return scale * np.concatenate([[1.0, dlog_s], tang])
            ex = float(gm.excess_at_log(t, L))
            dp = polar_costate(lambda f: adjoint_apply(rate, ex, th, At, f), w[n + 2:])
            return scale * np.concatenate([[1.0, dlog_s], tang, dp])
    return rhs


def compact_time_scale(s: float, phi_over_d1: float, rate: float) -> float:
    """dt/dtau in the compact chart."""
    return s / (abs(phi_over_d1) * (1.0 + rate))


def segment_state(segments: list, t: float) -> tuple:
    """(chart, full state) at time t from a list of dense segments."""
    for ta, tb, chart, dense in segments:
        if ta <= t <= tb:
            return chart, np.asarray(dense(t))
    raise ValueError(f"t={t} is not covered by the dense segments")


def _finite(rhs: Callable, chart: str) -> Callable:
    def wrapped(t, z):
        out = rhs(t, z)
        if not np.all(np.isfinite(out)):
            raise StepFailure(f"non-finite field in {chart} chart near t={t}")
        return out
    return wrapped


def to_compact(system: ControlSystem, y: np.ndarray) -> np.ndarray:
    r = float(np.linalg.norm(y))
    return float(system.compactifier.Phi(r)) * y / r


def to_outer(system: ControlSystem, x: np.ndarray) -> np.ndarray:
    s = float(np.linalg.norm(x))
    return float(system.compactifier.phi(s)) * x / s


# ---------------------------------------------------------------------------
# marching


TAU_SPAN = 200.0


def _to_w(t: float, z: np.ndarray, n: int) -> np.ndarray:
    s = float(np.linalg.norm(z[:n]))
    return np.concatenate([[t, math.log(s)], z[:n] / s, z[n:]])


def _from_w(w: np.ndarray, n: int) -> np.ndarray:
    th = w[2:n + 2]
    return np.concatenate([math.exp(w[1]) * th / math.sqrt(float(th @ th)), w[n + 2:]])


class _TimeWarped:
    """Dense output of a rescaled-time solve, evaluated at physical time t."""

    def __init__(self, sol, tau0: float, tau1: float, n: int):
        self.sol, self.tau0, self.tau1, self.n = sol, tau0, tau1, n

    def tx(self, tau: float) -> tuple:
        """(t, x, costate part) at rescaled time tau."""
        w = self.sol(tau)
        z = _from_w(w, self.n)
        return float(w[0]), z[:self.n], z[self.n:]

    def tau_of(self, t: float) -> float:
        lo, hi = self.tau0, self.tau1
        f = lambda tau: self.sol(tau)[0] - t
        if f(lo) >= 0:
            return lo
        if f(hi) <= 0:
            return hi
        return brentq(f, lo, hi, xtol=1e-13, rtol=1e-15)

    def __call__(self, t: float) -> np.ndarray:
        return _from_w(self.sol(self.tau_of(t)), self.n)


@dataclass
class _Run:
    t: list
    z: list
    charts: list
    controls: list
    segments: list
    level_times: dict
    n_steps: int
    switches: int
    chart: str
    degenerate: list
    taus: list
    seg_ids: list


def _march(system: ControlSystem, t0: float, z0: np.ndarray, chart0: str, t_stop: float,
           control: Callable, opts: IntegrateOptions, costate: bool = False,
           breakpoints: Sequence[float] = (), levels: Sequence[float] = LEVELS,
           degenerate: Optional[Callable] = None) -> _Run:
    """Integrate from (t0, z0) until t_stop or until the last eps level.

    ``control(t, psi)`` gives the control; for open-loop laws it is constant
    between consecutive ``breakpoints`` and steps never straddle one.
    """
    n = system.n
    comp = system.compactifier
    R_sw = opts.switch_radius
    s_back = float(comp.Phi(R_sw / 2)) if R_sw / 2 > comp.r_min else comp.s0 * (1 - 1e-12)
    thresholds = [opts.eps_blow * f for f in levels]

    atol = np.full(len(z0), opts.abs_tol)

    t, z, chart = float(t0), np.array(z0, dtype=float), chart0
    out = _Run([t], [z.copy()], [chart], [control(t, z[n + 1:] if costate else None)], [], {}, 0, 0, chart, [],
               [0.0 if chart == COMPACT else math.nan], [0])
    if degenerate is not None:
        out.degenerate.append(degenerate(t, z[n + 1:]))
    stops = sorted(b for b in breakpoints if t0 < b < t_stop) + [t_stop]
    level = 0
    back_count = 0

    def radius_event(level_value, direction):
        def ev(_, z):
            return math.sqrt(float(z[:n] @ z[:n])) - level_value
        ev.terminal, ev.direction = True, direction
        return ev

    def log_radius_event(level_value, direction):
        log_level = math.log(level_value)

        def ev(_, w):
            return w[1] - log_level
        ev.terminal, ev.direction = True, direction
        return ev

    while True:
        nxt = next((b for b in stops if b > t + 1e-15 * max(1.0, abs(t))), None)
        if nxt is None:
            break
        u_seg = None if costate else control(t, None)
        ctl = (lambda tt, p, u=u_seg: u) if not costate else control
        rhs = _make_rhs(system, chart, n, ctl, costate)

        if chart == OUTER:
            events = [radius_event(R_sw, 1)]
            span, w0, watol = (t, nxt), z, atol
        else:
            def ev_time(_, w, nxt=nxt):
                return w[0] - nxt
            ev_time.terminal, ev_time.direction = True, 1
            events = [log_radius_event(thresholds[level], -1), log_radius_event(s_back, 1), ev_time]
            span, w0 = (0.0, TAU_SPAN), _to_w(t, z, n)
            watol = np.concatenate([[opts.abs_tol * 1e-3], atol[:1], atol])

        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            sol = solve_ivp(_finite(rhs, chart), span, w0, method=opts.method, rtol=opts.rel_tol,
                            atol=watol, events=events, dense_output=True)
        if sol.status == -1:
            raise StepFailure(f"integrator failed in {chart} chart near t={t}: {sol.message}")
        out.n_steps += len(sol.t) - 1
        if out.n_steps > opts.max_steps:
            raise StepFailure(f"max_steps={opts.max_steps} exceeded near t={t}")

        if chart == OUTER:
            ts, zs, dense = sol.t, sol.y.T, sol.sol
        else:
            ts, zs = sol.y[0], np.array([_from_w(w, n) for w in sol.y.T])
            dense = _TimeWarped(sol.sol, sol.t[0], sol.t[-1], n)
        fired = [i for i, te in enumerate(sol.t_events) if len(te)] if sol.status == 1 else []
        if chart == COMPACT and fired == [2]:
            ts = ts.copy()
            ts[-1] = nxt  # land exactly on the breakpoint
        seg_id = len(out.segments)
        for k, (tk, zk) in enumerate(zip(ts[1:], zs[1:]), start=1):
            out.taus.append(float(sol.t[k]) if chart == COMPACT else math.nan)
            out.seg_ids.append(seg_id)
            out.t.append(float(tk))
            out.z.append(zk.copy())
            out.charts.append(chart)
            out.controls.append(u_seg if not costate else control(tk, zk[n + 1:]))
            if degenerate is not None:
                out.degenerate.append(degenerate(tk, zk[n + 1:]))
        out.segments.append((t, float(ts[-1]), chart, dense))
        t, z = float(ts[-1]), zs[-1].copy()

        if not fired:
            if chart == OUTER and t >= t_stop:
                break
            continue
        if chart == OUTER:
            z = np.concatenate([to_compact(system, z[:n]), z[n:]])
            chart = COMPACT
            out.switches += 1
        elif fired[0] == 0:
            out.level_times[levels[level]] = t
            level += 1
            if level == len(levels):
                break
            continue
        elif fired[0] == 2:
            if t >= t_stop:
                break
            continue
        else:
            back_count += 1
            if back_count > MAX_OSCILLATIONS:
                raise ChartFailure(f"more than {MAX_OSCILLATIONS} chart oscillations by t={t}")
            z = np.concatenate([to_outer(system, z[:n]), z[n:]])
            chart = OUTER
            out.switches += 1
        # restart sample in the new chart
        out.taus.append(0.0 if chart == COMPACT else math.nan)
        out.seg_ids.append(len(out.segments))
        out.t.append(t)
        out.z.append(z.copy())
        out.charts.append(chart)
        out.controls.append(out.controls[-1])
        if degenerate is not None:
            out.degenerate.append(out.degenerate[-1])
    out.chart = chart
    return out


def _start(system: ControlSystem, y0: np.ndarray, opts: IntegrateOptions):
    r0 = float(np.linalg.norm(y0))
    if r0 >= opts.switch_radius:
        return to_compact(system, y0), COMPACT
    return np.array(y0, dtype=float), OUTER


def _dedupe(run: _Run):
    """Drop the duplicated time stamps written at chart switches (keep the later chart)."""
    keep = [i for i in range(len(run.t)) if i + 1 == len(run.t) or run.t[i + 1] > run.t[i]]
    return keep


def _to_trajectory(system: ControlSystem, run: _Run, opts: IntegrateOptions, n: int) -> Trajectory:
    keep = _dedupe(run)
    traj = Trajectory(
        t=np.array([run.t[i] for i in keep]),
        states=np.array([run.z[i][:n] for i in keep]),
        charts=[run.charts[i] for i in keep],
        controls=np.array([np.atleast_1d(run.controls[i]) for i in keep]),
        compactifier=system.compactifier,
        switch_radius=opts.switch_radius,
        eps_blow=opts.eps_blow,
        segments=run.segments,
        level_times=dict(run.level_times),
        n_steps=run.n_steps,
        switches=run.switches,
        degenerate=np.array([run.degenerate[i] for i in keep]) if run.degenerate else None,
        taus=np.array([run.taus[i] for i in keep]),
        seg_ids=np.array([run.seg_ids[i] for i in keep], dtype=int),
    )
    if 1.0 in run.level_times:
        t1 = run.level_times[1.0]
        t2 = run.level_times.get(0.5, t1)
        traj.blowup = (t1, max(abs(t2 - t1), opts.rel_tol * t1))
    return traj


def integrate(system: ControlSystem, law: ControlLaw, opts: IntegrateOptions = IntegrateOptions()) -> Trajectory:
    """Integrate the system under an open-loop law up to blowup or t_max."""
    if law.is_feedback:
        raise PreconditionError("integrate needs an open-loop law; use pmp.shoot for feedback")
    opts = opts.resolve(system)
    z0, chart = _start(system, system.y0, opts)
    run = _march(system, 0.0, z0, chart, opts.t_max, lambda t, p: law.value(t), opts,
                 breakpoints=law.breakpoints)
    return _to_trajectory(system, run, opts, system.n)


def richardson(level_times: dict, rel_tol: float = 1e-10) -> tuple:
    """Extrapolate blowup times recorded at eps, eps/4, eps/16.

    Returns (T_hat, err) with err = 2 |T(eps/16) - T(eps/4)| plus an
    integration-tolerance floor.
    """
    T1, T2, T3 = (level_times[k] for k in (1.0, 0.25, 1.0 / 16))
    d1, d2 = T2 - T1, T3 - T2
    T = T3
    if d1 > 0 and 0 < d2 < d1:
        ratio = d2 / d1
        T = T3 + d2 * ratio / (1 - ratio)
    err = 2 * abs(T3 - T2) + 10 * rel_tol * abs(T)
    return float(T), float(err)


def blowup_time(system: ControlSystem, law: ControlLaw, opts: IntegrateOptions = IntegrateOptions(),
                trajectory: Optional[Trajectory] = None) -> tuple:
    """Refined blowup time (T_hat, err) for an open-loop law."""
    traj = trajectory if trajectory is not None else integrate(system, law, opts)
    if traj.blowup is None or 1.0 / 16 not in traj.level_times:
        raise NoBlowup(f"no blowup before t={traj.t[-1]:g}")
    return richardson(traj.level_times, opts.rel_tol)


# ---------------------------------------------------------------------------
# chattering


def chattering_law(u_a, u_b, lam: float, h: float, horizon: float, phase: str = "centered") -> ControlLaw:
    """Periodic law using u_a for a fraction lam of each period h.

    ``phase="centered"`` places the u_a block in the middle of the period
    (u_b, u_a, u_b); ``"leading"`` puts it first.
    """
    if not 0 <= lam <= 1:
        raise PreconditionError("lam must lie in [0, 1]")
    if not h > 0:
        raise PreconditionError("period must be positive")
    u_a, u_b = np.atleast_1d(np.asarray(u_a, float)), np.atleast_1d(np.asarray(u_b, float))
    bps, vals = [], []

    def push(t, u):
        if vals and np.array_equal(vals[-1], u):
            return
        if bps and t <= bps[-1]:
            vals[-1] = u
            return
        bps.append(t)
        vals.append(u)

    k = 0
    while k * h < horizon:
        t0 = k * h
        if phase == "centered":
            pre = 0.5 * (1 - lam) * h
            if pre > 0:
                push(t0, u_b)
            if lam > 0:
                push(t0 + pre, u_a)
            if lam < 1:
                push(t0 + pre + lam * h, u_b)
        else:
            if lam > 0:
                push(t0, u_a)
            if lam < 1:
                push(t0 + lam * h, u_b)
        k += 1
    return ControlLaw.piecewise(bps, vals)


def averaged_system(system: ControlSystem, u_a, u_b, lam: float) -> ControlSystem:
    """Same system with b replaced by the constant mixture lam b(u_a) + (1-lam) b(u_b)."""
    ctl = system.controls
    bmix = lambda t, u: lam * ctl.b(t, u_a) + (1 - lam) * ctl.b(t, u_b)
    avg = ControlGeometry.custom(
        b=bmix,
        support=lambda t, psi: (np.zeros(1), float(psi @ bmix(t, None))),
        bound=lambda t0, t1: ctl.bound(t0, t1),
        n=system.n, m=1,
    )
    return ControlSystem(**{**system.__dict__, "controls": avg})


def chatter_convergence(system: ControlSystem, u_a, u_b, lam: float, periods: Sequence[float],
                        opts: IntegrateOptions = IntegrateOptions(), phase: str = "centered"):
    """Blowup times of chattering laws against the averaged-drift blowup time.

    Returns ([(h, T(h)), ...], T_avg).
    """
    results = []
    for h in periods:
        law = chattering_law(u_a, u_b, lam, h, opts.t_max, phase)
        T, _ = blowup_time(system, law, opts)
        results.append((float(h), T))
    avg = averaged_system(system, u_a, u_b, lam)
    T_avg, _ = blowup_time(avg, ControlLaw.constant(np.zeros(1)), opts)
    return results, T_avg
