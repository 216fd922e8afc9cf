"""Costate integration, Hamiltonian maximization and extremal certification."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np
from scipy.integrate import solve_ivp

from .core import (
    COMPACT,
    FAIL,
    NOT_CHECKABLE,
    OUTER,
    PASS,
    ControlKind,
    ControlSystem,
    CostatePath,
    PMPReport,
    PreconditionError,
    Trajectory,
)
from .dynamics import (
    IntegrateOptions,
    StepFailure,
    _march,
    _start,
    _to_trajectory,
    _dedupe,
    adjoint_apply,
    compact_time_scale,
    polar_costate,
    segment_state,
    to_outer,
)
from .growth import growth_exponent_integral

TI, TS = "TI", "TS"


class AdjointMode(str, enum.Enum):
    STRUCTURED = "structured"
    AUTONOMOUS_FULL = "autonomous_full"


@dataclass(frozen=True)
class AdjointMatrixSpec:
    """How the costate matrix is formed.

    ``STRUCTURED`` uses the radial/transverse split of the growth term.
    ``AUTONOMOUS_FULL`` uses a state Jacobian ``jacobian(y, u)`` of a
    time-independent field; when omitted it is assembled from G and G_r.
    """

    mode: AdjointMode = AdjointMode.STRUCTURED
    jacobian: Optional[Callable] = None

    @classmethod
    def structured(cls) -> "AdjointMatrixSpec":
        return cls(AdjointMode.STRUCTURED)

    @classmethod
    def autonomous_full(cls, jacobian: Optional[Callable] = None) -> "AdjointMatrixSpec":
        return cls(AdjointMode.AUTONOMOUS_FULL, jacobian)


STRUCTURED = AdjointMatrixSpec.structured()


def field_jacobian(system: ControlSystem, y: np.ndarray) -> np.ndarray:
    """d/dy of G(|y|) y/|y| + A y for an autonomous system."""
    n = system.n
    A = system.drift.A(0.0)
    r = float(np.linalg.norm(y))
    gm = system.growth
    if r == 0.0:
        return float(gm.G_r(0.0, 0.0)) * np.eye(n) + A
    G = float(gm.G(0.0, r))
    Gr = float(gm.G_r(0.0, r))
    return (G / r) * np.eye(n) + ((r * Gr - G) / r**3) * np.outer(y, y) + A


def _check_spec(system: ControlSystem, spec: AdjointMatrixSpec) -> None:
    if spec.mode is AdjointMode.AUTONOMOUS_FULL and spec.jacobian is None and not system.autonomous:
        raise PreconditionError("autonomous_full adjoint needs a time-independent system or a Jacobian")


def _field(system: ControlSystem, t: float, chart: str, v: np.ndarray, psi: np.ndarray,
           spec: AdjointMatrixSpec) -> tuple:
    """(dpsi/dt, used_zero_fallback) at the chart state v."""
    if spec.mode is AdjointMode.AUTONOMOUS_FULL:
        y = v if chart == OUTER else to_outer(system, v)
        J = spec.jacobian(y, None) if spec.jacobian is not None else field_jacobian(system, y)
        return -np.asarray(J).T @ psi, not np.any(y)
    gm = system.growth
    At = system.drift.A(t)
    nrm = float(np.linalg.norm(v))
    if chart == OUTER:
        if nrm == 0.0:
            return -(float(gm.G_r(t, 0.0)) * psi + At.T @ psi), True
        rate, ex = float(gm.rate_at(t, nrm)), float(gm.excess_at(t, nrm))
    else:
        L = float(system.compactifier.log_phi(nrm))
        rate, ex = float(gm.rate_at_log(t, L)), float(gm.excess_at_log(t, L))
    return adjoint_apply(rate, ex, v / nrm, At, psi), False


def adjoint_matrix(system: ControlSystem, t: float, y, spec: AdjointMatrixSpec = STRUCTURED) -> np.ndarray:
    """Matrix P with dpsi/dt = -P psi at the outer-chart state y."""
    y = np.asarray(y, dtype=float)
    _check_spec(system, spec)
    cols = [-_field(system, t, OUTER, y, e, spec)[0] for e in np.eye(system.n)]
    return np.array(cols).T


def adjoint_rhs(system: ControlSystem, t: float, y, psi, spec: AdjointMatrixSpec = STRUCTURED) -> np.ndarray:
    """Costate derivative at (t, y, psi); y = 0 uses the G_r(t, 0) I fallback."""
    _check_spec(system, spec)
    y = np.atleast_1d(np.asarray(y, dtype=float))
    psi = np.atleast_1d(np.asarray(psi, dtype=float))
    return _field(system, t, OUTER, y, psi, spec)[0]


# ---------------------------------------------------------------------------
# costate along a stored trajectory


class _Pieces:
    def __init__(self):
        self.pieces = []

    def add(self, a: float, b: float, fn: Callable) -> None:
        self.pieces.append((min(a, b), max(a, b), fn))

    def __call__(self, t: float) -> np.ndarray:
        for a, b, fn in self.pieces:
            if a <= t <= b:
                return np.asarray(fn(t))
        raise ValueError(f"t={t} outside the costate range")


def integrate_adjoint(trajectory: Trajectory, system: ControlSystem, psi_at: tuple,
                      direction: str = "forward", spec: AdjointMatrixSpec = STRUCTURED,
                      t_end: Optional[float] = None, rel_tol: float = 1e-11,
                      abs_tol: float = 1e-12) -> CostatePath:
    """Solve the linear costate equation along a stored trajectory.

    ``psi_at = (t_ref, psi_ref)``. Forward runs to ``t_end`` (default: end
    of the trajectory), backward down to ``t_end`` (default: its start).
    Compact-chart pieces are integrated in the same rescaled time as the
    state, so the stiff approach to blowup costs few steps.
    """
    if direction not in ("forward", "backward"):
        raise PreconditionError("direction must be 'forward' or 'backward'")
    if not trajectory.segments:
        raise PreconditionError("trajectory has no dense output")
    _check_spec(system, spec)
    t_ref, psi_ref = float(psi_at[0]), np.atleast_1d(np.asarray(psi_at[1], dtype=float))
    t_lo, t_hi = float(trajectory.t[0]), float(trajectory.t[-1])
    if not t_lo <= t_ref <= t_hi:
        raise PreconditionError(f"t_ref={t_ref} outside trajectory range [{t_lo}, {t_hi}]")
    n = system.n
    fwd = direction == "forward"
    stop = (t_hi if fwd else t_lo) if t_end is None else float(t_end)
    if (fwd and stop < t_ref) or (not fwd and stop > t_ref):
        raise PreconditionError("t_end lies on the wrong side of t_ref")

    psi_norm = float(np.linalg.norm(psi_ref))
    if psi_norm == 0.0:
        # linear equation: the zero costate stays zero
        seg_t = trajectory.t[(trajectory.t >= min(t_ref, stop)) & (trajectory.t <= max(t_ref, stop))]
        zero = np.zeros(n)
        return CostatePath(seg_t.copy(), np.zeros((len(seg_t), n)), (t_ref, 0.0), lambda t: zero.copy())

    segs = trajectory.segments if fwd else trajectory.segments[::-1]
    ts, ps = [t_ref], [psi_ref.copy()]
    dense = _Pieces()
    p = np.concatenate([[math.log(psi_norm)], psi_ref / psi_norm])
    fallback = []
    for ta, tb, chart, seg in segs:
        a, b = (max(ta, t_ref), min(tb, stop)) if fwd else (min(tb, t_ref), max(ta, stop))
        if (fwd and b <= a) or (not fwd and b >= a):
            continue
        if chart == OUTER:
            def rhs(t, q, seg=seg):
                v = np.asarray(seg(t))[:n]
                if not np.any(v):
                    fallback.append(t)
                return polar_costate(lambda f: _field(system, t, OUTER, v, f, spec)[0], q)
            span = (a, b)
        else:
            def rhs(tau, q, seg=seg):
                t, x, _ = seg.tx(tau)
                sn = float(np.linalg.norm(x))
                L = float(system.compactifier.log_phi(sn))
                qq = float(system.compactifier.phi_over_d1(sn))
                scale = compact_time_scale(sn, qq, float(system.growth.rate_at_log(t, L)))
                return scale * polar_costate(lambda f: _field(system, t, COMPACT, x, f, spec)[0], q)
            span = (seg.tau_of(a), seg.tau_of(b))
        sol = solve_ivp(rhs, span, p, method="DOP853", rtol=rel_tol, atol=abs_tol, dense_output=True)
        if sol.status == -1:
            raise StepFailure(f"costate integration failed near t={a}: {sol.message}")
        if chart == OUTER:
            times = sol.t
            dense.add(a, b, lambda t, ps=sol.sol: _polar_value(ps(t)))
        else:
            times = np.array([seg.tx(tau)[0] for tau in sol.t])
            times[0], times[-1] = a, b
            dense.add(a, b, lambda t, seg=seg, ps=sol.sol: _polar_value(ps(seg.tau_of(t))))
        ts.extend(times[1:])
        ps.extend(_polar_value(q) for q in sol.y.T[1:])
        p = sol.y[:, -1].copy()

    t_arr, p_arr = np.array(ts), np.array(ps)
    if not fwd:
        t_arr, p_arr = t_arr[::-1], p_arr[::-1]
    keep = np.concatenate([np.diff(t_arr) > 0, [True]])
    flags = {"zero_state_fallback": sorted(set(fallback))} if fallback else {}
    return CostatePath(t_arr[keep], p_arr[keep], (t_ref, float(np.linalg.norm(psi_ref))), dense, flags)


# ---------------------------------------------------------------------------
# Hamiltonian maximization


class HamiltonianChoice(NamedTuple):
    u: np.ndarray
    value: float
    degenerate: bool


def hamiltonian_control(system: ControlSystem, t: float, psi) -> HamiltonianChoice:
    """Maximizer of <psi, b(t, u)> over U with its value."""
    psi = np.atleast_1d(np.asarray(psi, dtype=float))
    ctl = system.controls
    pn = float(np.linalg.norm(psi))
    if ctl.kind is ControlKind.BALL:
        Bt = ctl.B(t)
        w = Bt.T @ psi
        wn = float(np.linalg.norm(w))
        if wn <= 1e-14 * pn * max(float(np.linalg.norm(Bt, 2)), 1.0) or wn == 0.0:
            return HamiltonianChoice(np.zeros(ctl.m), 0.0, True)
        return HamiltonianChoice(ctl.radius * w / wn, ctl.radius * wn, False)
    if ctl.kind is ControlKind.FINITE:
        Bt = ctl.B(t)
        vals = np.array([float(psi @ (Bt @ v)) for v in ctl.values])
        i = int(np.argmax(vals))
        spread = float(vals.max() - vals.min())
        if pn == 0.0 or (len(vals) > 1 and spread <= 1e-14 * max(pn, 1.0)):
            return HamiltonianChoice(ctl.zero_control(), float(vals[i]), True)
        return HamiltonianChoice(ctl.values[i], float(vals[i]), False)
    if ctl.support is None:
        raise PreconditionError("custom control set has no support evaluator")
    u, val = ctl.support(t, psi)
    return HamiltonianChoice(np.atleast_1d(np.asarray(u, dtype=float)), float(val), pn == 0.0)


def costate_feedback(system: ControlSystem) -> Callable:
    """Feedback (t, psi) -> u that holds the last regular choice on degenerate costates."""
    last = [None]

    def control(t, psi):
        ch = hamiltonian_control(system, t, psi)
        if not ch.degenerate:
            last[0] = ch.u
            return ch.u
        return last[0] if last[0] is not None else ch.u

    return control


def _polar_value(p: np.ndarray) -> np.ndarray:
    return math.exp(p[0]) * p[1:] / math.sqrt(float(p[1:] @ p[1:]))


def shoot(system: ControlSystem, psi0, opts: IntegrateOptions = IntegrateOptions(),
          mode: str = TI) -> tuple:
    """Integrate state and costate together under the maximizing feedback.

    Returns (Trajectory, CostatePath); ``trajectory.degenerate`` marks
    samples where the maximizer was not unique.
    """
    if mode not in (TI, TS):
        raise PreconditionError(f"mode must be TI or TS, got {mode!r}")
    psi0 = np.atleast_1d(np.asarray(psi0, dtype=float))
    if psi0.shape != (system.n,) or not abs(float(np.linalg.norm(psi0)) - 1.0) <= 1e-9:
        raise PreconditionError("psi0 must be a unit vector of the state dimension")
    opts = opts.resolve(system)
    x0, chart = _start(system, system.y0, opts)
    control = costate_feedback(system)
    degenerate = lambda t, p: hamiltonian_control(system, t, p).degenerate
    run = _march(system, 0.0, np.concatenate([x0, [0.0], psi0]), chart, opts.t_max, control, opts,
                 costate=True, degenerate=degenerate)
    traj = _to_trajectory(system, run, opts, system.n)
    keep = _dedupe(run)
    n = system.n
    segments = run.segments
    costate = CostatePath(
        t=traj.t.copy(),
        psi=np.array([_polar_value(run.z[i][n:]) for i in keep]),
        normalization=(0.0, 1.0),
        dense=lambda t: _polar_value(segment_state(segments, t)[1][n:]),
    )
    return traj, costate


# ---------------------------------------------------------------------------
# certification


@dataclass(frozen=True)
class CertifyOptions:
    tail_levels: int = 10
    smallness: float = 1e-3
    gap_tol: float = 1e-8
    slack: float = 1e-9
    # samples where psi is this close to orthogonal to y carry no usable
    # sign information at the integration tolerance and are skipped
    resolution: float = 1e-6
    # absolute accuracy of the integrated unit costate direction; <psi, y>
    # is trusted only to direction_tol / |cos| in relative terms
    direction_tol: float = 1e-9


def _inner_log(traj: Trajectory, psi: np.ndarray, i: int) -> tuple:
    """(sign, log|<psi, y>|, cosine of the angle) at sample i, without building |y|."""
    v = traj.states[i]
    nrm = float(np.linalg.norm(v))
    pn = float(np.linalg.norm(psi))
    if nrm == 0.0 or pn == 0.0:
        return 0.0, -math.inf, 0.0
    dot = float(psi @ (v / nrm))
    if dot == 0.0:
        return 0.0, -math.inf, 0.0
    log_r = math.log(nrm) if traj.charts[i] == OUTER else float(traj.compactifier.log_phi(nrm))
    return math.copysign(1.0, dot), log_r + math.log(abs(dot)), dot / pn


def _value(sign: float, logabs: float) -> float:
    if sign == 0.0:
        return 0.0
    return sign * math.exp(min(logabs, 709.0))


def _step_ok(s1, l1, s2, l2, slack) -> bool:
    """w2 >= w1 - slack max(1, |w1|) for w = sign exp(log)."""
    if max(l1, l2) < 700:
        w1, w2 = _value(s1, l1), _value(s2, l2)
        return w2 >= w1 - slack * max(1.0, abs(w1))
    # both huge: compare in log space (the absolute part of the slack is negligible)
    if s1 >= 0 and s2 > 0:
        return l2 >= l1 + math.log1p(-slack)
    if s1 < 0 and s2 <= 0:
        return s2 == 0 or l2 <= l1 + math.log1p(slack)
    return s2 > s1


def certify(trajectory: Trajectory, costate: CostatePath, system: ControlSystem, mode: str = TI,
            options: CertifyOptions = CertifyOptions()) -> PMPReport:
    """Check maximization, tail decay, inner-product sign and weighted monotonicity."""
    if mode not in (TI, TS):
        raise PreconditionError(f"mode must be TI or TS, got {mode!r}")
    t0 = float(costate.t[0])
    n0 = float(np.linalg.norm(costate.at(t0)))
    if n0 > 0 and abs(n0 - 1.0) > 1e-12:
        costate = costate.rescaled(1.0 / n0)
    c_lo, c_hi = float(costate.t[0]), float(costate.t[-1])
    idx = [i for i, t in enumerate(trajectory.t) if c_lo <= t <= c_hi]
    details = {}
    # costates produced alongside the trajectory are read off the samples;
    # near blowup t no longer resolves the dense output well
    aligned = len(costate.t) == len(trajectory.t) and np.array_equal(costate.t, trajectory.t)
    psi_at = (lambda i: costate.psi[i]) if aligned else (lambda i: costate.at(float(trajectory.t[i])))

    # (a) Hamiltonian maximization residual
    gap, sup_psi, sup_b = 0.0, 0.0, 0.0
    gap_at = None
    deg = trajectory.degenerate
    for i in idx:
        t = float(trajectory.t[i])
        psi = psi_at(i)
        b_now = system.controls.b(t, trajectory.controls[i])
        sup_psi = max(sup_psi, float(np.linalg.norm(psi)))
        sup_b = max(sup_b, float(np.linalg.norm(b_now)))
        if deg is not None and deg[i]:
            continue
        g = hamiltonian_control(system, t, psi).value - float(psi @ b_now)
        if g > gap:
            gap, gap_at = g, t
    details["gap_at"] = gap_at
    details["degenerate_samples"] = int(np.sum(deg)) if deg is not None else 0
    gap_ok = gap <= options.gap_tol * max(sup_psi * sup_b, 1e-300) or gap <= 1e-300
    verdicts = {"H_max": PASS if gap_ok else FAIL}

    # (b) costate tail
    tail = []
    if trajectory.blowup is not None:
        T = float(trajectory.blowup[0])
        details["T_hat"] = T
        tks = [T * (1 - 2.0**-k) for k in range(1, options.tail_levels + 1)]
        if tks[-1] <= c_hi and tks[0] >= c_lo:
            tail = [(tk, float(np.linalg.norm(costate.at(tk)))) for tk in tks]
            norms = [v for _, v in tail]
            decreasing = all(b < a for a, b in zip(norms, norms[1:]))
            small = norms[-1] <= options.smallness * norms[0]
            details["tail_decreasing"], details["tail_small"] = decreasing, small
            verdicts["transversality"] = PASS if decreasing and small else FAIL
        else:
            verdicts["transversality"] = NOT_CHECKABLE
    else:
        verdicts["transversality"] = NOT_CHECKABLE

    # (c) sign of <psi, y>
    raw = [_inner_log(trajectory, psi_at(i), i) for i in idx]
    sign_inner = [(float(trajectory.t[i]), _value(s, l)) for i, (s, l, _) in zip(idx, raw)]
    resolved = [abs(c) >= options.resolution or len(system.y0) == 1 for _, _, c in raw]
    details["unresolved_samples"] = int(len(raw) - sum(resolved))
    idx = [i for i, ok in zip(idx, resolved) if ok]
    logs = [(s, l) for (s, l, _), ok in zip(raw, resolved) if ok]
    cosines = [abs(c) for (_, _, c), ok in zip(raw, resolved) if ok]
    times = [float(trajectory.t[i]) for i in idx]
    want = 1.0 if mode == TI else -1.0
    signs = np.array([s for s, _ in logs])
    strict = signs == want
    # largest trailing window on which the strict sign holds
    k = len(strict)
    while k > 0 and strict[k - 1]:
        k -= 1
    end = times[-1] if times else 0.0
    window_start = times[k] if k < len(times) else None
    details["sign_everywhere"] = bool(strict.all()) if len(strict) else False
    details["sign_window"] = [window_start, end] if window_start is not None else None
    if mode == TI:
        verdicts["sign"] = PASS if window_start is not None and window_start < end else FAIL
    else:
        verdicts["sign"] = PASS if details["sign_everywhere"] else FAIL
        details["sign_weak"] = bool(np.all(signs <= 0))

    # (d) e^{g} <psi, y> nondecreasing
    weighted = []
    mono = None
    if idx:
        g = growth_exponent_integral(trajectory, system)
        wl = [(s, l + g(t)) for t, (s, l) in zip(times, logs)]
        weighted = [(t, _value(s, l)) for t, (s, l) in zip(times, wl)]
        # in one dimension the unit direction is exactly +-1 and needs no allowance
        scalar = len(system.y0) == 1
        tols = [options.slack + (0.0 if scalar else options.direction_tol / max(c, options.resolution))
                for c in cosines]
        mono = all(_step_ok(s1, l1, s2, l2, tol)
                   for (s1, l1), (s2, l2), tol in zip(wl, wl[1:], tols[1:]))
    verdicts["weighted_monotone"] = bool(mono)

    norms = costate.norms()
    details["min_psi_norm"] = float(norms.min()) if len(norms) else None
    return PMPReport(float(gap), tail, sign_inner, weighted, verdicts, mode, details)
