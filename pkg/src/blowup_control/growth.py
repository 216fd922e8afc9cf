"""Growth analytics: comparison thresholds, the assumption audit and the
growth-exponent integral along a trajectory.

Infima and suprema over unbounded radii are taken on capped log grids
(default r_max = 1e8, 400 points). Every catalog growth is eventually
monotone in the ratios involved, and the grid routines flag the cases
where that could not be confirmed near the cap.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable, Optional

import numpy as np

from .core import (
    COMPACT,
    FAIL,
    NOT_CHECKABLE,
    OUTER,
    PASS,
    AssumptionReport,
    BlowupControlError,
    BlowupLowerBound,
    ControlKind,
    ControlSystem,
    Trajectory,
)

R_MAX = 1e8
N_R = 400


class NotSatisfiable(BlowupControlError):
    def __init__(self, message: str, failing: str, rho: float):
        super().__init__(message)
        self.failing = failing
        self.rho = rho


@dataclass(frozen=True)
class GridInfimum:
    value: float
    caveat: bool
    superlinear: bool
    witness: tuple


@dataclass(frozen=True)
class ThresholdBundle:
    rho: float
    M: float
    Omega_T: float
    omega0: float
    omega1: float
    omega_val: float
    Omega_tilde: float
    T: float = 1.0

    def conditions(self) -> dict:
        M = self.M
        return {
            "Omega_T >= M+1": self.Omega_T >= M + 1,
            "rho > 2M": self.rho > 2 * M,
            "omega0 <= 1": self.omega0 <= 1,
            "omega1 <= 1": self.omega1 <= 1,
            "omega <= 1/(4M+1)": self.omega_val <= 1.0 / (4 * M + 1),
            "Omega_tilde >= 18M": self.Omega_tilde >= 18 * M,
        }

    def to_json(self) -> dict:
        return asdict(self)


def _t_grid(system: ControlSystem, T: float, n: int = 33) -> np.ndarray:
    coeff = system.growth.coeff
    if coeff.is_constant:
        return np.array([0.0])
    knots = [t for t, _ in coeff.table if 0 <= t <= T]
    return np.unique(np.concatenate([np.linspace(0.0, T, n), knots]))


def _r_grid(rho: float, r_max: float, grid: int) -> np.ndarray:
    hi = max(r_max, 10.0 * rho)
    return np.geomspace(rho, hi, grid)


def omega_T(system: ControlSystem, T: float, rho: float, r_max: float = R_MAX,
            grid: int = N_R) -> GridInfimum:
    """Lower estimate of inf over [0,T] x [rho, inf) of G(t,r)/r."""
    if not rho > 0:
        raise ValueError("rho must be positive")
    ts = _t_grid(system, T)
    rs = _r_grid(rho, r_max, grid)
    tt, rr = np.meshgrid(ts, rs, indexing="ij")
    with np.errstate(over="ignore", invalid="ignore"):
        ratio = np.asarray(system.growth.rate_at(tt, rr), dtype=float) * np.ones_like(rr)
    ratio = np.where(np.isnan(ratio), np.inf, ratio)
    i, j = np.unravel_index(np.argmin(ratio), ratio.shape)
    along_r = ratio.min(axis=0)
    tail = along_r[-grid // 10:]
    with np.errstate(invalid="ignore"):
        caveat = bool(np.any(np.diff(tail) < -1e-12 * np.abs(tail[:-1])))
    superlinear = bool(along_r[-1] > along_r[0] * (1 + 1e-9))
    return GridInfimum(float(ratio[i, j]), caveat, superlinear, (float(ts[i]), float(rs[j])))


def omega_tilde(system: ControlSystem, T: float, rho: float, r_max: float = R_MAX,
                grid: int = N_R) -> GridInfimum:
    """inf over t in [0,T], r >= rho of G_r - G phi''(Phi(r)) / phi'(Phi(r))^2.

    The infimum is taken jointly in (t, r).
    """
    comp = system.compactifier
    ts = _t_grid(system, T)
    rs = _r_grid(rho, r_max, grid)
    L = np.log(rs)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        # far radii can underflow s to 0 in fast charts; the limit is +inf
        gap = comp.one_minus_curvature(comp.Phi(rs))
    tt, LL = np.meshgrid(ts, L, indexing="ij")
    with np.errstate(over="ignore", invalid="ignore"):
        rate = np.asarray(system.growth.rate_at_log(tt, LL), dtype=float) * np.ones_like(LL)
        exc = np.asarray(system.growth.excess_at_log(tt, LL), dtype=float) * np.ones_like(LL)
        val = rate * gap[None, :] + exc
    val = np.where(np.isnan(val), np.inf, val)
    i, j = np.unravel_index(np.argmin(val), val.shape)
    along_r = val.min(axis=0)
    tail = along_r[-grid // 10:]
    with np.errstate(invalid="ignore"):
        caveat = bool(np.any(np.diff(tail) < -1e-12 * np.abs(tail[:-1])))
    return GridInfimum(float(val[i, j]), caveat, bool(along_r[-1] > along_r[0]), (float(ts[i]), float(rs[j])))


def _below(s: float, n: int = 80) -> np.ndarray:
    return s * np.logspace(-8, 0, n)


def omega0(system: ControlSystem, s: float) -> float:
    """sup over (0, s) of 1/phi."""
    return float(np.max(np.exp(-system.compactifier.log_phi(_below(s)))))


def omega1(system: ControlSystem, s: float) -> float:
    """sup over (0, s) of phi/|phi'|."""
    return float(np.max(np.abs(system.compactifier.phi_over_d1(_below(s)))))


def evaluate_bundle(system: ControlSystem, T: float, M: float, rho: float,
                    r_max: float = R_MAX, grid: int = N_R) -> ThresholdBundle:
    comp = system.compactifier
    s = float(comp.Phi(rho))
    if comp.omega is None:
        raise NotSatisfiable("compactifier carries no omega bound", "omega", rho)
    return ThresholdBundle(
        rho=float(rho),
        M=float(M),
        Omega_T=omega_T(system, T, rho, r_max, grid).value,
        omega0=omega0(system, s),
        omega1=omega1(system, s),
        omega_val=float(comp.omega(s)),
        Omega_tilde=omega_tilde(system, T, rho, r_max, grid).value,
        T=float(T),
    )


def rho_threshold(system: ControlSystem, T: float, M: float, rho_max: float = 1e12,
                  r_max: float = R_MAX, grid: int = N_R, factor: float = 1.25,
                  refine: int = 50) -> ThresholdBundle:
    """Smallest rho (geometric scan, then bisection) meeting all six
    comparison conditions for drift/control bound M on [0, T]."""
    comp = system.compactifier
    lo = max(comp.r_min * (1 + 1e-9), 2 * M * (1 + 1e-12), 1e-12)

    def passes(rho):
        b = evaluate_bundle(system, T, M, rho, r_max, grid)
        return b, all(b.conditions().values())

    prev, rho = None, lo
    while rho <= rho_max:
        b, ok = passes(rho)
        if ok:
            break
        prev, rho = rho, rho * factor
    else:
        b, _ = passes(rho_max)
        failing = next(k for k, v in b.conditions().items() if not v)
        raise NotSatisfiable(f"no rho <= {rho_max:g} satisfies the thresholds; {failing} fails",
                             failing, rho_max)
    if prev is None:
        return b
    hi, best = rho, b
    for _ in range(refine):
        mid = math.sqrt(prev * hi)
        bm, ok = passes(mid)
        if ok:
            hi, best = mid, bm
        else:
            prev = mid
        if hi / prev - 1 < 1e-10:
            break
    return best


# ---------------------------------------------------------------------------
# quadrature


def adaptive_simpson(f: Callable, a: float, b: float, tol: float = 1e-10,
                     max_depth: int = 50, blowup: float = 1e6) -> tuple:
    """Adaptive Simpson rule. Returns (value, converged).

    ``converged`` is False when the depth budget runs out or the running
    total exceeds ``blowup`` (treated as divergence).
    """
    state = {"ok": True, "total": 0.0}

    def simpson(fa, fm, fb, a, b):
        return (b - a) / 6.0 * (fa + 4 * fm + fb)

    def rec(a, b, fa, fm, fb, whole, tol, depth):
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = f(lm), f(rm)
        left = simpson(fa, flm, fm, a, m)
        right = simpson(fm, frm, fb, m, b)
        delta = left + right - whole
        if not np.isfinite(delta) or abs(left + right) > blowup:
            state["ok"] = False
            return left + right
        if depth <= 0:
            state["ok"] = abs(delta) <= 15 * tol and state["ok"]
            return left + right + delta / 15.0
        if abs(delta) <= 15 * tol:
            return left + right + delta / 15.0
        return (rec(a, m, fa, flm, fm, left, tol / 2, depth - 1)
                + rec(m, b, fm, frm, fb, right, tol / 2, depth - 1))

    fa, fb, fm = f(a), f(b), f(0.5 * (a + b))
    val = rec(a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, max_depth)
    if not np.isfinite(val) or abs(val) > blowup:
        return float(val), False
    return float(val), state["ok"]


def tail_integral(zeta: BlowupLowerBound, R: Optional[float] = None, tol: float = 1e-10) -> tuple:
    """int_R^inf dr / zeta(r) via s = 1/r on [0, 1/R]; returns (value, converged)."""
    R = zeta.R0 if R is None else R

    def f(s):
        s = max(s, 1e-150)
        with np.errstate(over="ignore", divide="ignore"):
            z = float(zeta.zeta(1.0 / s))
        if z == math.inf:
            return 0.0
        return 1.0 / (s * s * z) if z > 0 else math.inf

    return adaptive_simpson(f, 0.0, 1.0 / R, tol=tol)


def blowup_time_lower_bound(system: ControlSystem, r0: float, M: float, t: float = 0.0) -> float:
    """int_{r0}^inf dr / (G + M r + M), a lower bound on the time to blowup from |y| = r0
    when ||A|| and |b| are bounded by M."""
    gm = system.growth

    L0 = math.log(r0)

    def f(u):
        # r = r0 e^u keeps the integrand well scaled on [0, inf)
        L = L0 + u
        with np.errstate(over="ignore"):
            rate = float(gm.rate_at_log(t, L))
        return 1.0 / (rate + M + M * math.exp(-L)) if math.isfinite(rate) else 0.0

    from scipy.integrate import quad

    val, _ = quad(f, 0.0, np.inf, limit=200, epsabs=1e-13, epsrel=1e-10)
    return float(val)


def power_zeta(system: ControlSystem, coeff: float = 0.5, T: float = 1.0) -> BlowupLowerBound:
    """zeta(r) = coeff * g_lower * h(r) with R0 from the drift and control bounds.

    For p = 2 power growth with coeff 1/2 this is r^2/2 with
    R0 = max(2 ||A|| + 2 sup|b|, 2).
    """
    g_lo = system.growth.coeff.lower()
    h = system.growth
    a = system.drift.norm_bound(0.0, T)
    m = system.controls.bound(0.0, T)
    if h.kind.value == "power" and h.p == 2 and coeff == 0.5:
        R0 = max(2 * a + 2 * m, 2.0)
    else:
        # smallest grid radius from which (1-coeff) g_lo h(r) >= a r + m onward
        rs = np.geomspace(1.0, R_MAX, 2000)
        with np.errstate(over="ignore", invalid="ignore"):
            slack = (1 - coeff) * np.asarray(h.G(0.0, rs), dtype=float) / h.coeff(0.0) * g_lo - a * rs - m
        ok = np.isfinite(slack) & (slack >= 0) | np.isinf(slack)
        bad = np.flatnonzero(~ok)
        if bad.size and bad[-1] == rs.size - 1:
            raise NotSatisfiable("growth does not dominate the drift bound", "P5", R_MAX)
        R0 = float(rs[bad[-1] + 1]) if bad.size else 1.0
    shape = lambda r: np.asarray(h.G(0.0, r), dtype=float) / h.coeff(0.0)
    return BlowupLowerBound(zeta=lambda r: coeff * g_lo * shape(r), R0=float(R0),
                            spec={"coeff": coeff, "R0": float(R0)})


# ---------------------------------------------------------------------------
# audit


def _t_samples(T: float) -> np.ndarray:
    return np.linspace(0.0, T, 17)


def audit(system: ControlSystem, T: float = 1.0) -> AssumptionReport:
    """Sample-based check of the standing assumptions.

    Each record carries the sub-condition it tests and a witness (the worst
    sample or the quadrature value). Failures are entries, never raised.
    """
    rep = AssumptionReport()
    gm = system.growth
    ts = _t_samples(T)
    ts_pos = ts[ts > 0] if T > 0 else ts

    for pid in ("P1", "S1"):
        rep.add(pid, "U separable metric space", PASS, {"value": "U is a subset of R^m"})

    # G(t, 0) = 0
    g0 = np.array([float(np.asarray(gm.G(t, 0.0))) for t in ts])
    k = int(np.argmax(np.abs(g0)))
    for pid in ("P2", "S2"):
        rep.add(pid, "G(t,0)=0", bool(np.all(g0 == 0)), {"t": ts[k], "r": 0.0, "value": g0[k]})

    # bounded G_r on [0, Mb]^2
    Mb = max(10.0, T)
    tt, rr = np.meshgrid(np.linspace(0, Mb, 21), np.linspace(0, Mb, 201), indexing="ij")
    with np.errstate(over="ignore", invalid="ignore"):
        gr = np.abs(np.asarray(gm.G_r(tt, rr), dtype=float) * np.ones_like(rr))
    i, j = np.unravel_index(np.nanargmax(gr), gr.shape)
    for pid in ("P2", "S2"):
        rep.add(pid, "G_r bounded on [0,M]^2", bool(np.all(np.isfinite(gr))),
                {"t": tt[i, j], "r": rr[i, j], "value": gr[i, j], "M": Mb})

    # superlinearity along r = 10^1 .. 10^8
    rs = np.logspace(1, 8, 8)
    with np.errstate(over="ignore", invalid="ignore"):
        ratio = np.array([min(float(gm.rate_at(t, r)) for t in ts_pos) for r in rs])
    fin = np.isfinite(ratio)
    seq = ratio[fin]
    ok = seq.size >= 3 and bool(np.all(np.diff(seq) > 0)) and seq[-1] >= 10 * seq[0]
    ok = ok or (seq.size >= 1 and np.any(np.isposinf(ratio)) and bool(np.all(np.diff(seq) > 0)))
    rep.add("S2", "inf_t G/r -> inf", ok,
            {"t": None, "r": float(rs[fin][-1]) if fin.any() else None,
             "value": [None if not np.isfinite(v) else float(v) for v in ratio]})

    # liminf r G_r / G > 0
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        el = np.array([min(1.0 + float(gm.excess_at(t, r)) / float(gm.rate_at(t, r)) for t in ts_pos)
                       for r in rs])
    tail = el[np.isfinite(el)][-4:]
    rep.add("S2", "liminf r G_r/G > 0", bool(tail.size > 0 and np.min(tail) > 1e-3),
            {"r": float(rs[-1]), "value": float(np.min(tail)) if tail.size else None})

    _audit_chart(rep, system, ts)

    # bounded drift and controls
    a = system.drift.norm_bound(0.0, T)
    m = system.controls.bound(0.0, T)
    for pid in ("P3", "S4"):
        rep.add(pid, "sup ||A|| finite", bool(np.isfinite(a)), {"value": a})
    rep.add("S4", "sup |b| finite", bool(np.isfinite(m)), {"value": m})

    ctl = system.controls
    if ctl.kind is ControlKind.BALL:
        rep.add("P4", "b(t,U) convex compact", PASS, {"value": "linear image of a ball"})
    elif ctl.kind is ControlKind.FINITE:
        images = {tuple(np.round(ctl.B(0.0) @ v, 14)) for v in ctl.values}
        rep.add("P4", "b(t,U) convex compact", len(images) == 1,
                {"value": f"finite set with {len(images)} distinct images"})
    else:
        rep.add("P4", "b(t,U) convex compact", NOT_CHECKABLE, {"value": "declared by caller"})

    _audit_zeta(rep, system, T, a, m)
    _audit_control_interior(rep, system, ts)
    return rep


def _audit_chart(rep: AssumptionReport, system: ControlSystem, ts: np.ndarray) -> None:
    comp, gm = system.compactifier, system.growth
    s0 = comp.s0
    ss = s0 * np.logspace(-6, 0, 200) * (1 - 1e-9)
    with np.errstate(over="ignore", invalid="ignore"):
        logphi = comp.log_phi(ss)
        q = comp.phi_over_d1(ss)
    ok = bool(np.all(logphi > math.log(2.0)) and np.all(q < 0))
    k = int(np.argmin(logphi))
    rep.add("S3", "phi > 2 and phi' < 0 on (0,s0)", ok, {"s": float(ss[k]), "value": float(np.exp(logphi[k]))})

    seq = s0 * 2.0 ** -np.arange(1, 41)
    with np.errstate(over="ignore", invalid="ignore"):
        lp = comp.log_phi(seq)
        d1 = np.abs(np.asarray(comp.phi_d1(seq), dtype=float))
        q = np.abs(comp.phi_over_d1(seq))
    d1f = d1[np.isfinite(d1)]
    with np.errstate(over="ignore", invalid="ignore"):
        vals = np.exp(lp)
        inc = np.diff(vals)[-10:]
    # a bounded increasing sequence has increments shrinking to 0; these must not
    unbounded = bool(np.any(np.isinf(vals))) or bool(np.min(inc) >= 0.5 * inc[0])
    lim_ok = (bool(np.all(np.diff(lp) > 0)) and unbounded
              and bool(np.all(np.diff(d1f) > 0)) and (d1f.size < d1.size or d1f[-1] > 1e6)
              and bool(np.all(np.diff(q) < 0)) and q[-1] < 1e-3 * q[0])
    rep.add("S3", "phi->inf, phi'->-inf, phi/phi'->0", lim_ok,
            {"s": float(seq[-1]), "value": {"log_phi": float(lp[-1]), "phi_over_d1": float(q[-1])}})

    if comp.omega is None:
        rep.add("S3", "curvature bound with omega", NOT_CHECKABLE, {"value": "no omega supplied"})
        return
    sg = s0 * np.logspace(-6, 0, 60) * (1 - 1e-9)
    worst, wit = -np.inf, {}
    om = np.asarray(comp.omega(sg), dtype=float)
    lhs = 1.0 + np.abs(comp.d1_over_phi2(sg)) + np.abs(comp.curvature(sg))
    L = comp.log_phi(sg)
    gap = comp.one_minus_curvature(sg)
    for t in ts:
        with np.errstate(over="ignore", invalid="ignore"):
            br = np.asarray(gm.rate_at_log(t, L), dtype=float) * gap + np.asarray(gm.excess_at_log(t, L), dtype=float)
            excess_ratio = np.where(np.isfinite(om * br), lhs - om * br, np.inf) / lhs
        k = int(np.argmax(excess_ratio))
        if excess_ratio[k] > worst:
            worst, wit = float(excess_ratio[k]), {"t": float(t), "s": float(sg[k]), "value": float(excess_ratio[k])}
    rep.add("S3", "curvature bound with omega", worst <= 1e-9, wit)
    om_small = float(comp.omega(s0 * 1e-6))
    rep.add("S3", "omega(s) -> 0", om_small < 1e-3 * max(float(comp.omega(s0 * (1 - 1e-9))), 1e-300) or om_small < 1e-6,
            {"s": s0 * 1e-6, "value": om_small})


def _audit_zeta(rep, system, T, a, m) -> None:
    z = system.zeta
    if z is None:
        rep.add("P5", "zeta domination", FAIL, {"value": "no zeta supplied"})
        rep.add("P5", "tail integral of 1/zeta", FAIL, {"value": "no zeta supplied"})
        return
    rs = np.geomspace(z.R0, R_MAX, 200)
    worst, wit = np.inf, {}
    for t in _t_samples(T):
        with np.errstate(over="ignore", invalid="ignore"):
            lhs = np.asarray(system.growth.G(t, rs), dtype=float) - a * rs - m
            zr = np.asarray(z.zeta(rs), dtype=float)
            marg = np.where(np.isinf(lhs) & (lhs > 0), np.inf, lhs - zr)
        k = int(np.nanargmin(marg))
        if marg[k] < worst:
            worst, wit = float(marg[k]), {"t": float(t), "r": float(rs[k]), "value": float(marg[k])}
    zmin = float(np.min(np.asarray(z.zeta(rs), dtype=float)))
    rep.add("P5", "zeta domination", worst >= -1e-12 * max(1.0, abs(worst)) and zmin >= 0, wit)
    val, ok = tail_integral(z)
    rep.add("P5", "tail integral of 1/zeta", ok, {"r": z.R0, "value": val})


def _audit_control_interior(rep, system, ts) -> None:
    ctl = system.controls
    n = system.n
    if ctl.kind is ControlKind.BALL:
        ranks = [np.linalg.matrix_rank(ctl.B(t)) for t in ts]
        full = ctl.radius > 0 and min(ranks) == n
        wit = {"t": float(ts[int(np.argmin(ranks))]), "value": int(min(ranks))}
        rep.add("S5", "convex, 0 interior, unique normals", full, wit)
        rep.add("S5'", "0 interior to b(t,U)", full, wit)
        rep.add("S5''", "0 in closure of b(t,U)", PASS, {"value": "ball contains 0"})
    elif ctl.kind is ControlKind.FINITE:
        imgs = [ctl.B(t) @ v for t in ts for v in ctl.values]
        rep.add("S5", "convex, 0 interior, unique normals", FAIL, {"value": "finite set has empty interior"})
        rep.add("S5'", "0 interior to b(t,U)", FAIL, {"value": "finite set has empty interior"})
        has0 = all(any(np.allclose(ctl.B(t) @ v, 0) for v in ctl.values) for t in ts)
        rep.add("S5''", "0 in closure of b(t,U)", has0, {"value": float(min(np.linalg.norm(i) for i in imgs))})
    else:
        rng = np.random.default_rng(0)
        dirs = rng.normal(size=(64, n))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        sup = min(float(ctl.support(t, d)[1]) for t in ts for d in dirs)
        rep.add("S5", "convex, 0 interior, unique normals", NOT_CHECKABLE, {"value": "custom geometry"})
        rep.add("S5'", "0 interior to b(t,U)", sup > 0, {"value": sup})
        rep.add("S5''", "0 in closure of b(t,U)", sup >= 0, {"value": sup})


# ---------------------------------------------------------------------------
# growth exponent integral along a trajectory


_GL_X, _GL_W = np.polynomial.legendre.leggauss(6)


def _excess_from_state(system: ControlSystem, t: float, chart: str, v: np.ndarray) -> float:
    nrm = float(np.linalg.norm(v))
    if chart == OUTER:
        if nrm == 0:
            return 0.0
        return float(system.growth.excess_at(t, nrm))
    return float(system.growth.excess_at_log(t, float(system.compactifier.log_phi(nrm))))


def _interval(trajectory: Trajectory, system: ControlSystem, i: int, piece: Callable) -> float:
    """Increment of the exponent between samples i and i+1.

    Compact-chart steps are integrated in the solver's rescaled time, which
    stays well conditioned when t itself no longer resolves the approach to
    blowup.
    """
    from .dynamics import compact_time_scale

    j = i + 1
    taus, ids = trajectory.taus, trajectory.seg_ids
    if trajectory.charts[j] != COMPACT or not taus[j] > 0:
        return piece(float(trajectory.t[i]), float(trajectory.t[j]))
    seg = trajectory.segments[ids[j]][3]
    ta = float(taus[i]) if ids[i] == ids[j] else seg.tau0
    tb = float(taus[j])
    comp, gm = system.compactifier, system.growth
    mid, half = 0.5 * (ta + tb), 0.5 * (tb - ta)
    total = 0.0
    for x, w in zip(_GL_X, _GL_W):
        t, v, _ = seg.tx(mid + half * x)
        sn = float(np.linalg.norm(v))
        L = float(comp.log_phi(sn))
        scale = compact_time_scale(sn, float(comp.phi_over_d1(sn)), float(gm.rate_at_log(t, L)))
        total += w * scale * float(gm.excess_at_log(t, L))
    return half * total


def growth_exponent_integral(trajectory: Trajectory, system: ControlSystem) -> Callable:
    """t -> int_0^t (|y| G_r - G)/|y| ds along the trajectory.

    Uses 6-point Gauss-Legendre per solver step on the dense output; falls
    back to the trapezoid rule on the samples when no dense output exists.
    """
    tk = np.asarray(trajectory.t, dtype=float)
    dense = bool(trajectory.segments)
    if trajectory.exponent is not None and not dense:
        stored = np.asarray(trajectory.exponent, dtype=float)
        return lambda t: float(np.interp(t, tk, stored))

    def f(t):
        chart, v = trajectory.chart_state_at(t)
        return _excess_from_state(system, t, chart, v)

    def piece(a, b):
        if b <= a:
            return 0.0
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        return half * sum(w * f(mid + half * x) for x, w in zip(_GL_X, _GL_W))

    taus = trajectory.taus
    if dense and taus is not None:
        incr = np.array([_interval(trajectory, system, i, piece) for i in range(len(tk) - 1)])
    elif dense:
        incr = np.array([piece(a, b) for a, b in zip(tk[:-1], tk[1:])])
    else:
        vals = np.array([_excess_from_state(system, t, c, v)
                         for t, c, v in zip(tk, trajectory.charts, trajectory.states)])
        incr = 0.5 * (vals[1:] + vals[:-1]) * np.diff(tk)
    cum = np.concatenate([[0.0], np.cumsum(incr)])

    def g(t):
        if t < tk[0] - 1e-14 or t > tk[-1] + 1e-14:
            raise ValueError(f"t={t} outside trajectory range [{tk[0]}, {tk[-1]}]")
        i = int(np.clip(np.searchsorted(tk, t, side="right") - 1, 0, len(tk) - 1))
        if t <= tk[i] or i == len(tk) - 1:
            return float(cum[i])
        if dense:
            return float(cum[i] + piece(tk[i], t))
        frac = (t - tk[i]) / (tk[i + 1] - tk[i])
        return float(cum[i] + frac * incr[i])

    g.knots = tk
    g.values = cum
    return g
