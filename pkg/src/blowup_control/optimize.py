"""Search for extremal blowup times: enumeration oracle and costate-direction sweep."""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import (
    FAIL,
    PASS,
    BlowupControlError,
    ControlKind,
    ControlLaw,
    ControlSystem,
    PMPReport,
    PreconditionError,
)
from .dynamics import LEVELS, IntegrateOptions, NoBlowup, _march, _start, blowup_time, richardson
from .growth import audit
from .pmp import TI, TS, certify, shoot

DEFAULT_BUDGET = 3**8
MODE_ASSUMPTIONS = {TI: ("S1", "S2", "S3", "S4", "S5"), TS: ("S1", "S2", "S3", "S4", "S5'")}


class BudgetExceeded(BlowupControlError):
    pass


class NotWellPosed(BlowupControlError):
    pass


class AllDegenerate(BlowupControlError):
    pass


class ConsistencyFailure(BlowupControlError):
    def __init__(self, message: str, brute: "BruteForceResult", sweep: "SweepEntry", slack: float):
        super().__init__(message)
        self.brute, self.sweep, self.slack = brute, sweep, slack


def _check_mode(mode: str) -> None:
    if mode not in (TI, TS):
        raise PreconditionError(f"mode must be TI or TS, got {mode!r}")


def _better(mode: str, a: float, b: float) -> bool:
    return a < b if mode == TI else a > b


# ---------------------------------------------------------------------------
# enumeration over piecewise-constant laws


@dataclass
class BruteForceResult:
    T: float
    law: ControlLaw
    assignment: tuple
    window: float
    k: int
    evaluated: int
    discarded: int
    mode: str

    def to_json(self) -> dict:
        return {"law": self.law.to_json(), "T_hat": self.T, "assignment": [list(map(float, v)) for v in self.assignment],
                "window": self.window, "k": self.k, "evaluated": self.evaluated, "mode": self.mode}


def _law_from(assignment: Sequence, grid: np.ndarray) -> ControlLaw:
    bps, vals = [], []
    for t, v in zip(grid, assignment):
        if vals and np.array_equal(vals[-1], v):
            continue
        bps.append(float(t))
        vals.append(np.asarray(v, dtype=float))
    return ControlLaw.piecewise(bps, vals)


def _check_values(system: ControlSystem, values) -> list:
    vals = [np.atleast_1d(np.asarray(v, dtype=float)) for v in values]
    if not vals:
        raise PreconditionError("value set is empty")
    ctl = system.controls
    for v in vals:
        if v.shape != (ctl.m,):
            raise PreconditionError(f"control value {v} does not have dimension {ctl.m}")
        if ctl.kind is ControlKind.BALL and np.linalg.norm(v) > ctl.radius * (1 + 1e-12):
            raise PreconditionError(f"control value {v} lies outside the ball of radius {ctl.radius}")
        if ctl.kind is ControlKind.FINITE and not any(np.array_equal(v, w) for w in ctl.values):
            raise PreconditionError(f"control value {v} is not in the finite control set")
    return vals


def _finish(system, t, z, chart, u, opts, levels_done: dict):
    """Continue under constant u until every eps level is reached or t_max."""
    remaining = [lv for lv in LEVELS if lv not in levels_done]
    if not remaining:
        return dict(levels_done)
    run = _march(system, t, z, chart, opts.t_max, lambda tt, p: u, opts, levels=remaining)
    out = dict(levels_done)
    out.update(run.level_times)
    return out


def _evaluate_law(system: ControlSystem, assignment: Sequence, grid: np.ndarray, opts: IntegrateOptions):
    """Blowup time of one piecewise-constant assignment (None when no blowup by t_max)."""
    z, chart = _start(system, system.y0, opts)
    t = 0.0
    k = len(assignment)
    for j, u in enumerate(assignment):
        t_next = grid[j + 1] if j + 1 < k else opts.t_max
        run = _march(system, t, z, chart, t_next, lambda tt, p, u=u: u, opts)
        if 1.0 in run.level_times or j + 1 == k:
            lt = _finish(system, run.t[-1], run.z[-1], run.chart, u, opts, run.level_times)
            return richardson(lt, opts.rel_tol)[0] if len(lt) == len(LEVELS) else None
        t, z, chart = t_next, run.z[-1], run.chart
    return None


def adaptive_window(system: ControlSystem, values: Sequence, opts: IntegrateOptions) -> float:
    """Longest blowup time among the constant laws (t_max if one never blows up)."""
    longest = 0.0
    for v in values:
        try:
            T, _ = blowup_time(system, ControlLaw.constant(v), opts)
        except NoBlowup:
            return opts.t_max
        longest = max(longest, T)
    return longest


def brute_force(system: ControlSystem, k: int, values: Sequence, mode: str = TI,
                opts: IntegrateOptions = IntegrateOptions(), budget: int = DEFAULT_BUDGET,
                window: Optional[float] = None) -> BruteForceResult:
    """Enumerate every assignment of ``values`` to k equal intervals.

    The intervals split [0, window], ``window`` defaulting to the longest
    constant-law blowup time; the last value is held to t_max. Branches are
    explored depth first with the state at each interval boundary reused, and
    assignments that differ only after blowup are evaluated once.
    """
    _check_mode(mode)
    if k < 1:
        raise PreconditionError("k must be at least 1")
    vals = _check_values(system, values)
    count = len(vals) ** k
    if count > budget:
        raise BudgetExceeded(f"{len(vals)}^{k} = {count} laws exceed the budget {budget}")
    opts = opts.resolve(system)
    if mode == TS:
        zeta_ok = _zeta_audit(system)
    W = float(window) if window is not None else adaptive_window(system, vals, opts)
    grid = np.linspace(0.0, W, k + 1)

    best: list = [None, None]  # (T, assignment)
    stats = {"evaluated": 0, "discarded": 0}

    def leaf(T, assignment):
        stats["evaluated"] += 1
        if T is None:
            if mode == TS:
                raise NotWellPosed(
                    f"law {[v.tolist() for v in assignment]} does not blow up by t_max={opts.t_max}"
                    + ("" if zeta_ok else "; the zeta audit also fails"))
            stats["discarded"] += 1
            return
        if best[0] is None or _better(mode, T, best[0]):
            best[0], best[1] = T, tuple(assignment)

    def dfs(j, t, z, chart, prefix):
        for u in vals:
            path = prefix + [u]
            if j + 1 == k:
                run = _march(system, t, z, chart, opts.t_max, lambda tt, p, u=u: u, opts)
                lt = run.level_times
                leaf(richardson(lt, opts.rel_tol)[0] if len(lt) == len(LEVELS) else None, path)
                continue
            run = _march(system, t, z, chart, grid[j + 1], lambda tt, p, u=u: u, opts)
            if 1.0 in run.level_times:
                lt = _finish(system, run.t[-1], run.z[-1], run.chart, u, opts, run.level_times)
                # later intervals start after blowup: hold u
                leaf(richardson(lt, opts.rel_tol)[0] if len(lt) == len(LEVELS) else None,
                     path + [u] * (k - j - 1))
                continue
            dfs(j + 1, grid[j + 1], run.z[-1], run.chart, path)

    z0, chart0 = _start(system, system.y0, opts)
    dfs(0, 0.0, z0, chart0, [])
    if best[0] is None:
        raise NoBlowup("no enumerated law blows up before t_max")
    return BruteForceResult(best[0], _law_from(best[1], grid), best[1], W, k,
                            stats["evaluated"], stats["discarded"], mode)


def _zeta_audit(system: ControlSystem) -> bool:
    rep = audit(system)
    ok = rep.status("P5") == PASS
    if not ok:
        warnings.warn("zeta audit (P5) does not pass; TS search may be ill-posed", stacklevel=3)
    return ok


# ---------------------------------------------------------------------------
# costate-direction sweep


def directions(n: int, count: int, sampler: str = "auto", seed: int = 0) -> np.ndarray:
    """Unit costate directions: {+1, -1} in 1D, a uniform circle in 2D,
    a Fibonacci sphere in 3D, seeded Gaussian samples otherwise."""
    if count < 2:
        raise PreconditionError("need at least two directions")
    if sampler == "auto":
        sampler = {1: "sign", 2: "circle", 3: "fibonacci"}.get(n, "random")
    if sampler == "sign":
        if n != 1:
            raise PreconditionError("sign sampler is one-dimensional")
        return np.array([[1.0], [-1.0]])
    if sampler == "circle":
        if n != 2:
            raise PreconditionError("circle sampler is two-dimensional")
        a = 2 * np.pi * np.arange(count) / count
        return np.column_stack([np.cos(a), np.sin(a)])
    if sampler == "fibonacci":
        if n != 3:
            raise PreconditionError("Fibonacci sampler is three-dimensional")
        i = np.arange(count) + 0.5
        z = 1 - 2 * i / count
        rho = np.sqrt(1 - z**2)
        a = np.pi * (1 + 5**0.5) * i
        return np.column_stack([rho * np.cos(a), rho * np.sin(a), z])
    if sampler == "random":
        rng = np.random.default_rng(seed)
        d = rng.normal(size=(count, n))
        return d / np.linalg.norm(d, axis=1, keepdims=True)
    raise PreconditionError(f"unknown sampler {sampler!r}")


@dataclass
class SweepEntry:
    index: int
    psi0: np.ndarray
    T_hat: Optional[float]
    err: Optional[float]
    report: Optional[PMPReport] = field(repr=False, default=None)
    degenerate: bool = False
    error: Optional[str] = None

    def to_json(self) -> dict:
        rep = self.report
        return {"psi0": self.psi0.tolist(), "T_hat": self.T_hat, "err": self.err,
                "gap": rep.hamiltonian_gap if rep else None,
                "verdicts": rep.verdicts if rep else None,
                "degenerate": self.degenerate, "error": self.error}


def _shoot_one(system, mode, i, psi0, opts) -> SweepEntry:
    try:
        traj, cp = shoot(system, psi0, opts, mode)
    except BlowupControlError as exc:
        return SweepEntry(i, psi0, None, None, error=str(exc))
    deg = bool(traj.degenerate is not None and np.all(traj.degenerate))
    if traj.blowup is None or len(traj.level_times) < len(LEVELS):
        return SweepEntry(i, psi0, None, None, degenerate=deg, error="no blowup before t_max")
    T, err = richardson(traj.level_times, opts.rel_tol)
    return SweepEntry(i, psi0, T, err, certify(traj, cp, system, mode), deg)


def sphere_sweep(system: ControlSystem, mode: str = TI, n_dirs: int = 16,
                 opts: IntegrateOptions = IntegrateOptions(), sampler: str = "auto",
                 seed: int = 0, jobs: int = 1, check_assumptions: bool = True) -> list:
    """Shoot from each costate direction, certify, and rank by blowup time.

    TI ranks ascending, TS descending; ties keep the direction order.
    Directions without blowup are listed last.
    """
    _check_mode(mode)
    if check_assumptions:
        rep = audit(system)
        bad = [a for a in MODE_ASSUMPTIONS[mode] if rep.status(a) == FAIL]
        if bad:
            warnings.warn(f"assumptions {bad} fail for mode {mode}", stacklevel=2)
    dirs = directions(system.n, n_dirs, sampler, seed)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            entries = list(pool.map(lambda a: _shoot_one(system, mode, a[0], a[1], opts), enumerate(dirs)))
    else:
        entries = [_shoot_one(system, mode, i, d, opts) for i, d in enumerate(dirs)]
    if all(e.degenerate for e in entries):
        raise AllDegenerate("every costate direction gives a degenerate maximizer")
    sign = 1.0 if mode == TI else -1.0
    return sorted(entries, key=lambda e: (e.T_hat is None, sign * (e.T_hat or 0.0), e.index))


# ---------------------------------------------------------------------------
# cross-check


@dataclass
class CrossValidation:
    brute: BruteForceResult
    sweep: SweepEntry
    slack: float
    difference: float
    consistent: bool

    def to_json(self) -> dict:
        return {"brute_force": self.brute.to_json(), "sweep": self.sweep.to_json(),
                "slack": self.slack, "difference": self.difference, "consistent": self.consistent}


def one_flip_slack(system: ControlSystem, result: BruteForceResult, values: Sequence,
                   opts: IntegrateOptions = IntegrateOptions()) -> float:
    """Largest change of the blowup time when one interval of the best law takes another value."""
    opts = opts.resolve(system)
    vals = [np.atleast_1d(np.asarray(v, dtype=float)) for v in values]
    grid = np.linspace(0.0, result.window, result.k + 1)
    slack = 0.0
    for j in range(result.k):
        for v in vals:
            if np.array_equal(v, result.assignment[j]):
                continue
            flipped = list(result.assignment)
            flipped[j] = v
            T = _evaluate_law(system, flipped, grid, opts)
            slack = max(slack, math.inf if T is None else abs(T - result.T))
    return slack


def cross_validate(system: ControlSystem, mode: str, k: int, values: Sequence, n_dirs: int,
                   opts: IntegrateOptions = IntegrateOptions(), sampler: str = "auto",
                   seed: int = 0) -> CrossValidation:
    """Compare the sweep extremal with the enumeration optimum up to one-flip slack."""
    brute = brute_force(system, k, values, mode, opts)
    ranked = sphere_sweep(system, mode, n_dirs, opts, sampler, seed, check_assumptions=False)
    top = ranked[0]
    if top.T_hat is None:
        raise ConsistencyFailure("no costate direction produced a blowup", brute, top, math.nan)
    slack = one_flip_slack(system, brute, values, opts)
    diff = top.T_hat - brute.T
    ok = diff <= slack + 1e-9 if mode == TI else -diff <= slack + 1e-9
    if not ok:
        raise ConsistencyFailure(
            f"sweep T={top.T_hat:.10g} vs brute force T={brute.T:.10g} exceeds slack {slack:.3g}",
            brute, top, slack)
    return CrossValidation(brute, top, slack, diff, True)
