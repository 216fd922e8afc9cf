"""Acceptance criteria 1-9, one printed PASS/FAIL line each.

Run under pytest (``pytest -v -s tests/test_acceptance.py``) or directly as a
script. Tolerances are fixed here and never loosened.
"""

import math
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from conftest import controlled_scalar, scalar_power  # noqa: E402

from blowup_control import (  # noqa: E402
    PASS,
    TI,
    TS,
    AdjointMatrixSpec,
    ControlGeometry,
    ControlLaw,
    audit,
    blowup_time,
    brute_force,
    certify,
    chatter_convergence,
    integrate,
    integrate_adjoint,
    make_catalog_system,
    make_system,
    power_zeta,
    run_batch,
    shoot,
    sphere_sweep,
)
from blowup_control.core import linear_growth  # noqa: E402
from blowup_control.pmp import adjoint_rhs  # noqa: E402

ZERO = ControlLaw.constant([0.0])
T_TI = math.pi / 2 - math.atan(2.0)
T_TS = 0.5 * math.log(3.0)


def criterion_1():
    cases = [(scalar_power(1.0), ZERO, 1.0), (scalar_power(2.0), ZERO, 0.5),
             (make_catalog_system("power", 2.0, 2.0, 1.0, 1, y0=[0.0],
                                  controls=ControlGeometry.finite([[1.0]], 1)),
              ControlLaw.constant([1.0]), math.pi / 2)]
    worst_err, worst_time = 0.0, 0.0
    for system, law, T in cases:
        t0 = time.perf_counter()
        T_hat, _ = blowup_time(system, law)
        worst_time = max(worst_time, time.perf_counter() - t0)
        worst_err = max(worst_err, abs(T_hat - T))
    return worst_err <= 1e-6 and worst_time < 1.0, f"max |error| {worst_err:.2e}, slowest run {worst_time:.3f} s"


def criterion_2():
    s = controlled_scalar()
    signs = [[-1.0], [0.0], [1.0]]
    ti = sphere_sweep(s, TI, 2)[0].T_hat
    ts = sphere_sweep(s, TS, 2)[0].T_hat
    bf_ti = brute_force(s, 6, signs, TI)
    bf_ts = brute_force(s, 6, signs, TS)
    laws = ([v.tolist() for v in bf_ti.law.values], [v.tolist() for v in bf_ts.law.values])
    ok = (abs(ti - T_TI) <= 1e-5 and abs(ts - T_TS) <= 1e-5 and laws == ([[1.0]], [[-1.0]]))
    return ok, (f"sweep TI {ti:.7f}, TS {ts:.7f}; brute-force laws {laws[0]} / {laws[1]}")


def criterion_3():
    s = scalar_power(1.0)
    tr = integrate(s, ZERO)
    ts = np.linspace(0.0, 0.9, 901)
    fwd = integrate_adjoint(tr, s, (0.0, [1.0]))
    err = max(abs(fwd.at(t)[0] - (1 - t) ** 2) for t in ts)
    back = integrate_adjoint(tr, s, (0.9, [0.01]), direction="backward")
    again = integrate_adjoint(tr, s, (0.0, back.at(0.0)), t_end=0.9)
    rt = max(abs(again.at(t)[0] - (1 - t) ** 2) for t in ts)
    return err <= 1e-6 and rt <= 1e-6, f"forward error {err:.2e}, round trip error {rt:.2e}"


def criterion_4():
    t0 = time.perf_counter()
    rows = [r for kind in ("power", "logpower", "exponential") for r in run_batch(kind, range(50))]
    elapsed = time.perf_counter() - t0
    passed = sum(r["pass"] for r in rows)
    worst = min(r["min_increment"] for r in rows)
    ok = passed == len(rows) == 150 and elapsed <= 60.0
    return ok, f"{passed}/{len(rows)} pass, min increment {worst:.2e}, {elapsed:.1f} s"


def criterion_5():
    s = controlled_scalar()
    tr, cp = shoot(s, [1.0], mode=TI)
    ti = certify(tr, cp, s, TI)
    norms = [v for _, v in ti.costate_tail]
    decreasing = len(norms) == 10 and all(b < a for a, b in zip(norms, norms[1:]))
    small = norms[-1] <= 1e-3 * norms[0]
    ti_sign = all(v > 0 for _, v in ti.sign_inner)
    tr_s, cp_s = shoot(s, [-1.0], mode=TS)
    ts = certify(tr_s, cp_s, s, TS)
    ts_sign = all(v < 0 for _, v in ts.sign_inner)
    weighted = ti.verdicts["weighted_monotone"] and ts.verdicts["weighted_monotone"]
    ok = decreasing and small and ti_sign and ts_sign and weighted
    return ok, (f"tail ratio {norms[-1] / norms[0]:.2e}, strictly decreasing {decreasing}, "
                f"signs TI {ti_sign} TS {ts_sign}, weighted nondecreasing {weighted}")


def criterion_6():
    s = make_catalog_system("power", 2.0, 2.0, 1.0, 1, y0=[2.0],
                            controls=ControlGeometry.finite([[1.0], [-1.0]], 1))
    res, _ = chatter_convergence(s, [1.0], [-1.0], 0.5, [0.1, 0.05, 0.025])
    errs = [abs(T - 0.5) for _, T in res]
    ok = errs[0] > errs[1] > errs[2] and errs[2] <= 1e-3
    return ok, "errors " + ", ".join(f"h={h}: {e:.2e}" for (h, _), e in zip(res, errs))


def criterion_7():
    worst = 0.0
    for p in (2.0, 3.0):
        for y0 in (0.5, 1.0, 3.0):
            T1 = blowup_time(scalar_power(y0, p), ZERO)[0]
            T2 = blowup_time(scalar_power(2 * y0, p), ZERO)[0]
            worst = max(worst, abs(T2 - 2 ** (1 - p) * T1) / T1)
    return worst <= 1e-5, f"max relative deviation {worst:.2e}"


def criterion_8():
    kinds_ok = all(audit(make_catalog_system(k, 2.0, 2.0, 1.0, 1)).status(a) == PASS
                   for k in ("power", "logpower", "exponential") for a in ("S2", "S3"))
    lin = audit(make_system(linear_growth(1.0), 1)).check("S2", "inf_t G/r -> inf").status
    s = controlled_scalar(zeta=False)
    z = power_zeta(s)
    rep = audit(s.with_zeta(z))
    val = rep.check("P5", "tail integral of 1/zeta").witness["value"]
    dev = abs(val - 2.0 / z.R0)
    ok = kinds_ok and lin != PASS and rep.status("P5") == PASS and dev <= 1e-8
    return ok, f"catalog S2/S3 {kinds_ok}, linear superlinearity {lin}, zeta tail deviation {dev:.2e}"


def criterion_9():
    # absolute agreement on moderate states; far out the fields reach 1e4 and
    # only agreement relative to the field size is meaningful in double precision
    rng = np.random.default_rng(0)
    full = AdjointMatrixSpec.autonomous_full()
    worst_abs, worst_rel = 0.0, 0.0
    for kind in ("power", "logpower", "exponential"):
        for n in (1, 2, 3):
            A = 0.5 * rng.normal(size=(n, n))
            s = make_catalog_system(kind, 2.0, 2.0, 1.0, n, A=A)
            for radius in np.concatenate([rng.uniform(0.05, 4.0, 20), rng.uniform(4.0, 12.0, 10)]):
                d = rng.normal(size=n)
                y = radius * d / np.linalg.norm(d)
                psi = rng.normal(size=n)
                a, b = adjoint_rhs(s, 0.0, y, psi), adjoint_rhs(s, 0.0, y, psi, full)
                diff = float(np.max(np.abs(a - b)))
                if radius <= 4.0:
                    worst_abs = max(worst_abs, diff)
                worst_rel = max(worst_rel, diff / max(1.0, float(np.max(np.abs(a)))))
    ok = worst_abs <= 1e-12 and worst_rel <= 1e-12
    return ok, f"max difference {worst_abs:.2e} for |y| <= 4, max scaled difference {worst_rel:.2e} for |y| <= 12"


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
            criterion_6, criterion_7, criterion_8, criterion_9]


def _report(k: int, ok: bool, detail: str) -> str:
    return f"criterion {k}: {'PASS' if ok else 'FAIL'} ({detail})"


@pytest.mark.parametrize("k", range(1, 10))
def test_criterion(k, capsys):
    ok, detail = CRITERIA[k - 1]()
    with capsys.disabled():
        print("\n" + _report(k, ok, detail))
    assert ok, detail


if __name__ == "__main__":
    results = []
    for k, fn in enumerate(CRITERIA, start=1):
        ok, detail = fn()
        results.append(ok)
        print(_report(k, ok, detail), flush=True)
    sys.exit(0 if all(results) else 1)
