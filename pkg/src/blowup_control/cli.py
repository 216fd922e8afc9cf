"""Command-line entry point: simulate, optimize, audit, certify, monotone.

Exit codes: 0 success, 2 invalid config, 3 numerical failure, 4 ill-posed
maximal-time problem.
"""

from __future__ import annotations

import argparse
import datetime
import json
import os
import shutil
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from . import config as cfg
from .core import PASS, BlowupControlError, ConfigError, ControlKind, CostatePath, Trajectory
from .dynamics import NoBlowup, blowup_time, integrate
from .growth import audit, growth_exponent_integral
from .monotone import certify_monotone, random_instance
from .optimize import NotWellPosed, brute_force, cross_validate, sphere_sweep
from .pmp import TI, TS, certify, shoot

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICS, EXIT_ILL_POSED = 0, 2, 3, 4
OUT_ENV = "BLOWUP_CONTROL_OUT"


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, (tuple, set)):
        return list(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _dump(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _metadata() -> dict:
    return {"created": datetime.datetime.now(datetime.timezone.utc).isoformat(), "version": __version__}


def _out_dir(args) -> Path:
    out = args.out or os.environ.get(OUT_ENV) or f"runs/{args.command}"
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load(args) -> cfg.RunConfig:
    if not args.config:
        raise ConfigError("--config is required")
    run = cfg.load(args.config)
    changes = {}
    if args.tmax is not None:
        changes["t_max"] = args.tmax
    if args.eps_blow is not None:
        changes["eps_blow"] = args.eps_blow
    if changes:
        run.options = replace(run.options, **changes)
        try:
            run.options.resolve(run.system)
        except BlowupControlError as exc:
            raise ConfigError(str(exc)) from exc
    return run


def _copy_config(args, out: Path) -> None:
    src = Path(args.config)
    if src.resolve() != (out / "config.json").resolve():
        shutil.copyfile(src, out / "config.json")


def _mode(args) -> str:
    return TI if args.mode.lower() == "ti" else TS


# ---------------------------------------------------------------------------
# commands


def cmd_simulate(args) -> int:
    run = _load(args)
    out = _out_dir(args)
    _copy_config(args, out)
    traj = integrate(run.system, run.law, run.options)
    summary = traj.summary()
    try:
        T, err = blowup_time(run.system, run.law, run.options, trajectory=traj)
        summary.update(T_hat=T, err=err, blowup={"T_hat": T, "err": err})
        print(f"T_hat = {T:.10f} +/- {err:.2e}")
    except NoBlowup:
        summary.update(T_hat=None, err=None, blowup=None)
        print(f"no blowup before t_max = {run.options.t_max:g}")
    summary["law"] = run.law.to_json()
    summary["metadata"] = _metadata()
    _dump(summary, out / "summary.json")
    traj.to_csv(out / "trajectory.csv")
    return EXIT_OK


def _default_values(system) -> list:
    ctl = system.controls
    if ctl.kind is ControlKind.FINITE:
        return [v.tolist() for v in ctl.values]
    if ctl.kind is ControlKind.BALL:
        vals = [np.zeros(ctl.m)]
        for i in range(ctl.m):
            e = np.zeros(ctl.m)
            e[i] = ctl.radius
            vals += [e, -e]
        return [v.tolist() for v in vals]
    raise ConfigError("brute force needs optimize.values for custom control sets")


def _table(rows: list, header: list) -> str:
    cells = [[str(c) for c in header]] + [[str(c) for c in r] for r in rows]
    widths = [max(len(r[k]) for r in cells) for k in range(len(header))]
    return "\n".join("  ".join(c.ljust(w) for c, w in zip(r, widths)) for r in cells)


def _fmt(x) -> str:
    return "-" if x is None else f"{x:.10g}"


def cmd_optimize(args) -> int:
    run = _load(args)
    mode = _mode(args)
    system, opts = run.system, run.options
    if mode == TS and audit(system).status("P5") != PASS and not args.force:
        print("maximal-time search needs the zeta audit (P5) to pass; rerun with --force to override",
              file=sys.stderr)
        return EXIT_ILL_POSED
    out = _out_dir(args)
    _copy_config(args, out)
    o = run.optimize
    n_dirs = args.dirs or o.get("dirs", 16)
    k = int(o.get("k", 6))
    values = o.get("values") or _default_values(system)
    sampler = o.get("sampler", "auto")
    summary = {"mode": mode, "method": args.method, "metadata": _metadata()}
    lines = []

    if args.method == "brute":
        res = brute_force(system, k, values, mode, opts, budget=int(o.get("budget", 3**8)),
                          window=o.get("window"))
        lines.append({"law": res.law.to_json(), "T_hat": res.T, "err": None, "gap": None, "verdicts": None})
        summary["top"] = res.to_json()
        print(_table([[res.T, json.dumps(res.law.to_json()["values"])]], ["T_hat", "law values"]))
    elif args.method == "sweep":
        ranked = sphere_sweep(system, mode, n_dirs, opts, sampler, run.seed, args.jobs)
        lines = [e.to_json() for e in ranked]
        top = ranked[0]
        summary["top"] = top.to_json()
        if top.report is not None:
            _dump(top.report.to_json(), out / "report.json")
            traj, cp = shoot(system, top.psi0, opts, mode)
            _write_extremal(system, traj, cp, out)
        rows = [[e.index, np.round(e.psi0, 6).tolist(), _fmt(e.T_hat),
                 _fmt(e.report.hamiltonian_gap if e.report else None),
                 ",".join(f"{key}={val}" for key, val in (e.report.verdicts.items() if e.report else []))]
                for e in ranked]
        print(_table(rows, ["dir", "psi0", "T_hat", "gap", "verdicts"]))
    else:
        cv = cross_validate(system, mode, k, values, n_dirs, opts, sampler, run.seed)
        lines = [cv.sweep.to_json(), {"law": cv.brute.law.to_json(), "T_hat": cv.brute.T, "err": None,
                                      "gap": None, "verdicts": None}]
        summary["cross"] = cv.to_json()
        if cv.sweep.report is not None:
            _dump(cv.sweep.report.to_json(), out / "report.json")
        print(_table([["sweep", _fmt(cv.sweep.T_hat)], ["brute", _fmt(cv.brute.T)],
                      ["slack", _fmt(cv.slack)]], ["source", "T_hat"]))
    with open(out / "results.jsonl", "w") as fh:
        for line in lines:
            fh.write(json.dumps(line, sort_keys=True, default=_jsonable) + "\n")
    _dump(summary, out / "summary.json")
    return EXIT_OK


def cmd_audit(args) -> int:
    run = _load(args)
    out = _out_dir(args)
    _copy_config(args, out)
    rep = audit(run.system)
    _dump(rep.to_json(), out / "report.json")
    rows = [[r.id, r.check, r.status] for r in rep.records]
    print(_table(rows, ["id", "check", "status"]))
    return EXIT_OK


def _write_extremal(system, traj, cp, out: Path) -> None:
    g = growth_exponent_integral(traj, system)
    traj.exponent = np.array([g(float(t)) for t in traj.t])
    traj.to_csv(out / "trajectory.csv")
    cp.to_csv(out / "costate.csv")


def _parse_vector(text: str) -> np.ndarray:
    try:
        v = np.array([float(x) for x in text.split(",")])
    except ValueError as exc:
        raise ConfigError(f"cannot parse vector {text!r}") from exc
    return v


def cmd_certify(args) -> int:
    run = _load(args)
    mode = _mode(args)
    out = _out_dir(args)
    system = run.system
    if args.shoot is not None:
        psi0 = _parse_vector(args.shoot)
        psi0 = psi0 / np.linalg.norm(psi0)
        traj, cp = shoot(system, psi0, run.options, mode)
        _write_extremal(system, traj, cp, out)
        summary = traj.summary()
        summary["psi0"] = psi0.tolist()
        summary["metadata"] = _metadata()
        _dump(summary, out / "summary.json")
    elif args.run_dir is not None:
        src = Path(args.run_dir)
        try:
            summary = json.loads((src / "summary.json").read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read {src / 'summary.json'}: {exc}") from exc
        blowup = (summary["T_hat"], summary.get("err") or 0.0) if summary.get("T_hat") is not None else None
        try:
            traj = Trajectory.from_csv(src / "trajectory.csv", system.compactifier, blowup)
            cp = CostatePath.from_csv(src / "costate.csv")
        except OSError as exc:
            raise ConfigError(str(exc)) from exc
    else:
        raise ConfigError("certify needs --shoot PSI0 or --from RUN_DIR")
    rep = certify(traj, cp, system, mode)
    _dump(rep.to_json(), out / "report.json")
    print(_table([[key, val] for key, val in rep.verdicts.items()] + [["gap", _fmt(rep.hamiltonian_gap)]],
                 ["check", "verdict"]))
    return EXIT_OK


def cmd_monotone(args) -> int:
    run = _load(args)
    kind = run.raw["kind"]
    M = float(run.monotone.get("M", 1.0))
    horizon = float(run.monotone.get("horizon", 1.0))
    seeds = range(run.seed, run.seed + (args.seeds or 50))
    out = _out_dir(args)
    _copy_config(args, out)
    rows, passed = [], 0
    with open(out / "results.jsonl", "w") as fh, open(out / "gap.csv", "w") as gfh:
        gfh.write("seed,t,X,theta,gap\n")
        for seed in seeds:
            inst = random_instance(kind, seed, M, horizon)
            res = certify_monotone(inst.system, inst.drift, inst.y_hat0, inst.y_tilde0, inst.interval,
                                   inst.bundle)
            passed += res.passed
            row = {"seed": seed, "kind": kind, "rho": inst.bundle.rho, "M": M, "T": inst.interval[1],
                   "min_increment": res.min_increment, "pass": res.passed, "refined": res.refined}
            fh.write(json.dumps(row, sort_keys=True) + "\n")
            for s in res.samples:
                gfh.write(f"{seed},{s.t!r},{s.X!r},{s.Theta_norm!r},{s.gap!r}\n")
            rows.append([seed, f"{res.min_increment:.3e}", "pass" if res.passed else "FAIL"])
    print(_table(rows, ["seed", "min increment", "result"]))
    print(f"{passed}/{len(rows)} instances pass")
    _dump({"kind": kind, "passed": passed, "total": len(rows), "metadata": _metadata()}, out / "summary.json")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--out", help=f"output directory (default runs/<command>, or ${OUT_ENV})")
    common.add_argument("--tmax", type=float, help="override options.t_max")
    common.add_argument("--eps-blow", type=float, help="override options.eps_blow")
    common.add_argument("--jobs", type=int, default=os.cpu_count() or 1, help="worker threads")

    parser = argparse.ArgumentParser(prog="blowup-control", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="integrate one control law to blowup")

    p = sub.add_parser("optimize", parents=[common], help="search for the extremal blowup time")
    p.add_argument("--mode", choices=["ti", "ts", "TI", "TS"], default="ti")
    p.add_argument("--method", choices=["sweep", "brute", "cross"], default="sweep")
    p.add_argument("--dirs", type=int, help="number of costate directions")
    p.add_argument("--force", action="store_true", help="run TS even if the zeta audit fails")

    sub.add_parser("audit", parents=[common], help="check the standing assumptions")

    p = sub.add_parser("certify", parents=[common], help="maximum-principle checks on an extremal")
    p.add_argument("--mode", choices=["ti", "ts", "TI", "TS"], default="ti")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--shoot", metavar="PSI0", help="comma-separated initial costate")
    src.add_argument("--from", dest="run_dir", metavar="RUN_DIR",
                     help="directory holding summary.json, trajectory.csv and costate.csv")

    p = sub.add_parser("monotone", parents=[common], help="comparison-gap batch certification")
    p.add_argument("--seeds", type=int, help="number of random instances (default 50)")
    return parser


COMMANDS = {"simulate": cmd_simulate, "optimize": cmd_optimize, "audit": cmd_audit,
            "certify": cmd_certify, "monotone": cmd_monotone}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NotWellPosed as exc:
        print(f"not well posed: {exc}", file=sys.stderr)
        return EXIT_ILL_POSED
    except BlowupControlError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICS


if __name__ == "__main__":
    sys.exit(main())
