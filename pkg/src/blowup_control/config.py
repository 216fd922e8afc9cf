"""JSON run configuration: system definition, control law and solver options."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .core import (
    BlowupControlError,
    Coefficient,
    ConfigError,
    ControlGeometry,
    ControlLaw,
    ControlSystem,
    MatrixDrift,
    linear_growth,
    make_catalog_system,
    make_system,
    zero_growth,
)
from .dynamics import IntegrateOptions
from .growth import power_zeta

CATALOG = ("power", "logpower", "exponential")
TOP_KEYS = {"kind", "p", "beta", "g", "n", "A", "controls", "y0", "zeta", "law", "options",
            "optimize", "monotone", "seed"}
OPTION_KEYS = {"rel_tol", "abs_tol", "switch_radius", "eps_blow", "t_max", "max_steps", "method"}
OPTIMIZE_KEYS = {"k", "values", "dirs", "sampler", "budget", "window"}
MONOTONE_KEYS = {"M", "horizon"}


@dataclass
class RunConfig:
    system: ControlSystem
    law: ControlLaw
    options: IntegrateOptions
    optimize: dict = field(default_factory=dict)
    monotone: dict = field(default_factory=dict)
    seed: int = 0
    raw: dict = field(default_factory=dict, repr=False)


def loads(text: str) -> dict:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    return doc


def load(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse(loads(text))


def _unknown(section: dict, allowed: set, where: str) -> None:
    extra = sorted(set(section) - allowed)
    if extra:
        raise ConfigError(f"unknown key(s) {extra} in {where}")


def _coefficient(g) -> Coefficient:
    if g is None:
        return Coefficient(const=1.0)
    if isinstance(g, (int, float)):
        return Coefficient(const=float(g))
    if isinstance(g, dict) and set(g) == {"const"}:
        return Coefficient(const=float(g["const"]))
    if isinstance(g, dict) and set(g) == {"table"}:
        return Coefficient(table=tuple((float(t), float(v)) for t, v in g["table"]))
    raise ConfigError("g must be a number, {const: v} or {table: [[t, v], ...]}")


def _drift(A, n: int) -> Optional[MatrixDrift]:
    if A is None:
        return None
    if isinstance(A, dict) and set(A) == {"const"}:
        M = np.asarray(A["const"], dtype=float)
        if M.shape != (n, n):
            raise ConfigError(f"A must be {n}x{n}, got shape {M.shape}")
        return MatrixDrift.constant(M, n)
    if isinstance(A, dict) and set(A) == {"rotation"}:
        return MatrixDrift.rotation(float(A["rotation"]), n)
    raise ConfigError("A must be {const: matrix} or {rotation: omega}")


def _controls(c, n: int) -> Optional[ControlGeometry]:
    if c is None:
        return None
    if isinstance(c, dict) and set(c) == {"ball"}:
        ball = c["ball"]
        _unknown(ball, {"B", "radius"}, "controls.ball")
        return ControlGeometry.ball(ball.get("B", np.eye(n).tolist()), float(ball.get("radius", 1.0)), n)
    if isinstance(c, dict) and "finite" in c:
        _unknown(c, {"finite", "B"}, "controls")
        return ControlGeometry.finite(c["finite"], n, c.get("B"))
    raise ConfigError("controls must be {ball: {B, radius}} or {finite: [u, ...], B?}")


def _law(spec, system: ControlSystem) -> ControlLaw:
    if spec is None:
        return ControlLaw.constant(system.controls.zero_control())
    if isinstance(spec, dict) and set(spec) == {"const"}:
        return ControlLaw.constant(spec["const"])
    if isinstance(spec, dict) and set(spec) == {"breakpoints", "values"}:
        return ControlLaw.piecewise(spec["breakpoints"], spec["values"])
    raise ConfigError("law must be {const: u} or {breakpoints: [...], values: [...]}")


def _require(doc: dict, key: str):
    if key not in doc:
        raise ConfigError(f"missing required key {key!r}")
    return doc[key]


def build_system(doc: dict) -> ControlSystem:
    """System part of a config document (see README for the schema)."""
    kind = _require(doc, "kind")
    n = int(_require(doc, "n"))
    if n < 1:
        raise ConfigError("n must be positive")
    A = _drift(doc.get("A"), n)
    controls = _controls(doc.get("controls"), n)
    y0 = np.asarray(_require(doc, "y0"), dtype=float)
    g = _coefficient(doc.get("g"))
    beta = float(doc.get("beta", 2.0))
    if kind in CATALOG:
        system = make_catalog_system(kind, float(_require(doc, "p")), beta, g, n, A=A,
                                     controls=controls, y0=y0)
    elif kind == "linear":
        system = make_system(linear_growth(g), n, A=A, controls=controls, y0=y0, beta=beta)
    elif kind == "zero":
        system = make_system(zero_growth(), n, A=A, controls=controls, y0=y0, beta=beta)
    else:
        raise ConfigError(f"unknown kind {kind!r}")
    zeta = doc.get("zeta")
    if zeta is not None:
        if not isinstance(zeta, dict) or set(zeta) - {"coeff", "T"}:
            raise ConfigError("zeta must be {coeff?, T?}")
        system = system.with_zeta(power_zeta(system, float(zeta.get("coeff", 0.5)),
                                             float(zeta.get("T", 1.0))))
    return system


def parse(doc: dict) -> RunConfig:
    _unknown(doc, TOP_KEYS, "config")
    try:
        system = build_system(doc)
        law = _law(doc.get("law"), system)
        opts_doc = doc.get("options", {})
        _unknown(opts_doc, OPTION_KEYS, "options")
        options = IntegrateOptions(**opts_doc)
        options.resolve(system)
        opt_doc = doc.get("optimize", {})
        _unknown(opt_doc, OPTIMIZE_KEYS, "optimize")
        mono_doc = doc.get("monotone", {})
        _unknown(mono_doc, MONOTONE_KEYS, "monotone")
    except ConfigError:
        raise
    except (BlowupControlError, TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"invalid config: {exc}") from exc
    return RunConfig(system, law, options, dict(opt_doc), dict(mono_doc), int(doc.get("seed", 0)), doc)
