"""Flat ``section.key = value`` run configuration with a typed schema."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

SCENARIOS = ("shear", "linear", "growth-scan", "amplify", "crocco", "stability")
ENV_PREFIX = "PRANDTL_"


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending key."""

    def __init__(self, key: str, msg: str, line: int | None = None):
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"{key}{where}: {msg}")
        self.key = key
        self.line = line


def _int_list(text: str):
    return tuple(int(v) for v in text.replace(",", " ").split())


def _float_list(text: str):
    return tuple(float(v) for v in text.replace(",", " ").split())


def _bool(text: str):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _positive(v):
    return None if v > 0 else "must be > 0"


def _non_negative(v):
    return None if v >= 0 else "must be >= 0"


def _choice(*opts):
    def check(v):
        return None if v in opts else f"must be one of {', '.join(opts)}"

    return check


def _beta(v):
    if v >= 3:
        return "β must be < 3"
    return None if v >= 0 else "β must be >= 0"


def _even_at_least_4(v):
    return None if v >= 4 and v % 2 == 0 else "must be an even integer >= 4"


def _at_least(n):
    def check(v):
        return None if v >= n else f"must be >= {n}"

    return check


def _m_range(v):
    return None if 0 <= v <= 3 else "must be in [0, 3]"


def _ks(v):
    if not v:
        return "needs at least one frequency"
    return None if all(k >= 0 for k in v) else "frequencies must be >= 0"


def _shifts(v):
    if not v:
        return "needs at least one shift"
    return None if all(s >= 0 for s in v) else "shifts must be >= 0"


@dataclass(frozen=True)
class Option:
    parse: object
    default: object
    check: object = None
    doc: str = ""


SCHEMA = {
    "scenario.name": Option(str, "", None, "scenario; must agree with the command line"),
    "scenario.seed": Option(int, 0, _non_negative, "seed for randomised initial data"),
    "grid.y_max": Option(float, 20.0, _positive, "truncation height of the half-line"),
    "grid.n_y": Option(int, 256, _at_least(16), "wall-normal nodes"),
    "grid.grading": Option(str, "uniform", _choice("uniform", "tanh-stretched"), "wall-normal spacing"),
    "grid.n_x": Option(int, 32, _even_at_least_4, "periodic x nodes"),
    "grid.n_eta": Option(int, 256, _at_least(8), "resolved Crocco eta nodes"),
    "time.dt": Option(float, 1e-3, _positive, "time step (upper bound where a CFL applies)"),
    "time.t_end": Option(float, 0.5, _non_negative, "final time"),
    "time.store_every": Option(int, 10, _at_least(1), "snapshot stride in steps"),
    "shear.kind": Option(str, "gd_nonmonotone", _choice("erf_monotone", "gd_nonmonotone", "custom_table"), "profile family"),
    "shear.U": Option(float, 1.0, _positive, "outer velocity"),
    "shear.t0": Option(float, 1.0, _positive, "erf profile age"),
    "shear.c": Option(float, 0.5, _positive, "bump amplitude of the non-monotone profile"),
    "shear.table": Option(str, "", None, "two-column (Y, u) table for custom_table"),
    "linear.k": Option(int, 8, _non_negative, "frequency of the single-mode run"),
    "linear.ks": Option(_int_list, (8, 16, 32, 64), _ks, "frequencies of scans"),
    "linear.cfl": Option(float, 0.05, _positive, "transport CFL number"),
    "linear.evolve_shear": Option(_bool, True, None, "evolve the shear by the heat equation"),
    "linear.init": Option(str, "bump", _choice("bump", "random"), "initial mode shape"),
    "linear.shifts": Option(_float_list, (0.0,), _shifts, "time shifts of the translated shear layers"),
    "linear.horizon": Option(float, 0.25, _positive, "amplification horizon"),
    "norm.m": Option(int, 2, _m_range, "Sobolev order of the data norm"),
    "norm.alpha": Option(float, 0.25, _non_negative, "exponential weight rate of the data norm"),
    "crocco.init": Option(str, "exponential", _choice("exponential", "shear", "table", "w_table"), "initial data source"),
    "crocco.rate": Option(float, 1.0, _positive, "u0 = U(1 - exp(-(rate + modulation sin x) y))"),
    "crocco.modulation": Option(float, 0.0, _non_negative, "x-modulation of the decay rate"),
    "crocco.table": Option(str, "", None, "two-column (y, u) or, for w_table, (eta, w) table; x-independent"),
    "crocco.cfl": Option(float, 0.5, _positive, "transport CFL number"),
    "stability.beta": Option(float, 2.5, _beta, "weight exponent of the functional"),
    "stability.k_w": Option(float, 8.0, _non_negative, "eta weight rate"),
    "stability.use_weight": Option(_bool, False, None, "apply the e^{-k_w eta} weight"),
    "stability.rate2": Option(float, 1.05, _positive, "decay rate of the second run"),
    "stability.eps": Option(float, 0.0, _non_negative, "amplitude of the eps sin(x) y e^{-2y} perturbation"),
}


@dataclass(frozen=True)
class RunConfig:
    scenario: str
    values: dict
    source: str = ""
    overrides: tuple = field(default_factory=tuple)

    def __getitem__(self, key):
        return self.values[key]

    def echo(self) -> dict:
        out = {}
        for key, val in sorted(self.values.items()):
            out[key] = list(val) if isinstance(val, tuple) else val
        return out


def _coerce(key: str, raw: str, line=None):
    opt = SCHEMA.get(key)
    if opt is None:
        raise ConfigError(key, "unknown key", line)
    try:
        val = opt.parse(raw.strip())
    except (TypeError, ValueError) as exc:
        raise ConfigError(key, f"type mismatch: {exc}", line) from None
    if opt.check is not None:
        problem = opt.check(val)
        if problem:
            raise ConfigError(key, problem, line)
    return val


def env_overrides(environ=None) -> dict:
    """PRANDTL_SECTION_KEY=value -> {section.key: value}; the first underscore splits."""
    environ = os.environ if environ is None else environ
    out = {}
    for name, raw in sorted(environ.items()):
        if not name.startswith(ENV_PREFIX):
            continue
        rest = name[len(ENV_PREFIX) :].lower()
        if "_" not in rest:
            raise ConfigError(name, "environment override needs SECTION_KEY")
        section, key = rest.split("_", 1)
        out[f"{section}.{key}"] = raw
    return out


def parse_text(text: str, scenario: str | None = None, environ=None, source: str = "<text>") -> RunConfig:
    raw = {}
    lines = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(body.split()[0], "expected 'key = value'", lineno)
        key, val = (p.strip() for p in body.split("=", 1))
        if key in raw:
            raise ConfigError(key, f"duplicate key (first set on line {lines[key]})", lineno)
        raw[key] = val
        lines[key] = lineno
    values = {}
    for key, val in raw.items():
        values[key] = _coerce(key, val, lines[key])
    env = env_overrides(environ)
    for key, val in env.items():
        values[key] = _coerce(key, val, None)
    for key, opt in SCHEMA.items():
        values.setdefault(key, opt.default)
    name = values["scenario.name"]
    if scenario is None:
        scenario = name
    if scenario not in SCENARIOS:
        raise ConfigError("scenario.name", f"unknown scenario {scenario!r}", lines.get("scenario.name"))
    if name and name != scenario:
        raise ConfigError("scenario.name", f"config is for {name!r}, command asks for {scenario!r}", lines.get("scenario.name"))
    values["scenario.name"] = scenario
    if values["shear.kind"] == "custom_table" and scenario in ("shear", "linear", "growth-scan", "amplify") and not values["shear.table"]:
        raise ConfigError("shear.table", "custom_table needs a table path", lines.get("shear.kind"))
    if values["crocco.init"] in ("table", "w_table") and not values["crocco.table"]:
        raise ConfigError("crocco.table", "table initial data needs a path", lines.get("crocco.init"))
    return RunConfig(scenario, values, source, tuple(sorted(env)))


def parse_config(path, scenario: str | None = None, environ=None) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
    return parse_text(text, scenario, environ, str(path))
