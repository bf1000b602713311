"""Run configuration: INI file sections mapped onto frozen dataclasses.

Example::

    [system]
    a11 = 2
    a12 = 1
    a21 = 1
    a22 = 2
    r1 = 3
    r2 = 3
    tau = 3

    [solver]
    K = 32

Every section but ``[system]`` is optional.
"""

import configparser
import math
from dataclasses import dataclass, fields, replace

from .constants import (
    DEFAULT_ALPHA0,
    DEFAULT_DEGREE_K,
    DEFAULT_FORMATS,
    DEFAULT_K,
    DEFAULT_RADIUS_BIG_R,
    DEFAULT_RADIUS_R,
    NEWTON_MAX_ITERS,
    NEWTON_TOL,
    OUTPUT_FORMATS,
    TRANSIENT_TAUS,
)
from .errors import ConfigError


@dataclass(frozen=True)
class SystemSection:
    a11: float
    a12: float
    a21: float
    a22: float
    r1: float
    r2: float
    tau: float

    def __post_init__(self):
        if self.tau < 0:
            raise ConfigError(f"tau must be nonnegative, got {self.tau}")


@dataclass(frozen=True)
class SolverSection:
    K: int = DEFAULT_K
    M: int = None
    newton_tol: float = NEWTON_TOL
    max_iters: int = NEWTON_MAX_ITERS
    rk4_step: float = None
    t_end: float = 300.0
    transient_skip: float = None
    degree_K: int = DEFAULT_DEGREE_K
    seed: int = 0
    jobs: int = 1
    restarts: int = 0

    def __post_init__(self):
        if self.K < 8:
            raise ConfigError(f"K must be at least 8, got {self.K}")
        if self.M is not None and self.M < 4 * self.K + 1:
            raise ConfigError(f"M must be at least 4K+1={4 * self.K + 1}, got {self.M}")
        if self.jobs < 1:
            raise ConfigError("jobs must be positive")

    @property
    def grid(self):
        return self.M or 4 * self.K + 1

    def transient(self, tau):
        return self.transient_skip if self.transient_skip is not None else TRANSIENT_TAUS * tau


@dataclass(frozen=True)
class GeometrySection:
    alpha0: float = DEFAULT_ALPHA0
    radius_r: float = DEFAULT_RADIUS_R
    radius_R: float = DEFAULT_RADIUS_BIG_R
    m1_override: float = None

    def __post_init__(self):
        if not 0.0 < self.alpha0 < 1.0:
            raise ConfigError(f"alpha0 must lie in (0, 1), got {self.alpha0}")
        if not 0.0 < self.radius_r < self.radius_R:
            raise ConfigError("radii must satisfy 0 < radius_r < radius_R")


@dataclass(frozen=True)
class OutputSection:
    """Output directory and the file kinds written into it (``png`` turns plots on)."""

    directory: str = "out"
    formats: tuple = DEFAULT_FORMATS

    def __post_init__(self):
        if not self.formats:
            raise ConfigError("[output] formats is empty")
        unknown = sorted(set(self.formats) - set(OUTPUT_FORMATS))
        if unknown:
            expected = ", ".join(OUTPUT_FORMATS)
            raise ConfigError(f"[output] unknown format(s) {', '.join(unknown)}; expected {expected}")


@dataclass(frozen=True)
class LogisticSection:
    alpha: float = 1.7
    tau: float = 1.0
    u0: float = 0.5


@dataclass(frozen=True)
class RunConfig:
    system: SystemSection
    solver: SolverSection = SolverSection()
    geometry: GeometrySection = GeometrySection()
    output: OutputSection = OutputSection()
    logistic: LogisticSection = None

    def with_overrides(self, **solver):
        """Copy with solver fields replaced (``None`` values are ignored)."""
        solver = {k: v for k, v in solver.items() if v is not None}
        return replace(self, solver=replace(self.solver, **solver)) if solver else self

    def with_output(self, directory):
        return replace(self, output=replace(self.output, directory=directory)) if directory else self


def _number(section, key, raw, kind):
    try:
        value = kind(raw) if kind is not int else int(float(raw))
    except (ValueError, OverflowError):
        raise ConfigError(f"[{section}] {key} = {raw!r} is not a number") from None
    if kind is float and not math.isfinite(value):
        raise ConfigError(f"[{section}] {key} must be finite")
    if kind is int and float(raw) != value:
        raise ConfigError(f"[{section}] {key} must be an integer")
    return value


def _section(parser, name, cls, required=()):
    if not parser.has_section(name):
        if required:
            raise ConfigError(f"missing [{name}] section")
        return cls()
    raw = dict(parser.items(name))
    kwargs = {}
    for f in fields(cls):
        if f.name.lower() not in raw:
            if f.name in required:
                raise ConfigError(f"[{name}] is missing {f.name}")
            continue
        value = raw.pop(f.name.lower())
        if f.name == "formats":
            kwargs[f.name] = tuple(v.strip().lower() for v in value.split(",") if v.strip())
        elif f.name == "directory":
            kwargs[f.name] = value
        elif value.strip().lower() in ("", "none"):
            kwargs[f.name] = None
        else:
            kind = int if f.type in (int, "int") else float
            kwargs[f.name] = _number(name, f.name, value, kind)
    if raw:
        raise ConfigError(f"[{name}] has unknown key(s): {', '.join(sorted(raw))}")
    return cls(**kwargs)


def parse_config(text):
    """Parse INI text into a :class:`RunConfig`.

    Raises:
        ConfigError: On syntax errors, missing system keys or bad numbers.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",), comment_prefixes=("#", ";"))
    parser.optionxform = str.lower
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed configuration: {exc}") from exc
    system_keys = tuple(f.name for f in fields(SystemSection))
    return RunConfig(
        system=_section(parser, "system", SystemSection, required=system_keys),
        solver=_section(parser, "solver", SolverSection),
        geometry=_section(parser, "geometry", GeometrySection),
        output=_section(parser, "output", OutputSection),
        logistic=_section(parser, "logistic", LogisticSection) if parser.has_section("logistic") else None,
    )


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return parse_config(text)


def parse_logistic_override(tokens):
    """Turn ``["alpha=1.7", "tau=1"]`` into a :class:`LogisticSection`."""
    kwargs = {}
    for token in tokens:
        if "=" not in token:
            raise ConfigError(f"logistic override {token!r} is not key=value")
        key, value = token.split("=", 1)
        if key not in ("alpha", "tau", "u0"):
            raise ConfigError(f"unknown logistic key {key!r}")
        kwargs[key] = _number("logistic", key, value, float)
    return LogisticSection(**kwargs)
