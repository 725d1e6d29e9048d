"""Flat ``key = value`` experiment configuration.

Example::

    # cif reference run
    d = 2
    N = 64
    L = auto
    theta0 = 2
    M = 64
    symbol = square{gaussian{sigma=1}}
    variant = smooth
    points_per_octave = 4
    seed = 0

Blank lines and ``#`` comments are ignored.  Unknown keys are errors.
Symbols use a small nested syntax::

    gaussian{sigma=1}            exp(-|s|^2 / (2 sigma^2))
    bump{radius=1}               smooth bump supported in the open ball
    matrix-unit{k=0, l=1}        symbol of the matrix unit e_kl (d = 2)
    lattice-delta{s0=(0.5, 0)}   quantizes exactly to U(s0)
    square{gaussian{sigma=1}}    Moyal square y^* y of the inner symbol
    zero
"""

from __future__ import annotations

import dataclasses
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError
from .plane import PlaneContext


@dataclass(frozen=True)
class SymbolSpec:
    family: str
    params: tuple = ()
    inner: "SymbolSpec | None" = None

    FAMILIES = ("gaussian", "bump", "matrix-unit", "lattice-delta", "square", "zero")

    def param(self, key: str, default=None):
        return dict(self.params).get(key, default)

    def __str__(self) -> str:
        if self.family == "zero":
            return "zero"
        if self.family == "square":
            return f"square{{{self.inner}}}"
        body = ", ".join(f"{k}={_fmt(v)}" for k, v in self.params)
        return f"{self.family}{{{body}}}"


def _fmt(v) -> str:
    if isinstance(v, tuple):
        return "(" + ", ".join(_fmt(x) for x in v) + ")"
    return repr(v) if isinstance(v, str) else f"{v:g}"


_NAME = re.compile(r"\s*([a-z][a-z0-9-]*)\s*")


def parse_symbol(text: str, key: str = "symbol") -> SymbolSpec:
    spec, rest = _parse_symbol(text.strip(), key)
    if rest.strip():
        raise ConfigurationError(f"trailing text {rest.strip()!r} after symbol", key)
    return spec


def _parse_symbol(text: str, key: str) -> tuple[SymbolSpec, str]:
    m = _NAME.match(text)
    if not m:
        raise ConfigurationError(f"cannot parse symbol from {text!r}", key)
    family = m.group(1)
    if family not in SymbolSpec.FAMILIES:
        raise ConfigurationError(
            f"unknown symbol family {family!r} (choose from {', '.join(SymbolSpec.FAMILIES)})", key
        )
    rest = text[m.end():]
    if not rest.startswith("{"):
        if family in ("zero",):
            return SymbolSpec(family), rest
        raise ConfigurationError(f"{family} needs parameters in braces", key)
    body, rest = _balanced(rest, key)
    if family == "square":
        inner, tail = _parse_symbol(body, key)
        if tail.strip():
            raise ConfigurationError(f"square takes one symbol, got extra {tail.strip()!r}", key)
        return SymbolSpec(family, (), inner), rest
    params = []
    for item in _split_top(body):
        if not item.strip():
            continue
        if "=" not in item:
            raise ConfigurationError(f"expected name=value in {item!r}", key)
        name, value = (p.strip() for p in item.split("=", 1))
        params.append((name, _value(value, key)))
    spec = SymbolSpec(family, tuple(params))
    _check_params(spec, key)
    return spec, rest


def _balanced(text: str, key: str) -> tuple[str, str]:
    depth = 0
    for i, ch in enumerate(text):
        depth += ch == "{"
        depth -= ch == "}"
        if depth == 0:
            return text[1:i], text[i + 1:]
    raise ConfigurationError("unbalanced braces in symbol", key)


def _split_top(body: str) -> list[str]:
    parts, depth, start = [], 0, 0
    for i, ch in enumerate(body):
        if ch in "({":
            depth += 1
        elif ch in ")}":
            depth -= 1
        elif ch == "," and depth == 0:
            parts.append(body[start:i])
            start = i + 1
    parts.append(body[start:])
    return parts


def _value(text: str, key: str):
    text = text.strip()
    if text.startswith("("):
        if not text.endswith(")"):
            raise ConfigurationError(f"unclosed tuple {text!r}", key)
        return tuple(_value(v, key) for v in text[1:-1].split(",") if v.strip())
    try:
        return float(text)
    except ValueError:
        raise ConfigurationError(f"expected a number, got {text!r}", key) from None


_REQUIRED = {
    "gaussian": {"sigma": 1.0},
    "bump": {"radius": 1.0},
    "matrix-unit": {"k": None, "l": None},
    "lattice-delta": {"s0": None},
}


def _check_params(spec: SymbolSpec, key: str) -> None:
    allowed = _REQUIRED.get(spec.family, {})
    given = dict(spec.params)
    for name in given:
        if name not in allowed:
            raise ConfigurationError(f"{spec.family} has no parameter {name!r}", key)
    for name, default in allowed.items():
        if default is None and name not in given:
            raise ConfigurationError(f"{spec.family} needs {name}=...", key)
    if spec.family == "gaussian" and not given.get("sigma", 1.0) > 0:
        raise ConfigurationError("sigma must be positive", key)
    if spec.family == "bump" and not given.get("radius", 1.0) > 0:
        raise ConfigurationError("radius must be positive", key)
    if spec.family == "matrix-unit":
        for name in ("k", "l"):
            v = given[name]
            if isinstance(v, tuple) or v < 0 or v != int(v):
                raise ConfigurationError(f"{name} must be a nonnegative integer", key)
    if spec.family == "lattice-delta" and not isinstance(given["s0"], tuple):
        raise ConfigurationError("s0 must be a vector like (0.5, 0)", key)


COMMANDS = ("verify-algebra", "verify-calculus", "verify-blocks", "verify-traces", "verify-kernel", "cif", "sweep")
RESOURCE_CEILING = 4096


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment parameters; ``None`` for ``L`` or ``theta0`` means ``auto``."""

    d: int = 2
    N: int = 64
    L: float | None = None
    boundary: str = "torus"
    theta0: float | None = 2.0
    m: int = 1
    M: int = 64
    symbol: SymbolSpec = field(default_factory=lambda: parse_symbol("square{gaussian{sigma=1}}"))
    variant: str = "smooth"
    n_min: int = 4
    points_per_octave: int = 4
    window_fraction: float = 0.6
    guard: float = 0.1
    tolerance: float = 0.15
    sweep_N: tuple = (32, 48, 64)
    translations: int = 3
    box_side: int = 9
    points_per_unit: int = 4
    kernels: int = 20
    count: int = 1_000_000
    out: str = "runs"
    seed: int = 0

    def __post_init__(self):
        _validate(self)

    def context(self, N: int | None = None) -> PlaneContext:
        """Plane context with ``auto`` fields resolved from torus compatibility."""
        return PlaneContext.build(self.d, N or self.N, self.L, self.theta0, self.boundary, self.m)

    def resolved(self) -> dict:
        ctx = self.context()
        out = self.echo()
        out["L"] = ctx.grid.L
        out["theta0"] = ctx.theta.theta0
        return out

    def echo(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, SymbolSpec):
                v = str(v)
            elif isinstance(v, tuple):
                v = list(v)
            out[f.name] = v
        out["L"] = "auto" if self.L is None else self.L
        out["theta0"] = "auto" if self.theta0 is None else self.theta0
        return out

    def with_(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


def _validate(c: ExperimentConfig) -> None:
    if c.d < 2 or c.d % 2:
        raise ConfigurationError(f"must be an even integer >= 2, got {c.d}", "d")
    if c.N < 4 or c.N % 2:
        raise ConfigurationError(f"must be an even integer >= 4, got {c.N}", "N")
    if c.L is not None and not c.L > 0:
        raise ConfigurationError(f"must be positive or auto, got {c.L}", "L")
    if c.theta0 is not None and not c.theta0 > 0:
        raise ConfigurationError(f"must be positive or auto, got {c.theta0}", "theta0")
    if c.L is None and c.theta0 is None:
        raise ConfigurationError("L and theta0 cannot both be auto", "theta0")
    if c.boundary not in ("torus", "open-box"):
        raise ConfigurationError(f"must be torus or open-box, got {c.boundary!r}", "boundary")
    if c.m < 1:
        raise ConfigurationError(f"must be a positive integer, got {c.m}", "m")
    if c.M < 2:
        raise ConfigurationError(f"must be >= 2, got {c.M}", "M")
    if c.variant not in ("smooth", "floor", "power"):
        raise ConfigurationError(f"must be smooth, floor or power, got {c.variant!r}", "variant")
    if c.n_min < 1:
        raise ConfigurationError(f"must be >= 1, got {c.n_min}", "n_min")
    if c.points_per_octave < 1:
        raise ConfigurationError(f"must be >= 1, got {c.points_per_octave}", "points_per_octave")
    if not 0 < c.window_fraction <= 1:
        raise ConfigurationError(f"must lie in (0, 1], got {c.window_fraction}", "window_fraction")
    for name in ("guard", "tolerance"):
        if not getattr(c, name) > 0:
            raise ConfigurationError("must be positive", name)
    if not c.sweep_N or any(n < 4 or n % 2 for n in c.sweep_N):
        raise ConfigurationError("must list even integers >= 4", "sweep_N")
    for name in ("translations", "box_side", "points_per_unit", "kernels", "count"):
        if getattr(c, name) < 1:
            raise ConfigurationError("must be a positive integer", name)
    if c.count < 256:
        raise ConfigurationError("must be >= 256 for the window diagnostics", "count")
    try:
        c.context()
    except ConfigurationError:
        raise
    except ValueError as exc:
        raise ConfigurationError(str(exc), "theta0") from exc


_INT_KEYS = {"d", "N", "m", "M", "n_min", "points_per_octave", "translations", "box_side",
             "points_per_unit", "kernels", "count", "seed"}
_FLOAT_KEYS = {"window_fraction", "guard", "tolerance"}
_AUTO_KEYS = {"L", "theta0"}
_STR_KEYS = {"boundary", "variant", "out"}


def _int(text: str, key: str) -> int:
    try:
        value = float(text)
    except ValueError:
        raise ConfigurationError(f"expected an integer, got {text!r}", key) from None
    if value != int(value):
        raise ConfigurationError(f"expected an integer, got {text!r}", key)
    return int(value)


def _float(text: str, key: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ConfigurationError(f"expected a number, got {text!r}", key) from None
    if not np.isfinite(value):
        raise ConfigurationError(f"expected a finite number, got {text!r}", key)
    return value


def parse_config(text: str) -> ExperimentConfig:
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected key = value, got {raw.strip()!r}")
        key, value = (p.strip() for p in line.split("=", 1))
        if key in values:
            raise ConfigurationError(f"line {lineno}: duplicate key", key)
        if key in _INT_KEYS:
            values[key] = _int(value, key)
        elif key in _FLOAT_KEYS:
            values[key] = _float(value, key)
        elif key in _AUTO_KEYS:
            values[key] = None if value.lower() == "auto" else _float(value, key)
        elif key in _STR_KEYS:
            values[key] = value
        elif key == "symbol":
            values[key] = parse_symbol(value, key)
        elif key == "sweep_N":
            values[key] = tuple(_int(v, key) for v in value.replace(",", " ").split())
        else:
            raise ConfigurationError(f"line {lineno}: unknown key", key)
    return ExperimentConfig(**values)


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read {path}: {exc.strerror}", "config") from exc
    return parse_config(text)


__all__ = ["COMMANDS", "ExperimentConfig", "RESOURCE_CEILING", "SymbolSpec", "load_config",
           "parse_config", "parse_symbol"]
