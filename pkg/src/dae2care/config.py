"""Run configuration: ``key = value`` files, command-line overrides, validation.

A single flat key namespace covers the input/output paths and every
:class:`~dae2care.newton.SolverConfig` field. Unknown keys are errors.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional

from .errors import ConfigError
from .newton import SolverConfig

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


@dataclass(frozen=True)
class RunConfig:
    M: Optional[str] = None
    A: Optional[str] = None
    G: Optional[str] = None
    B: Optional[str] = None
    C: Optional[str] = None
    K0: Optional[str] = None
    alpha: float = 1.0
    out_K: str = "K.mtx"
    out_Z: Optional[str] = None
    log: Optional[str] = "convergence.csv"
    setup: str = "v"
    solver: SolverConfig = field(default_factory=SolverConfig)

    def require_inputs(self):
        missing = [k for k in ("M", "A", "B", "C") if getattr(self, k) is None]
        if missing:
            raise ConfigError(f"missing input matrix paths: {', '.join(missing)}")


_RUN_KEYS = {f.name: f for f in dataclasses.fields(RunConfig) if f.name != "solver"}
_SOLVER_KEYS = {f.name: f for f in dataclasses.fields(SolverConfig)}
KEYS = tuple(_RUN_KEYS) + tuple(_SOLVER_KEYS)


def _kind(f, default):
    t = f.type if isinstance(f.type, str) else getattr(f.type, "__name__", str(f.type))
    if "Optional" in t or default is None:
        return "str"
    if isinstance(default, bool):
        return "bool"
    if isinstance(default, int):
        return "int"
    if isinstance(default, float):
        return "float"
    return "str"


def _coerce(key, raw):
    f = _RUN_KEYS.get(key) or _SOLVER_KEYS.get(key)
    if f is None:
        raise ConfigError(f"unknown configuration key {key!r}")
    if not isinstance(raw, str):
        return raw
    default = f.default if f.default is not dataclasses.MISSING else None
    kind = _kind(f, default)
    s = raw.strip()
    try:
        if kind == "bool":
            if s.lower() in _TRUE:
                return True
            if s.lower() in _FALSE:
                return False
            raise ValueError(f"not a boolean: {s!r}")
        if kind == "int":
            return int(s)
        if kind == "float":
            return float(s)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {exc}") from None
    if default is None and s.lower() in ("", "none"):
        return None
    return s


def parse_config_text(text: str) -> dict:
    """``key = value`` lines; ``#`` starts a comment. Returns raw string values."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        s = line.split("#", 1)[0].strip()
        if not s:
            continue
        if "=" not in s:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (p.strip() for p in s.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"line {lineno}: unknown configuration key {key!r}")
        out[key] = value
    return out


def load_config_file(path) -> dict:
    with open(path) as fh:
        return parse_config_text(fh.read())


def build_run_config(*layers: dict) -> RunConfig:
    """Merge layers left to right (later wins) and validate."""
    merged = {}
    for layer in layers:
        for k, v in layer.items():
            if v is not None:
                merged[k] = _coerce(k, v)
    run = {k: v for k, v in merged.items() if k in _RUN_KEYS}
    solver = {k: v for k, v in merged.items() if k in _SOLVER_KEYS}
    try:
        return RunConfig(solver=SolverConfig(**solver), **run)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def format_config(cfg: RunConfig) -> str:
    lines = []
    for k in _RUN_KEYS:
        v = getattr(cfg, k)
        if v is not None:
            lines.append(f"{k} = {v}")
    for k in _SOLVER_KEYS:
        lines.append(f"{k} = {getattr(cfg.solver, k)}")
    return "\n".join(lines) + "\n"
