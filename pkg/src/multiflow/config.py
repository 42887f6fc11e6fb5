"""Scenario configuration files (TOML) and scenario construction."""

from __future__ import annotations

import inspect
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import tomli

from .dynamics import FlowState
from .errors import ConfigError
from .scenarios import SCENARIO_SHAPE, SCENARIOS
from .spectral import Grid

TOP_KEYS = {"scenario", "dim", "N", "n", "m", "weights", "dt", "T", "stride", "out", "seed", "checks", "params"}
CHECK_KEYS = ("kelvin", "pushforward", "consistency")


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str
    dim: int
    N: int
    dt: float
    T: float
    n: int | None = None
    m: int | None = None
    weights: str = "unit"
    stride: int = 1
    out: str = "out"
    seed: int = 0
    checks: dict = field(default_factory=lambda: {"kelvin": True, "pushforward": False, "consistency": True})
    params: dict = field(default_factory=dict)

    @property
    def grid(self) -> Grid:
        return Grid(self.dim, self.N)

    @property
    def steps(self) -> int:
        return int(round(self.T / self.dt))


def _line_of(text: str, key: str) -> int | None:
    pat = re.compile(rf"^\s*\"?{re.escape(key)}\"?\s*=", re.MULTILINE)
    m = pat.search(text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def _where(text: str, key: str) -> str:
    line = _line_of(text, key) if text else None
    return f" (line {line})" if line else ""


def _need(cond: bool, key: str, msg: str, text: str = "") -> None:
    if not cond:
        raise ConfigError(f"{key}: {msg}{_where(text, key)}")


def config_from_dict(raw: dict, text: str = "") -> ScenarioConfig:
    """Validate a parsed mapping and turn it into a :class:`ScenarioConfig`."""
    for key in raw:
        if key not in TOP_KEYS:
            raise ConfigError(f"{key}: unknown key{_where(text, key)}")
    for key in ("scenario", "dim", "N", "dt", "T"):
        _need(key in raw, key, "missing required key")
    name = raw["scenario"]
    _need(isinstance(name, str) and name in SCENARIOS, "scenario", f"unknown scenario {name!r}", text)
    dims, fixed_n, wmode = SCENARIO_SHAPE[name]

    def integer(key, lo):
        v = raw[key]
        _need(isinstance(v, int) and not isinstance(v, bool), key, f"must be an integer, got {v!r}", text)
        _need(v >= lo, key, f"must be >= {lo}, got {v}", text)
        return v

    def positive(key):
        v = raw[key]
        _need(isinstance(v, (int, float)) and not isinstance(v, bool), key, f"must be a number, got {v!r}", text)
        _need(math.isfinite(v) and v > 0, key, f"must be positive, got {v}", text)
        return float(v)

    dim = integer("dim", 1)
    _need(dim in dims, "dim", f"scenario {name} supports dim in {sorted(dims)}, got {dim}", text)
    N = integer("N", 16)
    _need(N & (N - 1) == 0, "N", f"must be a power of two, got {N}", text)
    dt, T = positive("dt"), positive("T")
    _need(abs(round(T / dt) * dt - T) <= 1e-9 * max(1.0, T), "T", "must be an integer multiple of dt", text)
    stride = integer("stride", 1) if "stride" in raw else 1

    n = m = None
    if name == "continuum":
        _need("n" not in raw, "n", "continuum mode takes the node count m, not n", text)
        m = integer("m", 2) if "m" in raw else 8
    else:
        _need("m" not in raw, "m", "only the continuum scenario takes m", text)
        if "n" in raw:
            n = integer("n", 1)
            if fixed_n is not None:
                _need(n == fixed_n, "n", f"scenario {name} has {fixed_n} phase(s), got {n}", text)
        else:
            n = fixed_n if fixed_n is not None else 2
    weights = raw.get("weights", wmode)
    _need(weights in ("unit", "trapezoid"), "weights", f"must be 'unit' or 'trapezoid', got {weights!r}", text)
    _need(weights == wmode, "weights", f"scenario {name} uses {wmode} weights", text)

    out = raw.get("out", "out")
    _need(isinstance(out, str) and out != "", "out", "must be a non-empty string", text)
    seed = raw.get("seed", 0)
    _need(isinstance(seed, int) and not isinstance(seed, bool) and 0 <= seed < 2**64, "seed", "must be an unsigned 64-bit integer", text)

    checks = {"kelvin": dim == 2, "pushforward": dim == 1, "consistency": True}
    raw_checks = raw.get("checks", {})
    _need(isinstance(raw_checks, dict), "checks", "must be a table", text)
    for key, val in raw_checks.items():
        _need(key in CHECK_KEYS, f"checks.{key}", "unknown check toggle", text)
        _need(isinstance(val, bool), f"checks.{key}", "must be true or false", text)
        checks[key] = val
    if checks["kelvin"] and dim != 2:
        raise ConfigError("checks.kelvin: the Kelvin check needs dim = 2")
    if checks["pushforward"] and dim != 1:
        raise ConfigError("checks.pushforward: the pushforward check needs dim = 1")

    params = raw.get("params", {})
    _need(isinstance(params, dict), "params", "must be a table", text)
    allowed = set(inspect.signature(SCENARIOS[name]).parameters) - {"grid", "m", "n"}
    for key, val in params.items():
        _need(key in allowed, f"params.{key}", f"unknown parameter for {name} (allowed: {sorted(allowed)})", text)
        _need(isinstance(val, (int, float)) and not isinstance(val, bool), f"params.{key}", "must be a number", text)

    return ScenarioConfig(
        scenario=name, dim=dim, N=N, dt=dt, T=T, n=n, m=m, weights=weights,
        stride=stride, out=out, seed=seed, checks=checks, params=dict(params),
    )


def load_config(path) -> ScenarioConfig:
    """Parse and validate a TOML scenario file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: parse error: {exc}") from exc
    return config_from_dict(raw, text)


def default_config(scenario: str, **overrides) -> ScenarioConfig:
    """Reasonable defaults for running a built-in scenario without a file."""
    if scenario not in SCENARIOS:
        raise ConfigError(f"scenario: unknown scenario {scenario!r}")
    dims, _, _ = SCENARIO_SHAPE[scenario]
    dim = 2 if 2 in dims else 1
    raw = {"scenario": scenario, "dim": dim, "N": 64 if dim == 2 else 256, "dt": 1e-3, "T": 0.1, "stride": 10}
    raw.update(overrides)
    return config_from_dict(raw)


def build_scenario(cfg: ScenarioConfig) -> FlowState:
    """Initial state described by a validated config."""
    dims, _, _ = SCENARIO_SHAPE[cfg.scenario]
    if cfg.dim not in dims:
        raise ConfigError(f"dim: scenario {cfg.scenario} does not support dim={cfg.dim}")
    kwargs = dict(cfg.params)
    if cfg.scenario == "continuum":
        kwargs["m"] = cfg.m
    elif cfg.scenario == "potential":
        kwargs["n"] = cfg.n
    return SCENARIOS[cfg.scenario](cfg.grid, **kwargs)
