"""Run configuration: a small TOML file with fixed sections.

Every input that affects results lives in the file, so its hash identifies
a run.  Validation errors carry the offending field and, when it can be
found in the source text, its line number.
"""

from __future__ import annotations

import hashlib
import re
import sys
from dataclasses import asdict, dataclass, field, fields, replace

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

import tomli_w

from .errors import ConfigError, DomainError
from .paths import StepController
from .timechange import TimeChangeSpec
from .verify import Thresholds

__all__ = ["SELECTORS", "RunConfig", "load_config", "parse_config", "dump_config"]

SELECTORS = (
    "validate-timechange",
    "kernels-table",
    "simulate",
    "hitting-dist",
    "verify-bm",
    "verify-zero",
    "compare",
    "filter-compare",
    "all",
)


@dataclass(frozen=True)
class Checks:
    """Sample sizes of the individual checks."""

    hitting_paths: int = 10000
    brownian_paths: int = 10000
    zero_paths: int = 10000
    r_paths: int = 10000
    compare_paths: int = 1000
    compare_halvings: int = 2
    filter_observations: int = 20
    filter_particles: tuple = (1000, 4000, 16000)
    filter_horizon: float = 1.0
    filter_resampling: str = "systematic"
    csv_paths: int = 10


@dataclass(frozen=True)
class RunConfig:
    timechange: dict = field(default_factory=lambda: TimeChangeSpec.power().to_dict())
    seed: int = 20240601
    experiment: str = "all"
    out: str = "out"
    horizon: float = 1.0
    n_paths: int = 10000
    n_particles: int = 4000
    dt_base: float = 1e-3
    dt_min: float = 1e-9
    drift_cap: float = 5.0
    terminal_guard: float = 0.1
    positivity_guard: float = 0.02
    grid_ratio: float = 0.1
    checks: Checks = field(default_factory=Checks)
    thresholds: Thresholds = field(default_factory=Thresholds)

    @property
    def spec(self) -> TimeChangeSpec:
        return TimeChangeSpec.from_dict(self.timechange)

    @property
    def controller(self) -> StepController:
        return StepController(self.dt_base, self.dt_min, self.drift_cap, self.terminal_guard,
                              self.positivity_guard, self.grid_ratio)

    def to_dict(self) -> dict:
        return {
            "run": {"seed": self.seed, "experiment": self.experiment, "out": self.out,
                    "horizon": self.horizon, "n_paths": self.n_paths,
                    "n_particles": self.n_particles},
            "timechange": dict(self.timechange),
            "numerics": {k: getattr(self, k) for k in _NUMERICS},
            "checks": {k: (list(v) if isinstance(v, tuple) else v)
                       for k, v in asdict(self.checks).items()},
            "thresholds": asdict(self.thresholds),
        }

    def hash(self) -> str:
        """SHA-256 of the canonical TOML with the output directory left out."""
        d = self.to_dict()
        d["run"] = {k: v for k, v in d["run"].items() if k != "out"}
        return hashlib.sha256(tomli_w.dumps(d).encode()).hexdigest()

    @property
    def run_id(self) -> str:
        return f"{self.hash()[:12]}-{self.seed}"

    def with_overrides(self, *, seed=None, experiment=None, out=None) -> "RunConfig":
        new = self
        if seed is not None:
            new = replace(new, seed=seed)
        if experiment is not None:
            new = replace(new, experiment=experiment)
        if out is not None:
            new = replace(new, out=out)
        _validate(new, None)
        return new


_RUN_KEYS = {"seed": int, "experiment": str, "out": str, "horizon": float, "n_paths": int,
             "n_particles": int}
_NUMERICS = ("dt_base", "dt_min", "drift_cap", "terminal_guard", "positivity_guard", "grid_ratio")


def _line_of(text, section, key):
    if text is None:
        return None
    current = None
    for no, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.match(r"\[\s*([A-Za-z0-9_.-]+)\s*\]", s)
        if m:
            current = m.group(1)
            if key is None and current == section:
                return no
            continue
        if key is not None and current == section and re.match(rf"{re.escape(key)}\s*=", s):
            return no
    return None


def _coerce(value, typ, section, key, text):
    where = f"{section}.{key}"
    line = _line_of(text, section, key)
    if typ is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"expected an integer, got {value!r}", field=where, line=line)
        return value
    if typ is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"expected a number, got {value!r}", field=where, line=line)
        return float(value)
    if typ is str:
        if not isinstance(value, str):
            raise ConfigError(f"expected a string, got {value!r}", field=where, line=line)
        return value
    if typ is tuple:
        if not isinstance(value, list) or not all(isinstance(v, int) and not isinstance(v, bool)
                                                  for v in value):
            raise ConfigError(f"expected a list of integers, got {value!r}", field=where,
                              line=line)
        return tuple(value)
    raise AssertionError(typ)


def _dataclass_section(cls, raw, section, text):
    types = {f.name: f.type for f in fields(cls)}
    kw = {}
    for key, value in raw.items():
        if key not in types:
            raise ConfigError("unknown key", field=f"{section}.{key}",
                              line=_line_of(text, section, key))
        default = getattr(cls(), key)
        typ = tuple if isinstance(default, tuple) else type(default)
        kw[key] = _coerce(value, typ, section, key, text)
    return cls(**kw)


def parse_config(text: str) -> RunConfig:
    """Parse and validate TOML text."""
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError(f"malformed TOML: {exc}", line=int(m.group(1)) if m else None) from None
    allowed = {"run", "timechange", "numerics", "checks", "thresholds"}
    for sec, body in raw.items():
        if sec not in allowed or not isinstance(body, dict):
            raise ConfigError("unknown section", field=sec, line=_line_of(text, sec, None))
    kw = {}
    for key, value in raw.get("run", {}).items():
        if key not in _RUN_KEYS:
            raise ConfigError("unknown key", field=f"run.{key}", line=_line_of(text, "run", key))
        kw[key] = _coerce(value, _RUN_KEYS[key], "run", key, text)
    for key, value in raw.get("numerics", {}).items():
        if key not in _NUMERICS:
            raise ConfigError("unknown key", field=f"numerics.{key}",
                              line=_line_of(text, "numerics", key))
        kw[key] = _coerce(value, float, "numerics", key, text)
    if "timechange" in raw:
        kw["timechange"] = dict(raw["timechange"])
    kw["checks"] = _dataclass_section(Checks, raw.get("checks", {}), "checks", text)
    kw["thresholds"] = _dataclass_section(Thresholds, raw.get("thresholds", {}), "thresholds",
                                          text)
    cfg = RunConfig(**kw)
    _validate(cfg, text)
    return cfg


def _validate(cfg: RunConfig, text):
    def fail(msg, section, key):
        raise ConfigError(msg, field=f"{section}.{key}", line=_line_of(text, section, key))

    try:
        spec = cfg.spec
    except (DomainError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(str(exc), field="timechange", line=_line_of(text, "timechange", None)) from None
    if cfg.experiment not in SELECTORS:
        fail(f"unknown experiment {cfg.experiment!r}; choose one of {', '.join(SELECTORS)}",
             "run", "experiment")
    if not 0 <= cfg.seed < 2 ** 64:
        fail("seed must be an unsigned 64-bit integer", "run", "seed")
    for key in ("horizon", "n_paths", "n_particles"):
        if not getattr(cfg, key) > 0:
            fail("must be positive", "run", key)
    if cfg.horizon > spec.t_max:
        fail("horizon exceeds timechange.t_max", "run", "horizon")
    for key in _NUMERICS:
        if not getattr(cfg, key) > 0:
            fail("must be positive", "numerics", key)
    if cfg.dt_min > cfg.dt_base:
        fail("dt_min must not exceed dt_base", "numerics", "dt_min")
    for f in fields(Checks):
        v = getattr(cfg.checks, f.name)
        if f.name == "filter_resampling":
            if v not in ("systematic", "stratified"):
                fail("must be 'systematic' or 'stratified'", "checks", f.name)
        elif f.name == "compare_halvings":
            if v < 0:
                fail("must be nonnegative", "checks", f.name)
        elif isinstance(v, tuple):
            if len(v) < 2 or any(p < 100 for p in v) or list(v) != sorted(set(v)):
                fail("need at least two increasing particle counts of 100 or more", "checks",
                     f.name)
        elif not v > 0:
            fail("must be positive", "checks", f.name)
    if cfg.n_particles not in cfg.checks.filter_particles:
        fail("must be one of checks.filter_particles", "run", "n_particles")
    if not cfg.checks.filter_horizon < spec.t_max:
        fail("must be below timechange.t_max", "checks", "filter_horizon")
    for f in fields(Thresholds):
        if not getattr(cfg.thresholds, f.name) >= 0:
            fail("must be nonnegative", "thresholds", f.name)


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text)


def dump_config(cfg: RunConfig) -> str:
    return tomli_w.dumps(cfg.to_dict())
