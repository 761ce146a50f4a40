"""Scenario configuration: TOML schema, validation, hashing, file I/O.

One human-editable TOML file describes a run: engine parameters, drive
schedule, Fock truncation, integration grid, ensemble size, tier list,
requested outputs, and the RNG seed. Every field has a default
reproducing the baseline operating point (nbar_h = 0.125, run to
t_end = 5000). Validation errors carry the dotted field path. The
config hash is a sha256 over the canonical JSON form, so equal hashes
mean equal effective inputs for deterministic tiers.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile
from dataclasses import dataclass, field, replace

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ConfigError
from .fock import ModeDim
from .params import DriveSchedule, EngineParams
from .thermo import NBAR_H_MAX

ALL_TIERS = ("quantum-lindblad", "quantum-moments", "semiclassical",
             "classical")
KNOWN_OUTPUTS = ("timeseries", "summary")

_ENGINE_FIELDS = ("omega_a", "omega_b", "g", "kappa_a", "kappa_h",
                  "kappa_b", "nbar_a", "nbar_b", "nbar_h", "nbar_init",
                  "model", "include_background", "kappa_0a", "kappa_0b",
                  "nbar_0a", "nbar_0b")


@dataclass(frozen=True)
class IntegrationSpec:
    """Deterministic-tier time grid."""
    dt: float = 0.02
    t_end: float = 5000.0
    sample_every: int = 25


@dataclass(frozen=True)
class EnsembleSpec:
    """Classical-tier ensemble size and its (finer) time grid."""
    n_traj: int = 10000
    dt: float = 0.005
    sample_every: int = 500


@dataclass(frozen=True)
class ScenarioConfig:
    engine: EngineParams = field(default_factory=EngineParams)
    dims: ModeDim = field(default_factory=lambda: ModeDim(6, 50))
    integration: IntegrationSpec = field(default_factory=IntegrationSpec)
    ensemble: EnsembleSpec = field(default_factory=EnsembleSpec)
    tiers: tuple = ALL_TIERS
    outputs: tuple = KNOWN_OUTPUTS
    seed: int = 12345

    @property
    def schedule(self) -> DriveSchedule:
        return self.engine.schedule


def default_config() -> ScenarioConfig:
    return validate_config(ScenarioConfig())


def _require(cond: bool, path: str, msg: str):
    if not cond:
        raise ConfigError(msg, field=path)


def validate_config(cfg: ScenarioConfig) -> ScenarioConfig:
    """Full cross-field validation; returns the config for chaining."""
    eng = cfg.engine
    _require(eng.nbar_h < NBAR_H_MAX, "engine.nbar_h",
             f"must be < {NBAR_H_MAX} (engine regime), got {eng.nbar_h}")
    it = cfg.integration
    _require(it.dt > 0, "integration.dt", f"must be > 0, got {it.dt}")
    _require(it.t_end > 0, "integration.t_end",
             f"must be > 0, got {it.t_end}")
    _require(isinstance(it.sample_every, int) and it.sample_every >= 1,
             "integration.sample_every",
             f"must be a positive integer, got {it.sample_every!r}")
    en = cfg.ensemble
    _require(isinstance(en.n_traj, int) and en.n_traj >= 2,
             "ensemble.n_traj", f"must be an integer >= 2, got {en.n_traj!r}")
    _require(en.dt > 0, "ensemble.dt", f"must be > 0, got {en.dt}")
    _require(isinstance(en.sample_every, int) and en.sample_every >= 1,
             "ensemble.sample_every",
             f"must be a positive integer, got {en.sample_every!r}")
    _require(len(cfg.tiers) > 0, "tiers", "at least one tier required")
    for t in cfg.tiers:
        _require(t in ALL_TIERS, "tiers",
                 f"unknown tier {t!r}; expected subset of {ALL_TIERS}")
    _require(len(set(cfg.tiers)) == len(cfg.tiers), "tiers",
             "duplicate tier names")
    for o in cfg.outputs:
        _require(o in KNOWN_OUTPUTS, "outputs",
                 f"unknown output {o!r}; expected subset of {KNOWN_OUTPUTS}")
    _require(isinstance(cfg.seed, int) and 0 <= cfg.seed < 2**64, "seed",
             f"must be an integer in [0, 2^64), got {cfg.seed!r}")
    sched = eng.schedule
    if sched.period > 0:
        _require(it.dt < sched.period * sched.duty or sched.duty in (0.0, 1.0),
                 "integration.dt", "dt must resolve the gated half-stroke")
    return cfg


def _pick(table: dict, key: str, path: str, types, default):
    val = table.get(key, default)
    if types is float:
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            raise ConfigError(f"expected a number, got {val!r}",
                              field=path)
        return float(val)
    if types is int:
        if isinstance(val, bool) or not isinstance(val, int):
            raise ConfigError(f"expected an integer, got {val!r}",
                              field=path)
        return val
    if types is bool:
        if not isinstance(val, bool):
            raise ConfigError(f"expected a boolean, got {val!r}",
                              field=path)
        return val
    if types is str:
        if not isinstance(val, str):
            raise ConfigError(f"expected a string, got {val!r}",
                              field=path)
        return val
    raise AssertionError(types)


def _check_unknown(table: dict, known, path: str):
    for key in table:
        if key not in known:
            raise ConfigError("unknown field", field=f"{path}.{key}")


def config_from_dict(doc: dict) -> ScenarioConfig:
    """Build and validate a ScenarioConfig from a parsed TOML document."""
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a table")
    _check_unknown(doc, {"engine", "schedule", "dims", "integration",
                         "ensemble", "tiers", "outputs", "seed"}, "config")

    eng_tab = doc.get("engine", {})
    if not isinstance(eng_tab, dict):
        raise ConfigError("expected a table", field="engine")
    _check_unknown(eng_tab, set(_ENGINE_FIELDS), "engine")
    base = EngineParams()
    kw = {}
    for name in _ENGINE_FIELDS:
        kind = {"model": str, "include_background": bool}.get(name, float)
        kw[name] = _pick(eng_tab, name, f"engine.{name}", kind,
                         getattr(base, name))

    sch_tab = doc.get("schedule", {})
    if not isinstance(sch_tab, dict):
        raise ConfigError("expected a table", field="schedule")
    _check_unknown(sch_tab, {"period", "duty", "phase"}, "schedule")
    period = _pick(sch_tab, "period", "schedule.period", float,
                   2.0 * math.pi / kw["omega_b"])
    duty = _pick(sch_tab, "duty", "schedule.duty", float, 0.5)
    phase = _pick(sch_tab, "phase", "schedule.phase", float, 0.0)
    try:
        schedule = DriveSchedule(period=period, duty=duty, phase=phase)
        engine = EngineParams(schedule=schedule, **kw)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), field="engine") from exc

    dims_tab = doc.get("dims", {})
    if not isinstance(dims_tab, dict):
        raise ConfigError("expected a table", field="dims")
    _check_unknown(dims_tab, {"a", "b"}, "dims")
    dims = ModeDim(_pick(dims_tab, "a", "dims.a", int, 6),
                   _pick(dims_tab, "b", "dims.b", int, 50))

    it_tab = doc.get("integration", {})
    if not isinstance(it_tab, dict):
        raise ConfigError("expected a table", field="integration")
    _check_unknown(it_tab, {"dt", "t_end", "sample_every"}, "integration")
    it = IntegrationSpec(
        dt=_pick(it_tab, "dt", "integration.dt", float, 0.02),
        t_end=_pick(it_tab, "t_end", "integration.t_end", float, 5000.0),
        sample_every=_pick(it_tab, "sample_every",
                           "integration.sample_every", int, 25))

    en_tab = doc.get("ensemble", {})
    if not isinstance(en_tab, dict):
        raise ConfigError("expected a table", field="ensemble")
    _check_unknown(en_tab, {"n_traj", "dt", "sample_every"}, "ensemble")
    en = EnsembleSpec(
        n_traj=_pick(en_tab, "n_traj", "ensemble.n_traj", int, 10000),
        dt=_pick(en_tab, "dt", "ensemble.dt", float, 0.005),
        sample_every=_pick(en_tab, "sample_every", "ensemble.sample_every",
                           int, 500))

    tiers = doc.get("tiers", list(ALL_TIERS))
    if not isinstance(tiers, list) or not all(isinstance(t, str) for t in tiers):
        raise ConfigError("expected a list of strings", field="tiers")
    outputs = doc.get("outputs", list(KNOWN_OUTPUTS))
    if not isinstance(outputs, list) or not all(isinstance(o, str) for o in outputs):
        raise ConfigError("expected a list of strings", field="outputs")
    seed = doc.get("seed", 12345)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigError(f"expected an integer, got {seed!r}",
                          field="seed")

    return validate_config(ScenarioConfig(
        engine=engine, dims=dims, integration=it, ensemble=en,
        tiers=tuple(tiers), outputs=tuple(outputs), seed=seed))


def load_config(path: str) -> ScenarioConfig:
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: invalid TOML: {exc}") from exc
    return config_from_dict(doc)


def config_to_dict(cfg: ScenarioConfig) -> dict:
    eng = {name: getattr(cfg.engine, name) for name in _ENGINE_FIELDS}
    sched = cfg.engine.schedule
    return {
        "engine": eng,
        "schedule": {"period": sched.period, "duty": sched.duty,
                     "phase": sched.phase},
        "dims": {"a": cfg.dims.dim_a, "b": cfg.dims.dim_b},
        "integration": {"dt": cfg.integration.dt,
                        "t_end": cfg.integration.t_end,
                        "sample_every": cfg.integration.sample_every},
        "ensemble": {"n_traj": cfg.ensemble.n_traj,
                     "dt": cfg.ensemble.dt,
                     "sample_every": cfg.ensemble.sample_every},
        "tiers": list(cfg.tiers),
        "outputs": list(cfg.outputs),
        "seed": cfg.seed,
    }


def config_hash(cfg: ScenarioConfig) -> str:
    text = json.dumps(config_to_dict(cfg), sort_keys=True,
                      separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(text.encode("ascii")).hexdigest()


def apply_override(cfg: ScenarioConfig, path: str, value) -> ScenarioConfig:
    """New config with the dotted-path field replaced, then revalidated."""
    doc = config_to_dict(cfg)
    parts = path.split(".")
    node = doc
    for p in parts[:-1]:
        if not isinstance(node, dict) or p not in node:
            raise ConfigError("no such config field", field=path)
        node = node[p]
    leaf = parts[-1]
    if not isinstance(node, dict) or leaf not in node:
        raise ConfigError("no such config field", field=path)
    current = node[leaf]
    if isinstance(current, bool):
        if not isinstance(value, bool):
            raise ConfigError("expected a boolean", field=path)
    elif isinstance(current, int) and not isinstance(current, bool):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError("expected an integer", field=path)
    elif isinstance(current, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError("expected a number", field=path)
        value = float(value)
    elif isinstance(current, str):
        if not isinstance(value, str):
            raise ConfigError("expected a string", field=path)
    elif isinstance(current, list):
        if not isinstance(value, list):
            raise ConfigError("expected a list", field=path)
    node[leaf] = value
    return config_from_dict(doc)


def atomic_write_text(path: str, text: str):
    """Write-temp-then-rename so readers never see partial files."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.chmod(tmp, 0o644)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
