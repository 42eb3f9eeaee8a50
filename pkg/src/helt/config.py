"""Run configuration: a JSON document with documented defaults.

Every section is optional; an empty object ``{}`` is a valid config.  Keys::

    seed, deterministic, workers, output_dir
    env:        horizon, style (balanced | cautious | aggressive)
    learner:    fields of LearnerConfig
    league:     fields of LeagueConfig
    matchup:    gamma_smooth, eta
    pool:       path (JSONL; generated when null), n_per_level, seed
    subset:     size, level_counts (S, A, B, C; scaled from 15/15/10/10 when null)
    evaluation: n_matches, opening_window, counter_window

Relative pool paths resolve against the config file's directory.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any

from .errors import ConfigError
from .game import DEFAULT_HORIZON, LEVELS, CharacterSpec, Style, StyleReward
from .io import atomic_write_text, canonical_json, stable_hash
from .league import LeagueConfig
from .pool import generate_pool, load_pool, scaled_level_counts, select_subset
from .ppo import LearnerConfig

OUTPUT_ENV = "HELT_OUTPUT_DIR"


@dataclass(frozen=True)
class EnvConfig:
    horizon: int = DEFAULT_HORIZON
    style: str = "balanced"

    def __post_init__(self) -> None:
        if self.horizon < 1:
            raise ConfigError("env.horizon", "must be >= 1")
        if self.style not in {s.value for s in Style}:
            raise ConfigError("env.style", f"unknown style {self.style!r}")

    def reward(self) -> StyleReward:
        return StyleReward.preset(self.style)


@dataclass(frozen=True)
class MatchupConfig:
    gamma_smooth: float = 0.99
    eta: float = 0.1

    def __post_init__(self) -> None:
        if not 0 <= self.gamma_smooth <= 1:
            raise ConfigError("matchup.gamma_smooth", "must lie in [0, 1]")
        if not 0 <= self.eta <= 1:
            raise ConfigError("matchup.eta", "must lie in [0, 1]")


@dataclass(frozen=True)
class PoolConfig:
    path: str | None = None
    n_per_level: int = 3
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_per_level < 1:
            raise ConfigError("pool.n_per_level", "must be >= 1")


@dataclass(frozen=True)
class SubsetConfig:
    size: int = 6
    level_counts: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        if self.size < 1:
            raise ConfigError("subset.size", "must be >= 1")
        if self.level_counts is not None:
            if len(self.level_counts) != len(LEVELS):
                raise ConfigError("subset.level_counts", f"needs {len(LEVELS)} entries")
            object.__setattr__(self, "level_counts", tuple(int(c) for c in self.level_counts))

    def counts(self) -> tuple[int, ...]:
        return self.level_counts or scaled_level_counts(self.size)


@dataclass(frozen=True)
class EvalConfig:
    n_matches: int = 500
    opening_window: int = 90
    counter_window: int = 30

    def __post_init__(self) -> None:
        for name in ("opening_window", "counter_window"):
            if getattr(self, name) < 1:
                raise ConfigError(f"evaluation.{name}", "must be >= 1")
        if self.n_matches < 0:
            raise ConfigError("evaluation.n_matches", "must be >= 0")


_SECTIONS = {"env": EnvConfig, "learner": LearnerConfig, "league": LeagueConfig,
             "matchup": MatchupConfig, "pool": PoolConfig, "subset": SubsetConfig,
             "evaluation": EvalConfig}


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    deterministic: bool = True
    workers: int = 1
    output_dir: str = "runs"
    env: EnvConfig = field(default_factory=EnvConfig)
    learner: LearnerConfig = field(default_factory=LearnerConfig)
    league: LeagueConfig = field(default_factory=LeagueConfig)
    matchup: MatchupConfig = field(default_factory=MatchupConfig)
    pool: PoolConfig = field(default_factory=PoolConfig)
    subset: SubsetConfig = field(default_factory=SubsetConfig)
    evaluation: EvalConfig = field(default_factory=EvalConfig)

    def __post_init__(self) -> None:
        if self.workers < 1:
            raise ConfigError("workers", "must be >= 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        if d["subset"]["level_counts"] is not None:
            d["subset"]["level_counts"] = list(d["subset"]["level_counts"])
        return d

    def config_hash(self) -> str:
        return stable_hash(self.to_dict())

    def characters(self) -> list[CharacterSpec]:
        if self.pool.path is None:
            return generate_pool(self.pool.n_per_level, self.pool.seed)
        return load_pool(self.pool.path)

    def split(self) -> tuple[list[CharacterSpec], list[CharacterSpec]]:
        """(familiar, held-out) characters of the configured pool."""
        chars = self.characters()
        familiar, held = select_subset(chars, self.subset.counts())
        by_id = {c.char_id: c for c in chars}
        return [by_id[i] for i in familiar], [by_id[i] for i in held]

    def output_root(self) -> Path:
        return Path(os.environ.get(OUTPUT_ENV) or self.output_dir)


def _section(cls, data: Any, name: str):
    if not isinstance(data, dict):
        raise ConfigError(name, "must be an object")
    known = {f.name for f in fields(cls)}
    for key in data:
        if key not in known:
            raise ConfigError(f"{name}.{key}", "unknown field")
    kwargs = {}
    for f in fields(cls):
        if f.name in data:
            value = data[f.name]
            if isinstance(value, list):
                value = tuple(value)
            kwargs[f.name] = value
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(name, str(exc)) from None


def from_dict(data: dict, base_dir: Path | None = None) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    top = {f.name for f in fields(RunConfig)}
    for key in data:
        if key not in top:
            raise ConfigError(key, "unknown field")
    kwargs: dict[str, Any] = {}
    for key in ("seed", "workers"):
        if key in data:
            if not isinstance(data[key], int) or isinstance(data[key], bool):
                raise ConfigError(key, "must be an integer")
            kwargs[key] = data[key]
    if "deterministic" in data:
        if not isinstance(data["deterministic"], bool):
            raise ConfigError("deterministic", "must be a boolean")
        kwargs["deterministic"] = data["deterministic"]
    if "output_dir" in data:
        kwargs["output_dir"] = str(data["output_dir"])
    for name, cls in _SECTIONS.items():
        if name in data:
            kwargs[name] = _section(cls, data[name], name)
    cfg = RunConfig(**kwargs)
    if cfg.pool.path is not None and base_dir is not None and not Path(cfg.pool.path).is_absolute():
        cfg = replace(cfg, pool=replace(cfg.pool, path=str((base_dir / cfg.pool.path).resolve())))
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    """Cross-field checks: the pool file exists and the subset fits inside it."""
    if cfg.pool.path is not None and not Path(cfg.pool.path).is_file():
        raise ConfigError("pool.path", f"file not found: {cfg.pool.path}")
    familiar, _ = cfg.split()
    if len(familiar) < 1:
        raise ConfigError("subset.level_counts", "selects no characters")


def load_config(path: str | os.PathLike) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise ConfigError("<file>", f"config file not found: {path}") from None
    try:
        data = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"invalid JSON: {exc}") from None
    return from_dict(data, path.parent)


def dump_config(cfg: RunConfig, path: str | os.PathLike) -> Path:
    return atomic_write_text(path, canonical_json(cfg.to_dict()) + "\n")
