"""Experiment configuration: nested dataclasses loaded from and written to YAML."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from ..agent import AgentConfig
from ..baselines.ensemble import EnsembleConfig
from ..errors import ConfigError
from ..synthetic import GeneratorConfig

AGENTS = ("dyqn-or", "dyqn-and", "partial-or", "partial-and", "random", "always-green",
          "fully-observed", "human-baseline")


@dataclass
class MemoryConfig:
    capacity: int = 100_000
    thresholds: tuple[float, float, float] = (0.02, 0.1, 0.3)
    probs: tuple[float, float, float, float] = (0.01, 0.04, 0.15, 0.8)
    decay: float = 0.999

    def __post_init__(self):
        self.thresholds = tuple(float(t) for t in self.thresholds)
        self.probs = tuple(float(p) for p in self.probs)


@dataclass
class ExperimentConfig:
    seed: int = 0
    # 126 / 1374, the published test share
    test_fraction: float = 126 / 1374
    # final test evaluations averaged in summaries
    last_n: int = 10
    min_decisions: int = 3
    kfold_k: int = 10
    kfold_repeats: int = 3
    compare_agents: tuple[str, ...] = AGENTS
    data: GeneratorConfig = field(default_factory=GeneratorConfig)
    agent: AgentConfig = field(default_factory=AgentConfig)
    memory: MemoryConfig = field(default_factory=MemoryConfig)
    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)

    def __post_init__(self):
        self.compare_agents = tuple(self.compare_agents)
        unknown = set(self.compare_agents) - set(AGENTS)
        if unknown:
            raise ConfigError(f"unknown agents in compare_agents: {sorted(unknown)}")
        if not 0 < self.test_fraction < 1:
            raise ConfigError("test_fraction must lie in (0, 1)")
        if self.kfold_k < 2:
            raise ConfigError("kfold_k must be >= 2")


_SECTIONS = {"data": GeneratorConfig, "agent": AgentConfig, "memory": MemoryConfig, "ensemble": EnsembleConfig}


def _build(cls, raw: dict[str, Any], where: str):
    if not isinstance(raw, dict):
        raise ConfigError(f"{where}: expected a mapping")
    names = {f.name for f in dataclasses.fields(cls) if f.init}
    unknown = set(raw) - names
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    try:
        return cls(**raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def config_from_dict(raw: dict[str, Any] | None) -> ExperimentConfig:
    raw = dict(raw or {})
    sections = {}
    for key, cls in _SECTIONS.items():
        if key in raw:
            sections[key] = _build(cls, raw.pop(key), key)
    top = _build(ExperimentConfig, raw, "config")
    return dataclasses.replace(top, **sections) if sections else top


def load_config(path: str | Path | None) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    try:
        raw = yaml.safe_load(Path(path).read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return config_from_dict(raw)


def _plain(obj):
    if dataclasses.is_dataclass(obj):
        return {f.name: _plain(getattr(obj, f.name)) for f in dataclasses.fields(obj) if f.init}
    if isinstance(obj, (list, tuple)):
        return [_plain(x) for x in obj]
    return obj


def config_to_dict(config: ExperimentConfig) -> dict:
    return _plain(config)


def dump_config(config: ExperimentConfig, path: str | Path) -> None:
    Path(path).write_text(yaml.safe_dump(config_to_dict(config), sort_keys=False))
