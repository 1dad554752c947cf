"""Run configuration: defaults, YAML file overrides, canonical emission."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

from .learner.trainer import TrainerConfig
from .rewards import RewardWeights
from .rollout import EnvSpec
from .scenarios import load_scenario
from .world import DynamicsConfig, FleetConfig


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    scenario: str = "scenario_a"
    scouts: int = 2
    cleaners: int = 2
    horizon: int = 150
    trash: DynamicsConfig = field(default_factory=DynamicsConfig)
    rewards: RewardWeights = field(default_factory=RewardWeights)
    trainer: TrainerConfig = field(default_factory=TrainerConfig)
    seed: int = 0
    out: str = "runs/default"

    def __post_init__(self):
        if self.scouts < 0 or self.cleaners < 0 or self.scouts + self.cleaners < 1:
            raise ConfigError("team sizes must be >= 0 with at least one agent")
        if self.horizon < 1:
            raise ConfigError("horizon must be >= 1")

    def fleet(self) -> FleetConfig:
        return FleetConfig(self.scouts, self.cleaners)

    def env(self) -> EnvSpec:
        return EnvSpec(
            grid=load_scenario(self.scenario),
            fleet=self.fleet(),
            dyn=self.trash,
            horizon=self.horizon,
            weights=self.rewards,
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["trainer"] = self.trainer.to_dict()
        return d

    def dump(self) -> str:
        """Canonical YAML: sorted keys, every field present."""
        return yaml.safe_dump(self.to_dict(), sort_keys=True, default_flow_style=False)

    def override(self, **changes) -> "RunConfig":
        top = {k: v for k, v in changes.items() if v is not None}
        return from_dict(_merge(self.to_dict(), top))


_NESTED = {"trash": DynamicsConfig, "rewards": RewardWeights, "trainer": TrainerConfig}


def _merge(base: dict, over: dict) -> dict:
    out = dict(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def _build(cls, data: dict, where: str):
    names = {f.name for f in fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {where}: {exc}") from exc


def from_dict(data: dict) -> RunConfig:
    data = dict(data or {})
    kwargs = {}
    for key, cls in _NESTED.items():
        if key in data:
            sub = data.pop(key)
            if not isinstance(sub, dict):
                raise ConfigError(f"{key} must be a mapping")
            kwargs[key] = _build(cls, sub, key)
    cfg = _build(RunConfig, {**data, **kwargs}, "config")
    return cfg


def parse(text: str) -> RunConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from exc
    if data is not None and not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    return from_dict(data or {})


def load(path: str | Path) -> RunConfig:
    return parse(Path(path).read_text())
