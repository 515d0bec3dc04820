"""Configuration dataclasses and the plain-text key-value config file format.

Config files are `key = value` lines; `#` starts a comment. Every key must
belong to exactly one of the config sections below -- unknown keys are
rejected so typos never silently fall back to defaults.
"""

from __future__ import annotations

import dataclasses
import hashlib
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping


class ConfigError(ValueError):
    """Invalid configuration value or malformed config file."""


@dataclass
class GameConfig:
    """Arena and physics constants. Distances in pixels, times in ticks."""

    arena_width: float = 1200.0
    arena_height: float = 900.0
    max_steps: int = 1000
    n_enemies: int = 1
    move_speed: float = 5.0
    bullet_speed: float = 15.0
    entity_radius: float = 20.0
    shot_cooldown: int = 10
    ammo_capacity: int = 3
    reload_ticks: int = 30
    n_walls: int = 6
    wall_min_size: float = 60.0
    wall_max_size: float = 200.0
    dodge_radius: float = 45.0

    def __post_init__(self) -> None:
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "n_walls":
                if value < 0:
                    raise ConfigError("n_walls must be >= 0")
                continue
            if value <= 0:
                raise ConfigError(f"{f.name} must be positive, got {value}")
        if self.bullet_speed <= self.move_speed:
            raise ConfigError("bullet_speed must exceed move_speed")
        if self.wall_max_size < self.wall_min_size:
            raise ConfigError("wall_max_size must be >= wall_min_size")
        if self.dodge_radius <= self.entity_radius:
            raise ConfigError("dodge_radius must exceed entity_radius")

    @property
    def diagonal(self) -> float:
        return math.sqrt(self.arena_width**2 + self.arena_height**2)


@dataclass
class RewardWeights:
    """Scalar weights for the reward terms; penalties carry their sign."""

    hit_enemy: float = 0.5
    kill: float = 1.0
    got_hit: float = -0.5
    death: float = -1.0
    win: float = 1.0
    timeout: float = -0.2
    wall_bump: float = -0.05
    dodge: float = 0.1
    wasted_shot: float = -0.02
    approach_per_px: float = 0.001

    def __post_init__(self) -> None:
        for f in fields(self):
            if not math.isfinite(getattr(self, f.name)):
                raise ConfigError(f"reward weight {f.name} must be finite")


@dataclass
class EncoderLimits:
    """Maximum entity rows fed to the network; overflow keeps the nearest."""

    max_enemies: int = 4
    max_bullets: int = 16
    max_walls: int = 16

    def __post_init__(self) -> None:
        for f in fields(self):
            if getattr(self, f.name) < 1:
                raise ConfigError(f"{f.name} must be >= 1")


@dataclass
class ModelConfig:
    """Network size preset; `small` and `large` name the two studied variants."""

    size: str = "small"
    embedding_width: int = 32
    trunk_widths: tuple[int, int] = (64, 64)
    attention_heads: int = 2

    def __post_init__(self) -> None:
        if self.size not in ("small", "large"):
            raise ConfigError(f"model size must be 'small' or 'large', got {self.size!r}")
        if self.embedding_width % self.attention_heads != 0:
            raise ConfigError("embedding_width must be divisible by attention_heads")

    @classmethod
    def preset(cls, size: str) -> "ModelConfig":
        if size == "small":
            return cls(size="small", embedding_width=32, trunk_widths=(64, 64), attention_heads=2)
        if size == "large":
            return cls(size="large", embedding_width=64, trunk_widths=(256, 128), attention_heads=4)
        raise ConfigError(f"unknown model preset {size!r}")


@dataclass
class OptimizerConfig:
    learning_rate: float = 0.001
    decay_factor: float = 0.7
    decay_every: int = 20_000
    kind: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if not 0 < self.decay_factor <= 1:
            raise ConfigError("decay_factor must be in (0, 1]")
        if self.decay_every < 1:
            raise ConfigError("decay_every must be >= 1")
        if self.kind not in ("sgd", "adam"):
            raise ConfigError(f"optimizer kind must be 'sgd' or 'adam', got {self.kind!r}")


@dataclass
class DqnConfig:
    gamma: float = 0.99
    epsilon_start: float = 0.8
    epsilon_end: float = 0.1
    epsilon_decay_fraction: float = 0.7
    target_sync_interval: int = 500
    batch_size: int = 64
    warmup_transitions: int = 1000
    buffer_capacity: int = 20_000
    # The Q side owns its optimizer (separate from the BC optimizer); this is
    # its learning rate when no explicit optimizer config is supplied.
    q_learning_rate: float = 0.001

    def __post_init__(self) -> None:
        if not 0 <= self.gamma < 1:
            raise ConfigError("gamma must be in [0, 1)")
        if self.q_learning_rate <= 0:
            raise ConfigError("q_learning_rate must be positive")
        if not 0 <= self.epsilon_end <= self.epsilon_start <= 1:
            raise ConfigError("need 0 <= epsilon_end <= epsilon_start <= 1")
        if not 0 < self.epsilon_decay_fraction <= 1:
            raise ConfigError("epsilon_decay_fraction must be in (0, 1]")
        for name in ("target_sync_interval", "batch_size", "warmup_transitions", "buffer_capacity"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")


@dataclass
class HybridSchedule:
    """Linear offline-ratio decay over the training horizon."""

    total_episodes: int = 1000
    r_initial: float = 0.8
    r_final: float = 0.2
    phase_length: int = 50

    def __post_init__(self) -> None:
        if self.total_episodes < 1:
            raise ConfigError("total_episodes must be >= 1")
        if not 0 <= self.r_final <= self.r_initial <= 1:
            raise ConfigError("need 0 <= r_final <= r_initial <= 1")
        if self.phase_length < 1:
            raise ConfigError("phase_length must be >= 1")


@dataclass
class RunConfig:
    """Merged view of every section, as resolved for one CLI run."""

    game: GameConfig = field(default_factory=GameConfig)
    rewards: RewardWeights = field(default_factory=RewardWeights)
    limits: EncoderLimits = field(default_factory=EncoderLimits)
    model: ModelConfig = field(default_factory=ModelConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    dqn: DqnConfig = field(default_factory=DqnConfig)
    schedule: HybridSchedule = field(default_factory=HybridSchedule)
    seed: int = 0


_RUN_SECTIONS = ("game", "rewards", "limits", "model", "optimizer", "dqn", "schedule")


def read_key_values(path: str | Path) -> dict[str, str]:
    """Parse a `key = value` file, ignoring blank lines and # comments."""
    result: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if key in result:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        result[key] = value.strip()
    return result


def _coerce(raw: str, target_type: Any, key: str) -> Any:
    try:
        if target_type is int:
            return int(raw)
        if target_type is float:
            return float(raw)
        if target_type is bool:
            if raw.lower() in ("true", "1", "yes"):
                return True
            if raw.lower() in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        if target_type is str:
            return raw
        if target_type == tuple[int, int]:
            parts = [int(p) for p in raw.replace(",", " ").split()]
            if len(parts) != 2:
                raise ValueError(raw)
            return (parts[0], parts[1])
    except ValueError as exc:
        raise ConfigError(f"cannot parse {key} = {raw!r} as {target_type}") from exc
    raise ConfigError(f"unsupported config field type for {key}: {target_type}")


def _field_type(f: dataclasses.Field) -> Any:
    # `from __future__ import annotations` stores field types as strings.
    mapping = {"int": int, "float": float, "bool": bool, "str": str, "tuple[int, int]": tuple[int, int]}
    return mapping.get(f.type, f.type) if isinstance(f.type, str) else f.type


def _apply_mapping(instance: Any, mapping: Mapping[str, str], consumed: set[str]) -> Any:
    values = dataclasses.asdict(instance)
    by_name = {f.name: f for f in fields(instance)}
    for key, raw in mapping.items():
        if key in by_name:
            values[key] = _coerce(raw, _field_type(by_name[key]), key)
            consumed.add(key)
    return type(instance)(**values)


def load_run_config(
    path: str | Path | None = None, overrides: Mapping[str, str] | None = None
) -> RunConfig:
    """Build a RunConfig from a config file plus flat key overrides.

    Overrides win over file values; unknown keys in either raise ConfigError.
    A `model_size` key applies the named preset before explicit model fields.
    """
    mapping: dict[str, str] = {}
    if path is not None:
        mapping.update(read_key_values(path))
    if overrides:
        mapping.update({k: v for k, v in overrides.items() if v is not None})

    consumed: set[str] = set()
    run = RunConfig()
    if "seed" in mapping:
        run.seed = _coerce(mapping["seed"], int, "seed")
        consumed.add("seed")
    if "model_size" in mapping:
        run.model = ModelConfig.preset(mapping["model_size"])
        consumed.add("model_size")
    for section in _RUN_SECTIONS:
        setattr(run, section, _apply_mapping(getattr(run, section), mapping, consumed))
    unknown = sorted(set(mapping) - consumed)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    return run


def config_fingerprint(config: GameConfig) -> str:
    """Short stable digest tying datasets and checkpoints to the arena config."""
    lines = sorted(f"{f.name}={getattr(config, f.name)!r}" for f in fields(config))
    return hashlib.sha256("\n".join(lines).encode()).hexdigest()[:12]
