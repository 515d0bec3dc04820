"""Demonstration recording, persistence, balancing, and episode-level splits.

Datasets store raw observations (not encoded features) so encoder changes
never invalidate recorded data. The on-disk format is line-delimited JSON:
one header record, one record per episode trace carrying the static walls,
then one record per sample. Each agent's trace in a recorded game is its own
episode id, so ticks within an episode are strictly increasing.
"""

from __future__ import annotations

import dataclasses
import gc
import json
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .actions import N_ACTIONS
from .config import ConfigError, GameConfig, config_fingerprint
from .sim import PLAYER, Observation, Outcome, build_arena, observe, outcome, step
from .serde import (
    bullet_from_list,
    bullet_to_list,
    entity_from_list,
    entity_to_list,
    wall_from_list,
    wall_to_list,
)

SCHEMA_VERSION = 1

Policy = Callable[[Observation, random.Random], int]


class DatasetError(RuntimeError):
    """Malformed, truncated, or incompatible dataset file."""


@dataclass(frozen=True)
class DemoSample:
    observation: Observation
    action: int
    episode_id: int
    tick: int


@dataclass
class DemoDataset:
    samples: list[DemoSample]
    source_policies: tuple[str, ...]
    config_fingerprint: str
    game_config: GameConfig
    schema_version: int = SCHEMA_VERSION

    def __len__(self) -> int:
        return len(self.samples)

    def episode_ids(self) -> list[int]:
        return sorted({s.episode_id for s in self.samples})


def record_demos(
    policy_a: Policy,
    policy_b: Policy,
    n_episodes: int,
    config: GameConfig,
    seed: int,
    policy_names: tuple[str, str] = ("rule", "rule2"),
) -> DemoDataset:
    """Play policy_a (player) against policy_b (enemies), recording both sides.

    Game i is seeded seed+i; each agent's trace becomes its own episode id
    `i * (1 + n_enemies) + slot` with the player in slot 0.
    """
    if n_episodes < 1:
        raise ValueError("n_episodes must be >= 1")
    samples: list[DemoSample] = []
    traces_per_game = 1 + config.n_enemies
    for i in range(n_episodes):
        state = build_arena(config, seed + i)
        rng_a = random.Random(f"{seed + i}:a")
        rng_b = random.Random(f"{seed + i}:b")
        while outcome(state, config) is Outcome.ONGOING:
            actions: dict[int, int] = {}
            for entity in state.entities:
                obs = observe(state, entity.id, config)
                if entity.kind == PLAYER:
                    action = policy_a(obs, rng_a)
                else:
                    action = policy_b(obs, rng_b)
                actions[entity.id] = action
                samples.append(
                    DemoSample(
                        observation=obs,
                        action=action,
                        episode_id=i * traces_per_game + entity.id,
                        tick=state.tick,
                    )
                )
            state, _ = step(state, actions, config)
    return DemoDataset(
        samples=samples,
        source_policies=tuple(policy_names),
        config_fingerprint=config_fingerprint(config),
        game_config=config,
    )


def action_histogram(dataset: DemoDataset) -> np.ndarray:
    counts = np.zeros(N_ACTIONS, dtype=np.int64)
    for s in dataset.samples:
        counts[s.action] += 1
    return counts


def balanced_weights(histogram: np.ndarray) -> np.ndarray:
    """Per-action sampling weights proportional to 1/count, normalized to 1.

    Sampling each demo with its action's weight makes the expected sampled
    action distribution uniform over the actions present.
    """
    histogram = np.asarray(histogram)
    if histogram.sum() == 0:
        raise ValueError("cannot balance an all-zero histogram")
    weights = np.zeros(len(histogram), dtype=np.float64)
    present = histogram > 0
    weights[present] = 1.0 / histogram[present]
    return weights / weights.sum()


class BalancedSampler:
    """Weighted with-replacement sampler that equalizes action frequencies."""

    def __init__(self, actions: np.ndarray, seed: int = 0):
        actions = np.asarray(actions)
        hist = np.bincount(actions, minlength=N_ACTIONS)
        weights = balanced_weights(hist)
        probs = weights[actions]
        self.probabilities = probs / probs.sum()
        self._rng = np.random.default_rng(seed)

    def draw(self, n: int) -> np.ndarray:
        return self._rng.choice(len(self.probabilities), size=n, p=self.probabilities)


def split(
    dataset: DemoDataset, validation_fraction: float, seed: int
) -> tuple[DemoDataset, DemoDataset]:
    """Partition by whole episodes, never within one; seeded and exact."""
    if not 0.0 < validation_fraction < 1.0:
        raise ValueError("validation_fraction must be in (0, 1)")
    episodes = dataset.episode_ids()
    if len(episodes) < 2:
        raise ValueError("need at least 2 episodes to split")
    shuffled = list(episodes)
    random.Random(seed).shuffle(shuffled)
    n_val = round(len(episodes) * validation_fraction)
    n_val = min(max(n_val, 1), len(episodes) - 1)
    val_ids = set(shuffled[:n_val])

    def _subset(keep: Callable[[int], bool]) -> DemoDataset:
        return DemoDataset(
            samples=[s for s in dataset.samples if keep(s.episode_id)],
            source_policies=dataset.source_policies,
            config_fingerprint=dataset.config_fingerprint,
            game_config=dataset.game_config,
        )

    return _subset(lambda e: e not in val_ids), _subset(lambda e: e in val_ids)


def save_dataset(dataset: DemoDataset, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    episode_walls: dict[int, tuple] = {}
    for s in dataset.samples:
        episode_walls.setdefault(s.episode_id, s.observation.walls)
    with path.open("w") as fh:
        header = {
            "type": "header",
            "schema_version": dataset.schema_version,
            "config_fingerprint": dataset.config_fingerprint,
            "source_policies": list(dataset.source_policies),
            "game_config": dataclasses.asdict(dataset.game_config),
            "n_samples": len(dataset.samples),
        }
        fh.write(json.dumps(header) + "\n")
        for episode_id in sorted(episode_walls):
            record = {
                "type": "episode",
                "id": episode_id,
                "walls": [wall_to_list(w) for w in episode_walls[episode_id]],
            }
            fh.write(json.dumps(record) + "\n")
        for s in dataset.samples:
            record = {
                "type": "sample",
                "episode": s.episode_id,
                "tick": s.tick,
                "viewer": s.observation.viewer_id,
                "me": entity_to_list(s.observation.me),
                "others": [entity_to_list(e) for e in s.observation.others],
                "bullets": [bullet_to_list(b) for b in s.observation.bullets],
                "action": s.action,
            }
            fh.write(json.dumps(record) + "\n")


def _parse_lines(path: Path) -> list[tuple[int, dict]]:
    """Parse all JSONL records in one pass; falls back per-line on errors."""
    numbered = [
        (lineno, line)
        for lineno, line in enumerate(path.read_text().splitlines(), start=1)
        if line.strip()
    ]
    try:
        # Single C-level parse of the whole file.
        records = json.loads("[" + ",".join(line for _, line in numbered) + "]")
        return [(lineno, record) for (lineno, _), record in zip(numbered, records)]
    except json.JSONDecodeError:
        result = []
        for lineno, line in numbered:
            try:
                result.append((lineno, json.loads(line)))
            except json.JSONDecodeError as exc:
                raise DatasetError(f"{path}:{lineno}: malformed record: {exc}") from exc
        return result


def load_dataset(path: str | Path) -> DemoDataset:
    path = Path(path)
    # Bulk-building ~15 acyclic objects per sample; the generational GC
    # otherwise rescans the growing graph and dominates the load time.
    gc_was_enabled = gc.isenabled()
    gc.disable()
    try:
        return _load_dataset_inner(path)
    finally:
        if gc_was_enabled:
            gc.enable()


def _load_dataset_inner(path: Path) -> DemoDataset:
    samples: list[DemoSample] = []
    header: dict | None = None
    episode_walls: dict[int, tuple] = {}
    game_config: GameConfig | None = None
    from_entity = entity_from_list
    from_bullet = bullet_from_list
    for lineno, record in _parse_lines(path):
        if not isinstance(record, dict):
            raise DatasetError(f"{path}:{lineno}: record must be an object")
        kind = record.get("type")
        if kind == "sample":
            if header is None or game_config is None:
                raise DatasetError(f"{path}:{lineno}: sample before header")
            episode = record["episode"]
            walls = episode_walls.get(episode)
            if walls is None:
                raise DatasetError(f"{path}:{lineno}: sample references unknown episode {episode}")
            try:
                tick = record["tick"]
                obs = Observation(
                    tick=tick,
                    viewer_id=record["viewer"],
                    me=from_entity(record["me"]),
                    others=tuple([from_entity(e) for e in record["others"]]),
                    bullets=tuple([from_bullet(b) for b in record["bullets"]]),
                    walls=walls,
                    config=game_config,
                )
                action = record["action"]
            except (KeyError, IndexError, TypeError) as exc:
                raise DatasetError(f"{path}:{lineno}: bad sample record: {exc}") from exc
            if not 0 <= action < N_ACTIONS:
                raise DatasetError(f"{path}:{lineno}: action {action} out of range")
            samples.append(DemoSample(observation=obs, action=action, episode_id=episode, tick=tick))
        elif kind == "episode":
            episode_walls[record["id"]] = tuple(
                wall_from_list(w) for w in record["walls"]
            )
        elif kind == "header":
            if record.get("schema_version") != SCHEMA_VERSION:
                raise DatasetError(
                    f"{path}:{lineno}: schema version "
                    f"{record.get('schema_version')} != {SCHEMA_VERSION}"
                )
            header = record
            try:
                game_config = GameConfig(**record["game_config"])
            except (TypeError, ConfigError) as exc:
                raise DatasetError(f"{path}:{lineno}: bad game_config: {exc}") from exc
        else:
            raise DatasetError(f"{path}:{lineno}: unknown record type {kind!r}")
    if header is None or game_config is None:
        raise DatasetError(f"{path}: missing header record")
    if len(samples) != header["n_samples"]:
        raise DatasetError(
            f"{path}: truncated dataset: header promises {header['n_samples']} samples, "
            f"found {len(samples)}"
        )
    return DemoDataset(
        samples=samples,
        source_policies=tuple(header["source_policies"]),
        config_fingerprint=header["config_fingerprint"],
        game_config=game_config,
        schema_version=header["schema_version"],
    )
