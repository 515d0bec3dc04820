"""Head-to-head match runner, aggregate metrics, and table export.

Reports carry the win/loss/timeout partition, mean episode length and
reward, shot accuracy, and the across-episode reward variance. The
delimited-table export mirrors the three-column results-table layout
(enemy type, win rate, average episode length).
"""

from __future__ import annotations

import dataclasses
import json
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .config import GameConfig, RewardWeights, config_fingerprint
from .model import PolicyModel, encode_observation, select_greedy
from .rewards import advanced_reward
from .sim import Observation, Outcome, build_arena, observe, outcome, step

Policy = Callable[[Observation, random.Random], int]


@dataclass(frozen=True)
class EvalReport:
    opponent: str
    episodes: int
    win_rate: float  # percent
    loss_rate: float
    timeout_rate: float
    mean_length: float
    mean_reward: float
    accuracy: float  # hits per shot fired; 0 when no shots
    reward_variance: float
    seeds: tuple[int, ...]
    fingerprint: str = ""  # arena-config digest the match ran under


class GreedyModelPolicy:
    """Checkpoint-driven policy: greedy argmax over the Q head."""

    def __init__(self, model: PolicyModel, limits=None):
        self.model = model
        self.limits = limits if limits is not None else model.limits

    def __call__(self, obs: Observation, rng: random.Random) -> int:
        features = encode_observation(obs, self.limits)
        return select_greedy(self.model.forward_q(features))


def run_episode(
    agent: Policy,
    opponent: Policy,
    config: GameConfig,
    seed: int,
    reward_weights: RewardWeights,
) -> tuple[Outcome, int, float, int, int]:
    """Play one seeded episode; returns (outcome, length, reward, shots, hits)."""
    state = build_arena(config, seed)
    agent_rng = random.Random(f"{seed}:agent")
    opponent_rng = random.Random(f"{seed}:opponent")
    player = state.player()
    assert player is not None
    player_id = player.id

    total_reward = 0.0
    shots = 0
    hits = 0
    while True:
        actions = {player_id: agent(observe(state, player_id, config), agent_rng)}
        for enemy in state.enemies():
            actions[enemy.id] = opponent(observe(state, enemy.id, config), opponent_rng)
        new_state, events = step(state, actions, config)
        player_events = events[player_id]
        shots += int(player_events.shot_fired)
        hits += len(player_events.hit_landed)
        total_reward += advanced_reward(player_events, state, new_state, reward_weights).total
        result = outcome(new_state, config)
        if result is not Outcome.ONGOING:
            return result, new_state.tick, total_reward, shots, hits
        state = new_state


def run_match(
    agent: Policy,
    opponent: Policy,
    n_episodes: int,
    config: GameConfig,
    seed: int,
    opponent_name: str = "opponent",
    reward_weights: RewardWeights | None = None,
    trace_sink: list[dict] | None = None,
) -> EvalReport:
    """Aggregate n seeded episodes (seed+i) into an EvalReport.

    When `trace_sink` is given, one row per episode is appended to it
    (outcome, length, reward, shots, hits) for debugging dumps.
    """
    if n_episodes < 1:
        raise ValueError("n_episodes must be >= 1")
    weights = reward_weights if reward_weights is not None else RewardWeights()
    outcomes: list[Outcome] = []
    lengths: list[int] = []
    rewards: list[float] = []
    shots = 0
    hits = 0
    seeds = tuple(seed + i for i in range(n_episodes))
    for episode_seed in seeds:
        result, length, reward, ep_shots, ep_hits = run_episode(
            agent, opponent, config, episode_seed, weights
        )
        outcomes.append(result)
        lengths.append(length)
        rewards.append(reward)
        shots += ep_shots
        hits += ep_hits
        if trace_sink is not None:
            trace_sink.append(
                {
                    "opponent": opponent_name,
                    "seed": episode_seed,
                    "outcome": result.value,
                    "length": length,
                    "reward": reward,
                    "shots": ep_shots,
                    "hits": ep_hits,
                }
            )
    n = float(n_episodes)
    return EvalReport(
        opponent=opponent_name,
        episodes=n_episodes,
        win_rate=100.0 * sum(o is Outcome.WIN for o in outcomes) / n,
        loss_rate=100.0 * sum(o is Outcome.LOSS for o in outcomes) / n,
        timeout_rate=100.0 * sum(o is Outcome.TIMEOUT for o in outcomes) / n,
        mean_length=float(np.mean(lengths)),
        mean_reward=float(np.mean(rewards)),
        accuracy=hits / shots if shots > 0 else 0.0,
        reward_variance=float(np.var(rewards)),
        seeds=seeds,
        fingerprint=config_fingerprint(config),
    )


def stability(win_rates: list[float]) -> float:
    """Population variance of a series of windowed win rates."""
    if len(win_rates) < 2:
        raise ValueError("stability needs at least 2 windows")
    return float(np.var(win_rates))


def format_table(reports: list[EvalReport]) -> str:
    """Three-column results table: enemy type, win rate, mean episode length."""
    lines = ["Enemy Type,Win Rate (%),Avg Episode Length (steps)"]
    for r in reports:
        lines.append(f"{r.opponent},{r.win_rate:.1f},{r.mean_length:.1f}")
    return "\n".join(lines) + "\n"


def export_report(
    reports: list[EvalReport], path: str | Path, format: str = "delimited-table"
) -> None:
    """Write reports as a delimited table or full structured records."""
    if not reports:
        raise ValueError("need at least one report to export")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if format == "delimited-table":
        path.write_text(format_table(reports))
    elif format == "structured-records":
        with path.open("w") as fh:
            for r in reports:
                record = dataclasses.asdict(r)
                record["seeds"] = list(record["seeds"])
                fh.write(json.dumps(record, sort_keys=True) + "\n")
    else:
        raise ValueError(f"unknown export format {format!r}")


def load_records(path: str | Path) -> list[EvalReport]:
    reports = []
    for line in Path(path).read_text().splitlines():
        record = json.loads(line)
        record["seeds"] = tuple(record["seeds"])
        reports.append(EvalReport(**record))
    return reports
