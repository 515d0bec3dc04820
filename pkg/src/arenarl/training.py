"""Learning procedures: replay buffer, DQN updates with a target network,
behavioral-cloning epochs, and the hybrid offline/online phase scheduler.

Gradient isolation contract: a BC update flows through the imitation head
plus the shared trunk and never touches the Q head; a DQN update flows
through the Q head plus the shared trunk and never touches the imitation
head. Each mode owns its optimizer, so moment state never leaks across.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, NamedTuple

import numpy as np

from .config import DqnConfig, GameConfig, HybridSchedule, OptimizerConfig, RewardWeights
from .datasets import BalancedSampler, DemoDataset
from .model import (
    EncodedObservation,
    FeatureBatch,
    PolicyModel,
    encode_observation,
    select_epsilon,
)
from .nn.losses import huber_batch, softmax_cross_entropy_batch
from .nn.optim import Optimizer, TrainingError, effective_learning_rate
from .rewards import advanced_reward
from .sim import Observation, Outcome, build_arena, observe, outcome, step

logger = logging.getLogger(__name__)

Policy = Callable[[Observation, random.Random], int]


class Transition(NamedTuple):
    observation: EncodedObservation
    action: int
    reward: float
    next_observation: EncodedObservation
    terminal: bool


class ReplayBuffer:
    """Fixed-capacity ring; once full, each push evicts the oldest transition."""

    def __init__(self, capacity: int = 20_000):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._storage: list[Transition | None] = [None] * capacity
        self._cursor = 0
        self.size = 0

    def push(self, transition: Transition) -> None:
        self._storage[self._cursor] = transition
        self._cursor = (self._cursor + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, n: int, rng: np.random.Generator) -> list[Transition]:
        """Uniform sample with replacement."""
        if self.size < n:
            raise TrainingError(f"buffer holds {self.size} transitions, need {n}")
        indices = rng.integers(0, self.size, size=n)
        return [self._storage[i] for i in indices]  # type: ignore[misc]

    def contents(self) -> list[Transition]:
        """Transitions in insertion order, oldest first."""
        if self.size < self.capacity:
            return [t for t in self._storage[: self.size]]  # type: ignore[misc]
        return self._storage[self._cursor :] + self._storage[: self._cursor]  # type: ignore[return-value]


def td_targets(
    rewards: np.ndarray, terminals: np.ndarray, max_next_q: np.ndarray, gamma: float
) -> np.ndarray:
    """y = r for terminal transitions, else r + gamma * max_a Q_target(s', a)."""
    if not np.isfinite(max_next_q).all():
        raise TrainingError("non-finite target Q-values")
    return rewards + gamma * max_next_q * ~terminals


def q_targets(batch: list[Transition], target_model: PolicyModel, gamma: float) -> np.ndarray:
    if not batch:
        raise ValueError("batch must be non-empty")
    rewards = np.array([t.reward for t in batch])
    terminals = np.array([t.terminal for t in batch], dtype=bool)
    next_fb = FeatureBatch.from_list([t.next_observation for t in batch])
    max_next_q = target_model.forward_q(next_fb).max(axis=1)
    return td_targets(rewards, terminals, max_next_q, gamma)


def dqn_step(
    model: PolicyModel,
    target_model: PolicyModel,
    buffer: ReplayBuffer,
    config: DqnConfig,
    optimizer: Optimizer,
    rng: np.random.Generator,
) -> float:
    """One Huber regression step of Q(s, a_taken) toward the TD targets.

    Syncs the target network by full copy every `target_sync_interval`
    optimizer steps.
    """
    batch = buffer.sample(config.batch_size, rng)
    targets = q_targets(batch, target_model, config.gamma)
    fb = FeatureBatch.from_list([t.observation for t in batch])
    actions = np.array([t.action for t in batch])

    q, cache = model.forward_q_batch(fb)
    rows = np.arange(len(batch))
    taken = q[rows, actions]
    loss, grad_taken = huber_batch(taken, targets)
    grad_q = np.zeros_like(q)
    grad_q[rows, actions] = grad_taken
    model.backward_q(cache, grad_q)
    optimizer.step()
    if optimizer.step_count % config.target_sync_interval == 0:
        target_model.load_state_dict(model.state_dict())
    return loss


@dataclass
class EncodedSplit:
    """Pre-encoded dataset slice: feature arrays plus aligned action labels."""

    features: FeatureBatch
    actions: np.ndarray

    def __len__(self) -> int:
        return int(self.actions.shape[0])


def encode_split(dataset: DemoDataset, limits, config: GameConfig | None = None) -> EncodedSplit:
    cfg = config if config is not None else dataset.game_config
    encoded = [encode_observation(s.observation, limits, cfg) for s in dataset.samples]
    actions = np.array([s.action for s in dataset.samples], dtype=np.int64)
    return EncodedSplit(features=FeatureBatch.from_list(encoded), actions=actions)


def bc_epoch(
    model: PolicyModel,
    train: EncodedSplit,
    validation: EncodedSplit,
    optimizer: Optimizer,
    sampler: BalancedSampler,
    batch_size: int = 512,
    n_batches: int | None = None,
) -> tuple[float, float, float]:
    """One weighted-sampled pass through the imitation head.

    Returns (mean train loss, validation loss, validation accuracy);
    validation is computed with sampling weights disabled.
    """
    if len(train) == 0 or len(validation) == 0:
        raise ValueError("bc_epoch requires non-empty train and validation splits")
    if n_batches is None:
        n_batches = max(1, len(train) // batch_size)
    losses = []
    for _ in range(n_batches):
        idx = sampler.draw(batch_size)
        fb = train.features.gather(idx)
        logits, cache = model.forward_imitation_batch(fb)
        loss, grad = softmax_cross_entropy_batch(logits, train.actions[idx])
        model.backward_imitation(cache, grad)
        optimizer.step()
        losses.append(loss)
    val_loss, val_acc = validation_metrics(model, validation, batch_size)
    return float(np.mean(losses)), val_loss, val_acc


def validation_metrics(
    model: PolicyModel, validation: EncodedSplit, batch_size: int = 512
) -> tuple[float, float]:
    """Unweighted cross-entropy and argmax accuracy over a full split."""
    total_loss = 0.0
    correct = 0
    n = len(validation)
    for start in range(0, n, batch_size):
        idx = np.arange(start, min(start + batch_size, n))
        fb = validation.features.gather(idx)
        logits, _ = model.forward_imitation_batch(fb)
        loss, _ = softmax_cross_entropy_batch(logits, validation.actions[idx])
        total_loss += loss * len(idx)
        correct += int((logits.argmax(axis=1) == validation.actions[idx]).sum())
    return total_loss / n, correct / n


# ----------------------------------------------------------------------
# Hybrid schedule
# ----------------------------------------------------------------------


def offline_ratio(t: int, schedule: HybridSchedule) -> float:
    """Linear decay from r_initial at t=0 to r_final at t=T.

    Written in lerp form so both endpoints are hit exactly in floats.
    """
    if t < 0 or t > schedule.total_episodes:
        raise ValueError(f"t must be in [0, {schedule.total_episodes}], got {t}")
    frac = t / schedule.total_episodes
    return schedule.r_initial * (1.0 - frac) + schedule.r_final * frac


def plan_phase(schedule: HybridSchedule, phase_index: int) -> list[str]:
    """Episode modes for one phase: offline block first, then online."""
    start = phase_index * schedule.phase_length
    if start >= schedule.total_episodes:
        raise ValueError(f"phase {phase_index} lies beyond the training horizon")
    length = min(schedule.phase_length, schedule.total_episodes - start)
    ratio = offline_ratio(start, schedule)
    n_offline = round(ratio * length)
    return ["offline"] * n_offline + ["online"] * (length - n_offline)


def plan_schedule(schedule: HybridSchedule) -> list[str]:
    """Concatenated phase plans covering the full horizon."""
    modes: list[str] = []
    phase = 0
    while len(modes) < schedule.total_episodes:
        modes.extend(plan_phase(schedule, phase))
        phase += 1
    return modes


# ----------------------------------------------------------------------
# Logs
# ----------------------------------------------------------------------


@dataclass
class EpisodeRecord:
    index: int
    mode: str  # "offline" or "online"
    reward: float
    length: int
    win: bool
    loss: float  # mean training loss over the episode's updates (nan if none)
    epsilon: float
    learning_rate: float


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    val_accuracy: float


@dataclass
class TrainingLog:
    episodes: list[EpisodeRecord] = field(default_factory=list)
    epochs: list[EpochRecord] = field(default_factory=list)
    best_epoch: int | None = None
    aborted: bool = False

    def summary(self) -> str:
        """Small delimited summary table: one row per training mode."""
        lines = ["mode,episodes,wins,mean_reward,mean_loss"]
        for mode in ("offline", "online"):
            rows = [e for e in self.episodes if e.mode == mode]
            if not rows:
                continue
            losses = [e.loss for e in rows if not math.isnan(e.loss)]
            mean_loss = f"{sum(losses) / len(losses):.4f}" if losses else "nan"
            mean_reward = sum(e.reward for e in rows) / len(rows)
            wins = sum(e.win for e in rows)
            lines.append(f"{mode},{len(rows)},{wins},{mean_reward:.4f},{mean_loss}")
        return "\n".join(lines) + "\n"

    def win_rates(self, window: int) -> list[float]:
        """Win rate per consecutive window of online episodes."""
        online = [e for e in self.episodes if e.mode == "online"]
        rates = []
        for start in range(0, len(online) - window + 1, window):
            chunk = online[start : start + window]
            rates.append(sum(e.win for e in chunk) / window)
        return rates

    def save(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w") as fh:
            meta = {"type": "meta", "best_epoch": self.best_epoch, "aborted": self.aborted}
            fh.write(json.dumps(meta) + "\n")
            for e in self.epochs:
                fh.write(json.dumps({"type": "epoch", **e.__dict__}) + "\n")
            for e in self.episodes:
                fh.write(json.dumps({"type": "episode", **e.__dict__}) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "TrainingLog":
        log = cls()
        for line in Path(path).read_text().splitlines():
            record = json.loads(line)
            kind = record.pop("type")
            if kind == "meta":
                log.best_epoch = record["best_epoch"]
                log.aborted = record["aborted"]
            elif kind == "epoch":
                log.epochs.append(EpochRecord(**record))
            elif kind == "episode":
                log.episodes.append(EpisodeRecord(**record))
        return log


# ----------------------------------------------------------------------
# Pretraining (behavioral cloning)
# ----------------------------------------------------------------------


def run_pretraining(
    model: PolicyModel,
    train: EncodedSplit,
    validation: EncodedSplit,
    epochs: int = 300,
    optimizer_config: OptimizerConfig | None = None,
    batch_size: int = 512,
    seed: int = 0,
) -> TrainingLog:
    """BC epochs with per-epoch validation; keeps the best-validation weights.

    The model is left holding the best-validation checkpoint (early keep,
    not early stop); the log records every epoch.
    """
    log = TrainingLog()
    if epochs == 0:
        return log
    optimizer = Optimizer(model.bc_view_params, optimizer_config or OptimizerConfig())
    sampler = BalancedSampler(train.actions, seed=seed)
    best_val = np.inf
    best_state = model.state_dict()
    for epoch in range(epochs):
        train_loss, val_loss, val_acc = bc_epoch(
            model, train, validation, optimizer, sampler, batch_size
        )
        log.epochs.append(EpochRecord(epoch, train_loss, val_loss, val_acc))
        if val_loss < best_val:
            best_val = val_loss
            best_state = model.state_dict()
            log.best_epoch = epoch
    model.load_state_dict(best_state)
    return log


# ----------------------------------------------------------------------
# Hybrid offline/online training
# ----------------------------------------------------------------------


def transfer_imitation_to_q(
    model: PolicyModel, scale: float = 1.0, probe: FeatureBatch | None = None
) -> None:
    """Copy imitation-head weights into the Q head (scaled), optionally
    calibrating the bias so the mean max-Q over `probe` starts at zero.

    A one-time bridge between the learning modes: right after cloning, the
    greedy argmax over the copied logits reproduces the imitation policy, so
    online training starts from teacher-level behavior instead of a random
    Q head. Argmax is invariant to the scale and to the uniform bias shift;
    the zero-mean calibration prevents optimistic bootstrapping (targets
    r + gamma*max_a Q inflating every visited action toward the copied
    maximum before DQN has learned anything).
    """
    model.q_head.weight.value[...] = model.imitation_head.weight.value * scale
    model.q_head.bias.value[...] = model.imitation_head.bias.value * scale
    if probe is not None and probe.size > 0:
        q = model.forward_q(probe)
        model.q_head.bias.value -= q.max(axis=1).mean()


def epsilon_at(online_index: int, total_online: int, config: DqnConfig) -> float:
    """Linear decay over the first `epsilon_decay_fraction` of online episodes."""
    horizon = max(1, round(config.epsilon_decay_fraction * total_online))
    frac = min(1.0, online_index / horizon)
    return config.epsilon_start + frac * (config.epsilon_end - config.epsilon_start)


def play_online_episode(
    model: PolicyModel,
    opponent: Policy,
    game_config: GameConfig,
    dqn_config: DqnConfig,
    reward_weights: RewardWeights,
    limits,
    buffer: ReplayBuffer,
    epsilon: float,
    episode_seed: int,
    target_model: PolicyModel,
    optimizer: Optimizer,
    np_rng: np.random.Generator,
) -> tuple[float, int, bool, float]:
    """One environment episode with epsilon-greedy Q-head control.

    Pushes a transition per step and runs a dqn_step after warmup.
    Returns (reward sum, length, win, mean loss).
    """
    state = build_arena(game_config, episode_seed)
    action_rng = random.Random(f"{episode_seed}:agent")
    opponent_rng = random.Random(f"{episode_seed}:opponent")
    player = state.player()
    assert player is not None
    player_id = player.id

    total_reward = 0.0
    losses: list[float] = []
    encoded = encode_observation(observe(state, player_id, game_config), limits)
    while True:
        q = model.forward_q(encoded)
        action = select_epsilon(q, epsilon, action_rng)
        actions = {player_id: action}
        for enemy in state.enemies():
            actions[enemy.id] = opponent(observe(state, enemy.id, game_config), opponent_rng)
        new_state, events = step(state, actions, game_config)
        result = outcome(new_state, game_config)
        terminal = result is not Outcome.ONGOING

        reward = advanced_reward(events[player_id], state, new_state, reward_weights).total
        total_reward += reward
        if terminal or new_state.player() is None:
            # Terminal transitions bootstrap nothing; reuse the last encoding.
            next_encoded = encoded
        else:
            next_encoded = encode_observation(observe(new_state, player_id, game_config), limits)
        buffer.push(Transition(encoded, action, reward, next_encoded, terminal))

        if buffer.size >= dqn_config.warmup_transitions:
            losses.append(dqn_step(model, target_model, buffer, dqn_config, optimizer, np_rng))

        if terminal:
            return total_reward, new_state.tick, result is Outcome.WIN, (
                float(np.mean(losses)) if losses else float("nan")
            )
        state = new_state
        encoded = next_encoded


def run_hybrid_training(
    model: PolicyModel,
    schedule: HybridSchedule,
    dataset: DemoDataset,
    game_config: GameConfig,
    dqn_config: DqnConfig,
    reward_weights: RewardWeights,
    opponent: Policy,
    limits,
    seed: int = 0,
    bc_optimizer_config: OptimizerConfig | None = None,
    q_optimizer_config: OptimizerConfig | None = None,
    bc_batch_size: int = 512,
    offline_batches_per_episode: int = 8,
    seed_q_from_imitation: bool = True,
    progress: Callable[[EpisodeRecord], None] | None = None,
) -> TrainingLog:
    """Phase-planned offline/online training per the decay schedule.

    Offline episodes run BC minibatches on a fresh weighted resample; online
    episodes interact with the environment under epsilon-greedy control. By
    default the Q head is seeded from the imitation head once at the start so
    greedy behavior begins at the cloned policy. On a non-finite loss the
    last completed episode's weights are restored and the log is returned
    with `aborted` set.
    """
    modes = plan_schedule(schedule)
    total_online = sum(1 for m in modes if m == "online")
    bc_config = bc_optimizer_config or OptimizerConfig()
    if q_optimizer_config is None:
        q_optimizer_config = dataclasses.replace(
            bc_config, learning_rate=dqn_config.q_learning_rate
        )
    bc_optimizer = Optimizer(model.bc_view_params, bc_config)
    q_optimizer = Optimizer(model.q_view_params, q_optimizer_config)

    encoded_all: EncodedSplit | None = None
    sampler: BalancedSampler | None = None
    if any(m == "offline" for m in modes):
        if len(dataset) == 0:
            raise ValueError("offline episodes require a non-empty demonstration dataset")
        encoded_all = encode_split(dataset, limits, game_config)
        sampler = BalancedSampler(encoded_all.actions, seed=seed)

    if seed_q_from_imitation:
        probe = None
        if encoded_all is not None:
            size = min(512, len(encoded_all))
            probe = encoded_all.features.gather(np.arange(size))
        transfer_imitation_to_q(model, scale=0.25, probe=probe)

    target_model = PolicyModel(model.model_config, model.limits, seed=0)
    target_model.load_state_dict(model.state_dict())
    buffer = ReplayBuffer(dqn_config.buffer_capacity)
    np_rng = np.random.default_rng(seed)

    log = TrainingLog()
    last_good = model.state_dict()
    online_index = 0
    for index, mode in enumerate(modes):
        epsilon = epsilon_at(online_index, total_online, dqn_config)
        try:
            if mode == "offline":
                assert encoded_all is not None and sampler is not None
                batch_losses = []
                for _ in range(offline_batches_per_episode):
                    idx = sampler.draw(bc_batch_size)
                    fb = encoded_all.features.gather(idx)
                    logits, cache = model.forward_imitation_batch(fb)
                    loss, grad = softmax_cross_entropy_batch(logits, encoded_all.actions[idx])
                    model.backward_imitation(cache, grad)
                    bc_optimizer.step()
                    batch_losses.append(loss)
                record = EpisodeRecord(
                    index=index,
                    mode="offline",
                    reward=0.0,
                    length=0,
                    win=False,
                    loss=float(np.mean(batch_losses)),
                    epsilon=epsilon,
                    learning_rate=effective_learning_rate(
                        bc_optimizer.config, bc_optimizer.step_count
                    ),
                )
            else:
                reward, length, win, loss = play_online_episode(
                    model,
                    opponent,
                    game_config,
                    dqn_config,
                    reward_weights,
                    limits,
                    buffer,
                    epsilon,
                    episode_seed=seed + index,
                    target_model=target_model,
                    optimizer=q_optimizer,
                    np_rng=np_rng,
                )
                record = EpisodeRecord(
                    index=index,
                    mode="online",
                    reward=reward,
                    length=length,
                    win=win,
                    loss=loss,
                    epsilon=epsilon,
                    learning_rate=effective_learning_rate(
                        q_optimizer.config, q_optimizer.step_count
                    ),
                )
                online_index += 1
        except TrainingError as exc:
            logger.error("aborting at episode %d: %s", index, exc)
            model.load_state_dict(last_good)
            log.aborted = True
            return log
        log.episodes.append(record)
        last_good = model.state_dict()
        if progress is not None:
            progress(record)
    return log
