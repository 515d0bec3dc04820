"""Tabular MDP machinery: value iteration and epsilon-greedy Q-learning.

Desk-scale oracle for the Bellman math used by the deep pipeline: the TD
target rule is identical, so agreement here verifies the update algebra
independently of any network.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

import numpy as np


@dataclass
class TabularMDP:
    transitions: np.ndarray  # (S, A, S) probabilities
    rewards: np.ndarray  # (S, A)
    gamma: float
    terminal: frozenset[int] = frozenset()
    start_states: tuple[int, ...] = (0,)

    def __post_init__(self) -> None:
        self.transitions = np.asarray(self.transitions, dtype=np.float64)
        self.rewards = np.asarray(self.rewards, dtype=np.float64)
        s, a, s2 = self.transitions.shape
        if s != s2 or self.rewards.shape != (s, a):
            raise ValueError(
                f"inconsistent tables: P {self.transitions.shape}, R {self.rewards.shape}"
            )
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must be in [0, 1), got {self.gamma}")
        sums = self.transitions.sum(axis=2)
        if not np.allclose(sums, 1.0, atol=1e-9):
            raise ValueError("each P(.|s,a) must sum to 1")

    @property
    def n_states(self) -> int:
        return self.transitions.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transitions.shape[1]


def value_iteration(
    mdp: TabularMDP, tolerance: float = 1e-10, max_iterations: int = 1_000_000
) -> tuple[np.ndarray, np.ndarray]:
    """Optimal V* and Q* by iterating the Bellman optimality backup."""
    v = np.zeros(mdp.n_states)
    for _ in range(max_iterations):
        q = mdp.rewards + mdp.gamma * mdp.transitions @ v
        v_new = q.max(axis=1)
        if np.abs(v_new - v).max() < tolerance:
            v = v_new
            break
        v = v_new
    q = mdp.rewards + mdp.gamma * mdp.transitions @ v
    return v, q


def tabular_q_learning(
    mdp: TabularMDP,
    episodes: int,
    alpha: float,
    epsilon: float,
    rng: random.Random,
    alpha_decay_power: float = 0.0,
    max_episode_len: int = 200,
) -> np.ndarray:
    """Epsilon-greedy Q-learning with the incremental TD update.

    With alpha_decay_power > 0 the per-pair rate decays as
    alpha / (1 + visits)^power, satisfying the usual convergence conditions.
    """
    q = np.zeros((mdp.n_states, mdp.n_actions))
    visits = np.zeros((mdp.n_states, mdp.n_actions), dtype=np.int64)
    states = np.arange(mdp.n_states)
    for _ in range(episodes):
        s = mdp.start_states[rng.randrange(len(mdp.start_states))]
        for _ in range(max_episode_len):
            if s in mdp.terminal:
                break
            if rng.random() < epsilon:
                a = rng.randrange(mdp.n_actions)
            else:
                a = int(np.argmax(q[s]))
            # Sample the next state from P(.|s,a) using the shared stream.
            s_next = rng.choices(states, weights=mdp.transitions[s, a])[0]
            r = mdp.rewards[s, a]
            if s_next in mdp.terminal:
                target = r
            else:
                target = r + mdp.gamma * q[s_next].max()
            visits[s, a] += 1
            rate = alpha
            if alpha_decay_power > 0.0:
                rate = alpha / (1.0 + visits[s, a]) ** alpha_decay_power
            q[s, a] += rate * (target - q[s, a])
            s = s_next
    return q


def chain_mdp(
    n_states: int = 5, gamma: float = 0.9, terminal_reward: float = 1.0, slip: float = 0.0
) -> TabularMDP:
    """Left/right chain with a rewarded absorbing right end; optional slip noise."""
    n = n_states
    transitions = np.zeros((n, 2, n))
    rewards = np.zeros((n, 2))
    goal = n - 1
    for s in range(n):
        if s == goal:
            transitions[s, :, s] = 1.0  # absorbing
            continue
        left = max(0, s - 1)
        right = s + 1
        transitions[s, 0, left] += 1.0 - slip
        transitions[s, 0, right] += slip
        transitions[s, 1, right] += 1.0 - slip
        transitions[s, 1, left] += slip
        if right == goal:
            rewards[s, 1] = terminal_reward * (1.0 - slip)
    return TabularMDP(
        transitions=transitions,
        rewards=rewards,
        gamma=gamma,
        terminal=frozenset({goal}),
        start_states=(0,),
    )
