"""Basic and advanced reward functions over per-step events.

The basic reward is a plain weighted sum of event flags. The advanced reward
adds tactical and positional shaping and squashes the sum through tanh, so
its total always lies strictly inside (-1, 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .config import RewardWeights
from .sim import GameState, StepEvents, line_of_sight

_POSITIONAL_CLAMP = 0.1  # per-step cap on the approach shaping term
# tanh saturates to exactly 1.0 in float64 for |x| > ~19; pin the result to
# the open interval the contract promises.
_OPEN_BOUND = math.nextafter(1.0, 0.0)


@dataclass(frozen=True)
class RewardBreakdown:
    r_events: float
    r_tactical: float
    r_positional: float
    total: float


def basic_reward(events: StepEvents, weights: RewardWeights) -> float:
    """Weighted sum of event flags: hits, kills, damage, terminal bonuses."""
    total = 0.0
    total += weights.hit_enemy * len(events.hit_landed)
    total += weights.kill * events.kill
    total += weights.got_hit * len(events.hit_taken)
    if events.death:
        total += weights.death
    if events.won:
        total += weights.win
    if events.timed_out:
        total += weights.timeout
    return total


def _shot_was_wasted(events: StepEvents, state_before: GameState) -> bool:
    """A shot with no line of sight to the nearest opponent is wasted ammo."""
    if not events.shot_fired:
        return False
    try:
        me = state_before.entity(events.entity_id)
    except KeyError:
        return False
    opponents = [e for e in state_before.entities if e.kind != me.kind]
    if not opponents:
        return True
    nearest = min(opponents, key=lambda e: me.position.distance_to(e.position))
    return not line_of_sight(me.position, nearest.position, state_before.walls)


def advanced_reward(
    events: StepEvents,
    state_before: GameState,
    state_after: GameState,
    weights: RewardWeights,
) -> RewardBreakdown:
    """Event, tactical, and positional terms squashed through tanh."""
    if state_after.tick - state_before.tick != 1:
        raise ValueError(
            "advanced_reward needs states one tick apart, got "
            f"{state_before.tick} -> {state_after.tick}"
        )
    r_events = basic_reward(events, weights)

    r_tactical = weights.dodge * events.bullet_dodged
    if events.wall_bump:
        r_tactical += weights.wall_bump
    if _shot_was_wasted(events, state_before):
        r_tactical += weights.wasted_shot

    decrease = -events.distance_delta_to_nearest_enemy
    r_positional = max(
        -_POSITIONAL_CLAMP,
        min(_POSITIONAL_CLAMP, weights.approach_per_px * decrease),
    )

    total = math.tanh(r_events + r_tactical + r_positional)
    total = max(-_OPEN_BOUND, min(_OPEN_BOUND, total))
    return RewardBreakdown(
        r_events=r_events,
        r_tactical=r_tactical,
        r_positional=r_positional,
        total=total,
    )
