"""Scripted opponents: a uniform-random agent and two deterministic rule tiers.

All three are pure functions of (observation, rng stream); the rule-based
variants never consume randomness and never shoot without line of sight.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from .actions import (
    ActionSpec,
    N_ACTIONS,
    angle_between,
    direction_vector,
    encode_action,
    nearest_direction,
)
from .geometry import Vec2, circle_rect_distance, clamp, ray_point_approach
from .sim import Bullet, EntityState, Observation, line_of_sight, position_clear


@dataclass(frozen=True)
class ScriptedParams:
    aim_tolerance: float = 0.20  # radians off a compass direction that still counts as aimed
    engage_distance: float = math.inf  # beyond this, advance without firing
    strafe_bias: float = 0.0  # 0 = beeline approach; >0 discounts perpendicular motion
    # Preferred duel range once the target is visible. Closer than ~1 radius
    # the muzzle offset overshoots the target, so hugging it is never useful.
    standoff_distance: float = 50.0


DEFAULT_PARAMS = ScriptedParams()

POLICY_NAMES = ("random", "rule", "rule2")


def act_random(obs: Observation, rng: random.Random) -> int:
    return rng.randrange(N_ACTIONS)


def _nearest_opponent(obs: Observation) -> EntityState | None:
    opponents = obs.opponents
    if not opponents:
        return None
    return min(opponents, key=lambda e: obs.me.position.distance_to(e.position))


def _aimed_direction(me: EntityState, target: EntityState, params: ScriptedParams) -> int | None:
    """Compass code whose heading is within aim tolerance of the target bearing."""
    to_target = target.position - me.position
    if to_target.x == 0.0 and to_target.y == 0.0:
        return 0
    code = nearest_direction(to_target)
    if angle_between(direction_vector(code), to_target) <= params.aim_tolerance:
        return code
    return None


def _approach_direction(
    obs: Observation, goal: Vec2, params: ScriptedParams, desired_distance: float = 0.0
) -> int:
    """Compass code bringing the next position closest to `desired_distance`
    from `goal`, preferring wall-free tiles."""
    me = obs.me
    config = obs.config
    to_goal = goal - me.position

    def score(code: int) -> float:
        unit = direction_vector(code)
        next_pos = me.position + unit.scaled(config.move_speed)
        distance = abs(next_pos.distance_to(goal) - desired_distance)
        if params.strafe_bias > 0.0 and (to_goal.x != 0.0 or to_goal.y != 0.0):
            perp = 1.0 - abs(unit.dot(to_goal.normalized()))
            distance -= params.strafe_bias * config.move_speed * perp
        return distance

    def clear(code: int) -> bool:
        next_pos = me.position + direction_vector(code).scaled(config.move_speed)
        return position_clear(next_pos, config, obs.walls)

    best = min(range(1, 9), key=lambda code: (score(code), code))
    if clear(best):
        return best
    # Blocked: walk clockwise from the preferred heading to the first clear
    # direction. Fixed handedness rounds obstacles instead of oscillating.
    for offset in range(1, 8):
        code = (best - 1 + offset) % 8 + 1
        if clear(code):
            return code
    return best


def _fire_condition(obs: Observation, target: EntityState, params: ScriptedParams) -> int | None:
    """Compass code to fire along, or None when shooting is not justified."""
    me = obs.me
    if me.ammo <= 0:
        return None
    distance = me.position.distance_to(target.position)
    if distance > params.engage_distance:
        return None
    code = _aimed_direction(me, target, params)
    if code is None:
        # Point-blank clause: a shot misaligned by angle theta still lands
        # when the lateral miss d*sin(theta) stays within the target radius.
        to_target = target.position - me.position
        best = nearest_direction(to_target)
        theta = angle_between(direction_vector(best), to_target)
        if distance * math.sin(theta) <= obs.config.entity_radius:
            code = best
        else:
            return None
    if not line_of_sight(me.position, target.position, obs.walls):
        return None
    return code


def act_rule_based(obs: Observation, params: ScriptedParams = DEFAULT_PARAMS) -> int:
    """Fire when aimed with clear line of sight and ammo, otherwise close in.

    With the target in sight the agent holds its standoff range; with sight
    blocked it closes straight in to regain it.
    """
    target = _nearest_opponent(obs)
    if target is None:
        return encode_action(ActionSpec(0, False))
    fire_code = _fire_condition(obs, target, params)
    if fire_code is not None:
        return encode_action(ActionSpec(fire_code, True))
    visible = line_of_sight(obs.me.position, target.position, obs.walls)
    desired = params.standoff_distance if visible else 0.0
    move = _approach_direction(obs, target.position, params, desired)
    return encode_action(ActionSpec(move, False))


def _incoming_threat(obs: Observation) -> Bullet | None:
    """First hostile bullet whose forward path passes within 2 entity radii."""
    me = obs.me
    threshold = 2.0 * obs.config.entity_radius
    for bullet in obs.bullets:
        if bullet.owner == me.id:
            continue
        t, distance = ray_point_approach(bullet.position, bullet.direction, me.position)
        if t > 0.0 and distance <= threshold:
            return bullet
    return None


def _distance_to_cover(pos: Vec2, obs: Observation) -> float:
    if obs.walls:
        return min(
            circle_rect_distance(pos, w.min_corner, w.max_corner) for w in obs.walls
        )
    # No walls: fall back to the nearest arena edge.
    return min(
        pos.x,
        pos.y,
        obs.config.arena_width - pos.x,
        obs.config.arena_height - pos.y,
    )


def _dodge_direction(obs: Observation, bullet: Bullet) -> int:
    """Perpendicular escape, picking the side that ends farther from cover."""
    candidates = []
    for perp in (bullet.direction.perpendicular(), bullet.direction.perpendicular().scaled(-1.0)):
        code = nearest_direction(perp)
        next_pos = obs.me.position + direction_vector(code).scaled(obs.config.move_speed)
        candidates.append((-_distance_to_cover(next_pos, obs), code))
    candidates.sort()
    return candidates[0][1]


def _nearest_wall_goal(obs: Observation) -> Vec2 | None:
    if not obs.walls:
        return None
    wall = min(
        obs.walls,
        key=lambda w: circle_rect_distance(obs.me.position, w.min_corner, w.max_corner),
    )
    # Aim for the closest point on the wall's perimeter; the movement clamp
    # keeps the entity hugging it from outside.
    p = obs.me.position
    return Vec2(
        clamp(p.x, wall.min_corner.x, wall.max_corner.x),
        clamp(p.y, wall.min_corner.y, wall.max_corner.y),
    )


def _shoot_if_aligned(obs: Observation, move_code: int, target: EntityState, params: ScriptedParams) -> bool:
    """While overriding movement, still fire if the move heading lines up."""
    me = obs.me
    if me.ammo <= 0 or move_code == 0:
        return False
    to_target = target.position - me.position
    if to_target.x == 0.0 and to_target.y == 0.0:
        return False
    if angle_between(direction_vector(move_code), to_target) > params.aim_tolerance:
        return False
    return line_of_sight(me.position, target.position, obs.walls)


def act_rule_based_2(obs: Observation, params: ScriptedParams = DEFAULT_PARAMS) -> int:
    """Rule-based behavior with dodge and cover-seeking overrides, in that order."""
    target = _nearest_opponent(obs)
    if target is None:
        return encode_action(ActionSpec(0, False))

    threat = _incoming_threat(obs)
    if threat is not None:
        move = _dodge_direction(obs, threat)
        return encode_action(ActionSpec(move, _shoot_if_aligned(obs, move, target, params)))

    if obs.me.health < target.health:
        goal = _nearest_wall_goal(obs)
        if goal is not None:
            move = _approach_direction(obs, goal, params)
            return encode_action(ActionSpec(move, _shoot_if_aligned(obs, move, target, params)))

    return act_rule_based(obs, params)


def make_policy(name: str, params: ScriptedParams = DEFAULT_PARAMS):
    """Policy callable (observation, rng) -> action index, selected by name."""
    if name == "random":
        return act_random
    if name == "rule":
        return lambda obs, rng: act_rule_based(obs, params)
    if name == "rule2":
        return lambda obs, rng: act_rule_based_2(obs, params)
    raise ValueError(f"unknown policy {name!r}; expected one of {POLICY_NAMES}")
