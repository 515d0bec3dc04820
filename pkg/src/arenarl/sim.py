"""Deterministic fixed-timestep simulation of the arena duel.

States are immutable values: `step` returns a fresh GameState, so replaying
the same (config, seed, actions) always reproduces the same trajectory and
per-tick hash. Sub-phase order inside a step is fixed:

    1. movement (axis-separated slide against walls and arena bounds)
    2. shot spawning
    3. bullet advance with swept collision
    4. hit/kill resolution, dead entities removed
    5. bullet-dodge detection
    6. cooldown / reload timers
    7. tick increment
"""

from __future__ import annotations

import hashlib
import logging
import random
import struct
from dataclasses import dataclass
from enum import Enum
from typing import Mapping, NamedTuple

from .actions import ActionSpec, decode_action, direction_vector
from .config import GameConfig
from .geometry import (
    Vec2,
    circle_rect_overlap,
    rects_overlap,
    segment_circle_hit,
    segment_intersects_rect,
    segment_point_distance,
    segment_rect_hit,
)

logger = logging.getLogger(__name__)

PLAYER = "player"
ENEMY = "enemy"
MAX_HEALTH = 3

# Wall rejection sampling gives up after this many draws: the arena is too
# crowded for the requested wall count.
_MAX_WALL_ATTEMPTS = 10_000
_SPAWN_CLEARANCE_FACTOR = 3.0  # spawn disc radius, in entity radii


class SimulationError(RuntimeError):
    """Violation of a simulation contract."""


class ArenaBuildError(SimulationError):
    """Arena generation could not satisfy the placement constraints."""


class Outcome(str, Enum):
    ONGOING = "ongoing"
    WIN = "win"
    LOSS = "loss"
    TIMEOUT = "timeout"


@dataclass(frozen=True, slots=True)
class Wall:
    min_corner: Vec2
    max_corner: Vec2

    @property
    def center(self) -> Vec2:
        return Vec2(
            (self.min_corner.x + self.max_corner.x) / 2.0,
            (self.min_corner.y + self.max_corner.y) / 2.0,
        )

    @property
    def half_extents(self) -> Vec2:
        return Vec2(
            (self.max_corner.x - self.min_corner.x) / 2.0,
            (self.max_corner.y - self.min_corner.y) / 2.0,
        )


class EntityState(NamedTuple):
    id: int
    kind: str  # PLAYER or ENEMY
    position: Vec2
    facing: Vec2  # unit vector
    health: int
    ammo: int
    cooldown: int
    reload_timer: int


class Bullet(NamedTuple):
    position: Vec2
    direction: Vec2  # unit vector
    owner: int
    speed: float


@dataclass(frozen=True, slots=True)
class GameState:
    tick: int
    entities: tuple[EntityState, ...]
    bullets: tuple[Bullet, ...]
    walls: tuple[Wall, ...]
    rng_state: tuple  # opaque random.Random state, carried for reproducibility

    def entity(self, entity_id: int) -> EntityState:
        for e in self.entities:
            if e.id == entity_id:
                return e
        raise KeyError(f"no live entity with id {entity_id}")

    def player(self) -> EntityState | None:
        for e in self.entities:
            if e.kind == PLAYER:
                return e
        return None

    def enemies(self) -> tuple[EntityState, ...]:
        return tuple(e for e in self.entities if e.kind == ENEMY)


@dataclass
class StepEvents:
    """Per-entity record of everything that happened to it during one step.

    `won` / `timed_out` mark the terminal outcome reached on this step so the
    reward functions stay pure functions of events.
    """

    entity_id: int
    shot_fired: bool = False
    hit_landed: tuple[int, ...] = ()  # target ids
    hit_taken: tuple[int, ...] = ()  # source ids
    kill: int = 0
    death: bool = False
    wall_bump: bool = False
    bullet_dodged: int = 0
    distance_delta_to_nearest_enemy: float = 0.0
    won: bool = False
    timed_out: bool = False


@dataclass(frozen=True, slots=True)
class Observation:
    """Full-information view of the arena from one live entity's perspective."""

    tick: int
    viewer_id: int
    me: EntityState
    others: tuple[EntityState, ...]
    bullets: tuple[Bullet, ...]
    walls: tuple[Wall, ...]
    config: GameConfig

    @property
    def opponents(self) -> tuple[EntityState, ...]:
        return tuple(e for e in self.others if e.kind != self.me.kind)


def position_clear(
    position: Vec2, config: GameConfig, walls: tuple[Wall, ...]
) -> bool:
    """True when a disc of entity_radius at `position` touches no wall or border."""
    r = config.entity_radius
    if not (r <= position.x <= config.arena_width - r):
        return False
    if not (r <= position.y <= config.arena_height - r):
        return False
    for wall in walls:
        if circle_rect_overlap(position, r, wall.min_corner, wall.max_corner):
            return False
    return True


def line_of_sight(a: Vec2, b: Vec2, walls: tuple[Wall, ...]) -> bool:
    for wall in walls:
        if segment_intersects_rect(a, b, wall.min_corner, wall.max_corner):
            return False
    return True


def _facing_toward(position: Vec2, target: Vec2) -> Vec2:
    delta = target - position
    if delta.x == 0.0 and delta.y == 0.0:
        return Vec2(1.0, 0.0)
    return delta.normalized()


def build_arena(config: GameConfig, seed: int) -> GameState:
    """Generate walls and spawn positions from the seeded stream.

    Walls are rejection-sampled so none overlaps another wall or a spawn
    disc; the player spawns in the left third, enemies in the right third,
    everyone at full health and ammo, facing the arena center.
    """
    rng = random.Random(seed)
    r = config.entity_radius
    clearance = _SPAWN_CLEARANCE_FACTOR * r
    attempts = 0

    def _sample_spawn(x_lo: float, x_hi: float, taken: list[Vec2]) -> Vec2:
        nonlocal attempts
        while True:
            attempts += 1
            if attempts > _MAX_WALL_ATTEMPTS:
                raise ArenaBuildError(
                    "arena too crowded: spawn sampling exceeded "
                    f"{_MAX_WALL_ATTEMPTS} attempts"
                )
            candidate = Vec2(
                rng.uniform(x_lo, x_hi),
                rng.uniform(r, config.arena_height - r),
            )
            if all(candidate.distance_to(p) >= 4.0 * r for p in taken):
                return candidate

    spawns: list[Vec2] = []
    player_pos = _sample_spawn(r, config.arena_width / 3.0, spawns)
    spawns.append(player_pos)
    enemy_positions: list[Vec2] = []
    for _ in range(config.n_enemies):
        pos = _sample_spawn(2.0 * config.arena_width / 3.0, config.arena_width - r, spawns)
        spawns.append(pos)
        enemy_positions.append(pos)

    walls: list[Wall] = []
    for _ in range(config.n_walls):
        while True:
            attempts += 1
            if attempts > _MAX_WALL_ATTEMPTS:
                raise ArenaBuildError(
                    f"arena too crowded: wall sampling exceeded {_MAX_WALL_ATTEMPTS} attempts"
                )
            w = rng.uniform(config.wall_min_size, config.wall_max_size)
            h = rng.uniform(config.wall_min_size, config.wall_max_size)
            x = rng.uniform(0.0, config.arena_width - w)
            y = rng.uniform(0.0, config.arena_height - h)
            candidate = Wall(Vec2(x, y), Vec2(x + w, y + h))
            if any(
                rects_overlap(candidate.min_corner, candidate.max_corner, o.min_corner, o.max_corner)
                for o in walls
            ):
                continue
            if any(
                circle_rect_overlap(p, clearance, candidate.min_corner, candidate.max_corner)
                for p in spawns
            ):
                continue
            walls.append(candidate)
            break

    center = Vec2(config.arena_width / 2.0, config.arena_height / 2.0)
    entities = [
        EntityState(
            id=0,
            kind=PLAYER,
            position=player_pos,
            facing=_facing_toward(player_pos, center),
            health=MAX_HEALTH,
            ammo=config.ammo_capacity,
            cooldown=0,
            reload_timer=0,
        )
    ]
    for i, pos in enumerate(enemy_positions, start=1):
        entities.append(
            EntityState(
                id=i,
                kind=ENEMY,
                position=pos,
                facing=_facing_toward(pos, center),
                health=MAX_HEALTH,
                ammo=config.ammo_capacity,
                cooldown=0,
                reload_timer=0,
            )
        )

    return GameState(
        tick=0,
        entities=tuple(entities),
        bullets=(),
        walls=tuple(walls),
        rng_state=rng.getstate(),
    )


def _nearest_opponent_distance(entity: EntityState, entities: tuple[EntityState, ...]) -> float | None:
    best: float | None = None
    for other in entities:
        if other.id == entity.id or other.kind == entity.kind:
            continue
        d = entity.position.distance_to(other.position)
        if best is None or d < best:
            best = d
    return best


def step(
    state: GameState, actions: Mapping[int, int], config: GameConfig
) -> tuple[GameState, dict[int, StepEvents]]:
    """Advance the simulation one tick.

    Every live entity must have an action; actions for dead or unknown ids
    are ignored (and logged). Returns the new state plus one StepEvents per
    pre-step entity.
    """
    live_ids = {e.id for e in state.entities}
    for entity_id in actions:
        if entity_id not in live_ids:
            logger.debug("ignoring action for dead/unknown entity %s", entity_id)
    specs: dict[int, ActionSpec] = {}
    for e in state.entities:
        if e.id not in actions:
            raise SimulationError(f"missing action for live entity {e.id}")
        specs[e.id] = decode_action(actions[e.id])

    events = {e.id: StepEvents(entity_id=e.id) for e in state.entities}
    pre_entities = state.entities

    # Phase 1: movement with axis-separated slide; x resolves before y.
    moved: list[EntityState] = []
    for e in state.entities:
        spec = specs[e.id]
        if spec.move_dir == 0:
            moved.append(e)
            continue
        unit = direction_vector(spec.move_dir)
        dx = unit.x * config.move_speed
        dy = unit.y * config.move_speed
        pos = e.position
        bump = False
        if dx != 0.0:
            candidate = Vec2(pos.x + dx, pos.y)
            if position_clear(candidate, config, state.walls):
                pos = candidate
            else:
                bump = True
        if dy != 0.0:
            candidate = Vec2(pos.x, pos.y + dy)
            if position_clear(candidate, config, state.walls):
                pos = candidate
            else:
                bump = True
        if bump:
            events[e.id].wall_bump = True
        moved.append(e._replace(position=pos, facing=unit))

    # Phase 2: shot spawning from the post-movement pose.
    bullets: list[Bullet] = list(state.bullets)
    shooters: list[EntityState] = []
    for e in moved:
        spec = specs[e.id]
        if spec.shoot and e.cooldown == 0 and e.ammo > 0:
            bullets.append(
                Bullet(
                    position=e.position + e.facing.scaled(config.entity_radius),
                    direction=e.facing,
                    owner=e.id,
                    speed=config.bullet_speed,
                )
            )
            events[e.id].shot_fired = True
            reload_timer = e.reload_timer if e.reload_timer > 0 else config.reload_ticks
            e = e._replace(ammo=e.ammo - 1, cooldown=config.shot_cooldown, reload_timer=reload_timer)
        shooters.append(e)

    # Phase 3: bullet advance with swept collision; earliest event wins.
    health = {e.id: e.health for e in shooters}
    surviving_bullets: list[Bullet] = []
    travelled: list[tuple[Vec2, Vec2, int]] = []  # (start, end, owner)
    for b in bullets:
        p0 = b.position
        p1 = p0 + b.direction.scaled(b.speed)
        best_t: float | None = None
        hit_target: int | None = None

        for e in shooters:
            if e.id == b.owner or health[e.id] <= 0:
                continue
            t = segment_circle_hit(p0, p1, e.position, config.entity_radius)
            if t is not None and (best_t is None or t < best_t):
                best_t = t
                hit_target = e.id
        for wall in state.walls:
            t = segment_rect_hit(p0, p1, wall.min_corner, wall.max_corner)
            if t is not None and (best_t is None or t < best_t):
                best_t = t
                hit_target = None
        t_exit = _arena_exit_t(p0, p1, config)
        if t_exit is not None and (best_t is None or t_exit < best_t):
            best_t = t_exit
            hit_target = None

        if best_t is None:
            surviving_bullets.append(b._replace(position=p1))
            travelled.append((p0, p1, b.owner))
            continue
        end = Vec2(p0.x + best_t * (p1.x - p0.x), p0.y + best_t * (p1.y - p0.y))
        travelled.append((p0, end, b.owner))
        if hit_target is not None:
            health[hit_target] -= 1
            events[b.owner].hit_landed = events[b.owner].hit_landed + (hit_target,)
            events[hit_target].hit_taken = events[hit_target].hit_taken + (b.owner,)
            if health[hit_target] == 0:
                events[b.owner].kill += 1
                events[hit_target].death = True

    # Phase 4: remove dead entities.
    survivors = tuple(
        e._replace(health=health[e.id]) for e in shooters if health[e.id] > 0
    )

    # Phase 5: dodge detection over each bullet's travelled segment.
    for p0, p1, owner in travelled:
        for e in survivors:
            if e.id == owner:
                continue
            d = segment_point_distance(p0, p1, e.position)
            if config.entity_radius < d <= config.dodge_radius:
                events[e.id].bullet_dodged += 1

    # Phase 6: cooldown and reload timers.
    timed: list[EntityState] = []
    for e in survivors:
        cooldown = e.cooldown - 1 if e.cooldown > 0 else 0
        ammo = e.ammo
        reload_timer = e.reload_timer
        if ammo < config.ammo_capacity:
            reload_timer -= 1
            if reload_timer <= 0:
                ammo += 1
                reload_timer = config.reload_ticks if ammo < config.ammo_capacity else 0
        else:
            reload_timer = 0
        timed.append(e._replace(cooldown=cooldown, ammo=ammo, reload_timer=reload_timer))

    new_state = GameState(
        tick=state.tick + 1,
        entities=tuple(timed),
        bullets=tuple(surviving_bullets),
        walls=state.walls,
        rng_state=state.rng_state,
    )

    # Distance deltas and terminal flags.
    post_by_id = {e.id: e for e in new_state.entities}
    for e in pre_entities:
        before = _nearest_opponent_distance(e, pre_entities)
        post = post_by_id.get(e.id)
        after = _nearest_opponent_distance(post, new_state.entities) if post else None
        if before is not None and after is not None:
            events[e.id].distance_delta_to_nearest_enemy = after - before

    result = outcome(new_state, config)
    if result is Outcome.WIN:
        for e in pre_entities:
            if e.kind == PLAYER:
                events[e.id].won = True
    elif result is Outcome.TIMEOUT:
        for e in new_state.entities:
            events[e.id].timed_out = True

    return new_state, events


def _arena_exit_t(p0: Vec2, p1: Vec2, config: GameConfig) -> float | None:
    """Earliest t where the swept point leaves the arena rectangle."""
    t_exit: float | None = None
    for start, delta, lo, hi in (
        (p0.x, p1.x - p0.x, 0.0, config.arena_width),
        (p0.y, p1.y - p0.y, 0.0, config.arena_height),
    ):
        if start < lo or start > hi:
            return 0.0
        if delta > 0.0 and start + delta > hi:
            t = (hi - start) / delta
            t_exit = t if t_exit is None else min(t_exit, t)
        elif delta < 0.0 and start + delta < lo:
            t = (lo - start) / delta
            t_exit = t if t_exit is None else min(t_exit, t)
    return t_exit


def outcome(state: GameState, config: GameConfig) -> Outcome:
    """Terminal classification; simultaneous deaths resolve to LOSS."""
    player_alive = state.player() is not None
    enemies_alive = len(state.enemies()) > 0
    if not player_alive:
        return Outcome.LOSS
    if not enemies_alive:
        return Outcome.WIN
    if state.tick >= config.max_steps:
        return Outcome.TIMEOUT
    return Outcome.ONGOING


def observe(state: GameState, viewer_id: int, config: GameConfig) -> Observation:
    me = state.entity(viewer_id)  # KeyError for dead/unknown viewers
    return Observation(
        tick=state.tick,
        viewer_id=viewer_id,
        me=me,
        others=tuple(e for e in state.entities if e.id != viewer_id),
        bullets=state.bullets,
        walls=state.walls,
        config=config,
    )


def state_hash(state: GameState) -> str:
    """Digest of the game-visible state (tick, entities, bullets, walls)."""
    h = hashlib.blake2b(digest_size=16)
    h.update(struct.pack("<q", state.tick))
    for e in state.entities:
        h.update(
            struct.pack(
                "<qddddqqqq",
                e.id,
                e.position.x,
                e.position.y,
                e.facing.x,
                e.facing.y,
                e.health,
                e.ammo,
                e.cooldown,
                e.reload_timer,
            )
        )
        h.update(e.kind.encode())
    for b in state.bullets:
        h.update(
            struct.pack(
                "<ddddqd",
                b.position.x,
                b.position.y,
                b.direction.x,
                b.direction.y,
                b.owner,
                b.speed,
            )
        )
    for w in state.walls:
        h.update(
            struct.pack(
                "<dddd", w.min_corner.x, w.min_corner.y, w.max_corner.x, w.max_corner.y
            )
        )
    return h.hexdigest()
