"""Simulation core: arena generation, the step phases, outcomes, observation."""

import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from arenarl.actions import ActionSpec, encode_action
from arenarl.config import GameConfig
from arenarl.geometry import Vec2, circle_rect_overlap
from arenarl.sim import (
    ArenaBuildError,
    Bullet,
    EntityState,
    ENEMY,
    GameState,
    Outcome,
    PLAYER,
    SimulationError,
    Wall,
    build_arena,
    observe,
    outcome,
    state_hash,
    step,
)

STAY = encode_action(ActionSpec(0, False))
EAST = encode_action(ActionSpec(3, False))
SHOOT_EAST = encode_action(ActionSpec(3, True))
SHOOT_STAY = encode_action(ActionSpec(0, True))


def make_state(entities, bullets=(), walls=(), tick=0):
    return GameState(
        tick=tick,
        entities=tuple(entities),
        bullets=tuple(bullets),
        walls=tuple(walls),
        rng_state=random.Random(0).getstate(),
    )


def make_entity(eid, kind, x, y, facing=(1.0, 0.0), health=3, ammo=3, cooldown=0, reload_timer=0):
    return EntityState(
        id=eid,
        kind=kind,
        position=Vec2(x, y),
        facing=Vec2(*facing),
        health=health,
        ammo=ammo,
        cooldown=cooldown,
        reload_timer=reload_timer,
    )


def open_config(**kwargs):
    return GameConfig(n_walls=0, **kwargs) if "n_walls" not in kwargs else GameConfig(**kwargs)


class TestBuildArena:
    def test_same_seed_identical_field_for_field(self):
        cfg = GameConfig()
        a = build_arena(cfg, 7)
        b = build_arena(cfg, 7)
        assert a == b

    def test_different_seeds_differ(self):
        cfg = GameConfig()
        assert build_arena(cfg, 1) != build_arena(cfg, 2)

    def test_zero_walls(self):
        state = build_arena(GameConfig(n_walls=0), 3)
        assert state.walls == ()

    def test_default_healths(self):
        state = build_arena(GameConfig(), 5)
        player = state.player()
        assert player is not None and player.health == 3
        enemies = state.enemies()
        assert len(enemies) == 1 and enemies[0].health == 3

    def test_spawn_regions(self):
        cfg = GameConfig()
        for seed in range(10):
            state = build_arena(cfg, seed)
            player = state.player()
            assert player.position.x <= cfg.arena_width / 3.0
            for enemy in state.enemies():
                assert enemy.position.x >= 2.0 * cfg.arena_width / 3.0

    def test_walls_avoid_spawns_and_each_other(self):
        cfg = GameConfig()
        for seed in range(10):
            state = build_arena(cfg, seed)
            assert len(state.walls) == cfg.n_walls
            for e in state.entities:
                for w in state.walls:
                    assert not circle_rect_overlap(
                        e.position, cfg.entity_radius, w.min_corner, w.max_corner
                    )

    def test_facing_toward_center_unit(self):
        state = build_arena(GameConfig(), 11)
        for e in state.entities:
            assert e.facing.norm() == pytest.approx(1.0)

    def test_overcrowded_arena_raises(self):
        cfg = GameConfig(n_walls=400, wall_min_size=150.0, wall_max_size=200.0)
        with pytest.raises(ArenaBuildError):
            build_arena(cfg, 0)

    def test_multi_enemy(self):
        state = build_arena(GameConfig(n_enemies=3), 0)
        assert len(state.enemies()) == 3


class TestStepMovement:
    def test_stay_is_fixed_point(self):
        cfg = open_config()
        state = build_arena(cfg, 0)
        new, _ = step(state, {e.id: STAY for e in state.entities}, cfg)
        assert new.tick == state.tick + 1
        for before, after in zip(state.entities, new.entities):
            assert before.position == after.position

    def test_move_east_arithmetic(self):
        cfg = open_config()
        e0 = make_entity(0, PLAYER, 600.0, 450.0)
        e1 = make_entity(1, ENEMY, 100.0, 100.0)
        state = make_state([e0, e1])
        new, _ = step(state, {0: EAST, 1: STAY}, cfg)
        assert new.entity(0).position == Vec2(605.0, 450.0)

    def test_diagonal_move_is_unit_scaled(self):
        cfg = open_config()
        e0 = make_entity(0, PLAYER, 600.0, 450.0)
        e1 = make_entity(1, ENEMY, 100.0, 100.0)
        state = make_state([e0, e1])
        ne = encode_action(ActionSpec(2, False))
        new, _ = step(state, {0: ne, 1: STAY}, cfg)
        moved = new.entity(0).position - Vec2(600.0, 450.0)
        assert moved.norm() == pytest.approx(cfg.move_speed)

    def test_boundary_clamp_records_wall_bump(self):
        cfg = open_config()
        e0 = make_entity(0, PLAYER, cfg.arena_width - cfg.entity_radius, 450.0)
        e1 = make_entity(1, ENEMY, 100.0, 100.0)
        state = make_state([e0, e1])
        new, events = step(state, {0: EAST, 1: STAY}, cfg)
        assert new.entity(0).position.x == cfg.arena_width - cfg.entity_radius
        assert events[0].wall_bump

    def test_axis_separated_slide_along_wall(self):
        cfg = open_config()
        wall = Wall(Vec2(640.0, 0.0), Vec2(700.0, 900.0))
        # Moving NE into the wall: x blocked, y (north) still free.
        e0 = make_entity(0, PLAYER, 619.0, 450.0)
        e1 = make_entity(1, ENEMY, 100.0, 100.0)
        state = make_state([e0, e1], walls=[wall])
        ne = encode_action(ActionSpec(2, False))
        new, events = step(state, {0: ne, 1: STAY}, cfg)
        pos = new.entity(0).position
        assert pos.x == 619.0  # blocked axis zeroed
        assert pos.y < 450.0  # free axis slid
        assert events[0].wall_bump

    def test_facing_updates_to_move_direction(self):
        cfg = open_config()
        e0 = make_entity(0, PLAYER, 600.0, 450.0, facing=(0.0, -1.0))
        e1 = make_entity(1, ENEMY, 100.0, 100.0)
        state = make_state([e0, e1])
        new, _ = step(state, {0: EAST, 1: STAY}, cfg)
        assert new.entity(0).facing == Vec2(1.0, 0.0)

    def test_missing_action_for_live_entity_raises(self):
        cfg = open_config()
        state = build_arena(cfg, 0)
        with pytest.raises(SimulationError):
            step(state, {0: STAY}, cfg)

    def test_action_for_unknown_entity_ignored(self):
        cfg = open_config()
        state = build_arena(cfg, 0)
        actions = {e.id: STAY for e in state.entities}
        actions[99] = EAST
        new, events = step(state, actions, cfg)
        assert 99 not in events

    def test_malformed_action_raises(self):
        cfg = open_config()
        state = build_arena(cfg, 0)
        with pytest.raises(ValueError):
            step(state, {e.id: 42 for e in state.entities}, cfg)


class TestStepShooting:
    def test_bullet_one_px_away_hits(self):
        # Swept-collision oracle (tests/test_geometry.py) pins the same case.
        cfg = open_config()
        e0 = make_entity(0, PLAYER, 100.0, 450.0)
        e1 = make_entity(1, ENEMY, 300.0, 450.0)
        bullet = Bullet(
            position=Vec2(300.0 - cfg.entity_radius - 1.0, 450.0),
            direction=Vec2(1.0, 0.0),
            owner=0,
            speed=10.0,
        )
        state = make_state([e0, e1], bullets=[bullet])
        new, events = step(state, {0: STAY, 1: STAY}, cfg)
        assert events[0].hit_landed == (1,)
        assert events[1].hit_taken == (0,)
        assert new.entity(1).health == 2
        assert new.bullets == ()

    def test_third_hit_kills_and_wins(self):
        cfg = open_config()
        e0 = make_entity(0, PLAYER, 100.0, 450.0)
        e1 = make_entity(1, ENEMY, 300.0, 450.0, health=1)
        bullet = Bullet(Vec2(275.0, 450.0), Vec2(1.0, 0.0), owner=0, speed=cfg.bullet_speed)
        state = make_state([e0, e1], bullets=[bullet])
        new, events = step(state, {0: STAY, 1: STAY}, cfg)
        assert events[0].kill == 1
        assert events[0].won
        assert events[1].death
        assert all(e.id != 1 for e in new.entities)
        assert outcome(new, cfg) is Outcome.WIN

    def test_shot_spawns_at_entity_edge(self):
        cfg = open_config()
        e0 = make_entity(0, PLAYER, 600.0, 450.0, facing=(1.0, 0.0))
        e1 = make_entity(1, ENEMY, 100.0, 100.0)
        state = make_state([e0, e1])
        new, events = step(state, {0: SHOOT_STAY, 1: STAY}, cfg)
        assert events[0].shot_fired
        assert len(new.bullets) == 1
        b = new.bullets[0]
        # Spawn at edge (radius along facing) plus one tick of advance.
        assert b.position.x == pytest.approx(600.0 + cfg.entity_radius + cfg.bullet_speed)
        assert b.owner == 0

    def test_shoot_respects_cooldown_and_ammo(self):
        cfg = open_config()
        e0 = make_entity(0, PLAYER, 600.0, 450.0, cooldown=3)
        e1 = make_entity(1, ENEMY, 100.0, 100.0, ammo=0)
        state = make_state([e0, e1])
        new, events = step(state, {0: SHOOT_STAY, 1: SHOOT_STAY}, cfg)
        assert not events[0].shot_fired
        assert not events[1].shot_fired
        assert new.bullets == ()

    def test_shot_consumes_ammo_and_sets_cooldown(self):
        cfg = open_config()
        e0 = make_entity(0, PLAYER, 600.0, 450.0)
        e1 = make_entity(1, ENEMY, 100.0, 100.0)
        state = make_state([e0, e1])
        new, _ = step(state, {0: SHOOT_STAY, 1: STAY}, cfg)
        shooter = new.entity(0)
        assert shooter.ammo == cfg.ammo_capacity - 1
        assert shooter.cooldown == cfg.shot_cooldown - 1  # decremented same tick

    def test_reload_regenerates_one_round(self):
        cfg = open_config()
        e0 = make_entity(0, PLAYER, 600.0, 450.0, ammo=0, reload_timer=1)
        e1 = make_entity(1, ENEMY, 100.0, 100.0)
        state = make_state([e0, e1])
        new, _ = step(state, {0: STAY, 1: STAY}, cfg)
        refilled = new.entity(0)
        assert refilled.ammo == 1
        assert refilled.reload_timer == cfg.reload_ticks

    def test_own_bullet_does_not_hit_owner(self):
        cfg = open_config()
        e0 = make_entity(0, PLAYER, 600.0, 450.0)
        e1 = make_entity(1, ENEMY, 100.0, 100.0)
        bullet = Bullet(Vec2(590.0, 450.0), Vec2(1.0, 0.0), owner=0, speed=5.0)
        state = make_state([e0, e1], bullets=[bullet])
        _, events = step(state, {0: STAY, 1: STAY}, cfg)
        assert events[0].hit_taken == ()

    def test_bullet_stopped_by_wall(self):
        cfg = open_config()
        wall = Wall(Vec2(400.0, 400.0), Vec2(450.0, 500.0))
        e0 = make_entity(0, PLAYER, 100.0, 450.0)
        e1 = make_entity(1, ENEMY, 600.0, 450.0)
        bullet = Bullet(Vec2(395.0, 450.0), Vec2(1.0, 0.0), owner=0, speed=15.0)
        state = make_state([e0, e1], bullets=[bullet], walls=[wall])
        new, events = step(state, {0: STAY, 1: STAY}, cfg)
        assert new.bullets == ()
        assert events[0].hit_landed == ()

    def test_bullet_leaves_arena(self):
        cfg = open_config()
        e0 = make_entity(0, PLAYER, 100.0, 450.0)
        e1 = make_entity(1, ENEMY, 600.0, 450.0)
        bullet = Bullet(Vec2(cfg.arena_width - 5.0, 450.0), Vec2(1.0, 0.0), owner=0, speed=15.0)
        state = make_state([e0, e1], bullets=[bullet])
        new, _ = step(state, {0: STAY, 1: STAY}, cfg)
        assert new.bullets == ()


class TestDodge:
    def test_near_miss_flags_dodge(self):
        cfg = open_config()
        e0 = make_entity(0, PLAYER, 100.0, 450.0)
        # Bullet passes 30 px below the enemy center: inside (20, 45].
        e1 = make_entity(1, ENEMY, 600.0, 450.0)
        bullet = Bullet(Vec2(595.0, 480.0), Vec2(1.0, 0.0), owner=0, speed=15.0)
        state = make_state([e0, e1], bullets=[bullet])
        _, events = step(state, {0: STAY, 1: STAY}, cfg)
        assert events[1].bullet_dodged == 1

    def test_far_miss_no_dodge(self):
        cfg = open_config()
        e0 = make_entity(0, PLAYER, 100.0, 450.0)
        e1 = make_entity(1, ENEMY, 600.0, 450.0)
        bullet = Bullet(Vec2(595.0, 550.0), Vec2(1.0, 0.0), owner=0, speed=15.0)
        state = make_state([e0, e1], bullets=[bullet])
        _, events = step(state, {0: STAY, 1: STAY}, cfg)
        assert events[1].bullet_dodged == 0

    def test_owner_never_dodges_own_bullet(self):
        cfg = open_config()
        e0 = make_entity(0, PLAYER, 600.0, 450.0)
        e1 = make_entity(1, ENEMY, 100.0, 100.0)
        bullet = Bullet(Vec2(600.0, 480.0), Vec2(1.0, 0.0), owner=0, speed=15.0)
        state = make_state([e0, e1], bullets=[bullet])
        _, events = step(state, {0: STAY, 1: STAY}, cfg)
        assert events[0].bullet_dodged == 0


class TestDistanceDelta:
    def test_approach_is_negative_delta(self):
        cfg = open_config()
        e0 = make_entity(0, PLAYER, 100.0, 450.0)
        e1 = make_entity(1, ENEMY, 600.0, 450.0)
        state = make_state([e0, e1])
        _, events = step(state, {0: EAST, 1: STAY}, cfg)
        assert events[0].distance_delta_to_nearest_enemy == pytest.approx(-cfg.move_speed)

    def test_no_opponent_means_zero_delta(self):
        cfg = open_config()
        e0 = make_entity(0, PLAYER, 100.0, 450.0)
        e1 = make_entity(1, ENEMY, 300.0, 450.0, health=1)
        bullet = Bullet(Vec2(250.0, 450.0), Vec2(1.0, 0.0), owner=0, speed=15.0)
        state = make_state([e0, e1], bullets=[bullet])
        _, events = step(state, {0: STAY, 1: STAY}, cfg)
        assert events[0].distance_delta_to_nearest_enemy == 0.0


class TestOutcome:
    def test_fresh_state_ongoing(self):
        cfg = GameConfig()
        assert outcome(build_arena(cfg, 0), cfg) is Outcome.ONGOING

    def test_no_enemies_is_win(self):
        cfg = open_config()
        state = make_state([make_entity(0, PLAYER, 100.0, 450.0)])
        assert outcome(state, cfg) is Outcome.WIN

    def test_dead_player_is_loss_even_without_enemies(self):
        cfg = open_config()
        state = make_state([])
        assert outcome(state, cfg) is Outcome.LOSS

    def test_timeout_at_max_steps(self):
        cfg = open_config()
        state = make_state(
            [make_entity(0, PLAYER, 100.0, 450.0), make_entity(1, ENEMY, 600.0, 450.0)],
            tick=cfg.max_steps,
        )
        assert outcome(state, cfg) is Outcome.TIMEOUT

    def test_timeout_events_flagged(self):
        cfg = open_config()
        state = make_state(
            [make_entity(0, PLAYER, 100.0, 450.0), make_entity(1, ENEMY, 600.0, 450.0)],
            tick=cfg.max_steps - 1,
        )
        _, events = step(state, {0: STAY, 1: STAY}, cfg)
        assert events[0].timed_out and events[1].timed_out


class TestObserve:
    def test_empty_lists_for_lone_entity(self):
        cfg = open_config()
        state = make_state([make_entity(0, PLAYER, 100.0, 450.0)])
        obs = observe(state, 0, cfg)
        assert obs.others == ()
        assert obs.bullets == ()

    def test_two_entity_cardinality(self):
        cfg = GameConfig()
        state = build_arena(cfg, 0)
        obs = observe(state, 0, cfg)
        assert len(obs.opponents) == 1

    def test_mirror_roles_swapped(self):
        cfg = GameConfig()
        state = build_arena(cfg, 3)
        player, enemy = state.entities
        obs_p = observe(state, player.id, cfg)
        obs_e = observe(state, enemy.id, cfg)
        assert obs_p.me == player and obs_p.others == (enemy,)
        assert obs_e.me == enemy and obs_e.others == (player,)
        assert obs_p.bullets == obs_e.bullets
        assert obs_p.walls == obs_e.walls
        assert obs_p.tick == obs_e.tick

    def test_dead_viewer_raises(self):
        cfg = GameConfig()
        state = build_arena(cfg, 0)
        with pytest.raises(KeyError):
            observe(state, 99, cfg)


class TestInvariants:
    @given(seed=st.integers(0, 10_000), action_seed=st.integers(0, 10_000))
    @settings(max_examples=25, deadline=None)
    def test_random_rollout_invariants(self, seed, action_seed):
        cfg = GameConfig(max_steps=60)
        state = build_arena(cfg, seed)
        rng = random.Random(action_seed)
        healths = {e.id: e.health for e in state.entities}
        max_bullet_ticks = math.ceil(cfg.diagonal / cfg.bullet_speed)
        for t in range(60):
            if outcome(state, cfg) is not Outcome.ONGOING:
                break
            actions = {e.id: rng.randrange(18) for e in state.entities}
            new, _ = step(state, actions, cfg)
            assert new.tick == state.tick + 1
            for e in new.entities:
                # Health never increases.
                assert e.health <= healths[e.id]
                healths[e.id] = e.health
                # Entities stay inside the arena, outside every wall.
                assert cfg.entity_radius <= e.position.x <= cfg.arena_width - cfg.entity_radius
                assert cfg.entity_radius <= e.position.y <= cfg.arena_height - cfg.entity_radius
                for w in new.walls:
                    assert not circle_rect_overlap(
                        e.position, cfg.entity_radius - 1e-9, w.min_corner, w.max_corner
                    )
                assert 0 <= e.ammo <= cfg.ammo_capacity
                assert e.cooldown >= 0
            state = new
        assert max_bullet_ticks < 200  # sanity: bound is meaningful for the config

    def test_determinism_same_hash_sequence(self):
        cfg = GameConfig()
        hashes = []
        for _ in range(2):
            state = build_arena(cfg, 12)
            rng = random.Random(34)
            seq = [state_hash(state)]
            for _ in range(50):
                actions = {e.id: rng.randrange(18) for e in state.entities}
                state, _ = step(state, actions, cfg)
                seq.append(state_hash(state))
            hashes.append(seq)
        assert hashes[0] == hashes[1]

    def test_bullet_lifetime_bound(self):
        cfg = open_config()
        e0 = make_entity(0, PLAYER, 100.0, 450.0)
        e1 = make_entity(1, ENEMY, 1100.0, 100.0)
        bullet = Bullet(Vec2(150.0, 450.0), Vec2(0.9, -0.435889894354).normalized(), owner=0, speed=15.0)
        state = make_state([e0, e1], bullets=[bullet])
        limit = math.ceil(cfg.diagonal / cfg.bullet_speed)
        for t in range(limit + 1):
            if not state.bullets:
                break
            state, _ = step(state, {0: STAY, 1: STAY}, cfg)
        assert state.bullets == ()

    def test_outcome_never_reverts(self):
        cfg = open_config(max_steps=5)
        state = make_state(
            [make_entity(0, PLAYER, 100.0, 450.0), make_entity(1, ENEMY, 600.0, 450.0)]
        )
        seen_terminal = False
        for _ in range(10):
            result = outcome(state, cfg)
            if seen_terminal:
                assert result is not Outcome.ONGOING
            if result is not Outcome.ONGOING:
                seen_terminal = True
            state, _ = step(state, {e.id: STAY for e in state.entities}, cfg)


class TestStateHash:
    def test_hash_changes_with_position(self):
        cfg = open_config()
        e0 = make_entity(0, PLAYER, 100.0, 450.0)
        e1 = make_entity(1, ENEMY, 600.0, 450.0)
        a = make_state([e0, e1])
        b = make_state([make_entity(0, PLAYER, 101.0, 450.0), e1])
        assert state_hash(a) != state_hash(b)

    def test_hash_stable_for_equal_states(self):
        cfg = GameConfig()
        assert state_hash(build_arena(cfg, 5)) == state_hash(build_arena(cfg, 5))
