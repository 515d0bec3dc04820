"""Scripted policies: uniformity of the random agent, hand-executed rule cases."""

import random

import numpy as np
import pytest
from scipy import stats

from arenarl.actions import ActionSpec, N_ACTIONS, decode_action
from arenarl.config import GameConfig
from arenarl.geometry import Vec2
from arenarl.sim import (
    Bullet,
    ENEMY,
    EntityState,
    Observation,
    PLAYER,
    Wall,
    build_arena,
    observe,
)
from arenarl.scripted import (
    act_random,
    act_rule_based,
    act_rule_based_2,
    make_policy,
)


def make_entity(eid, kind, x, y, facing=(1.0, 0.0), health=3, ammo=3):
    return EntityState(
        id=eid,
        kind=kind,
        position=Vec2(x, y),
        facing=Vec2(*facing),
        health=health,
        ammo=ammo,
        cooldown=0,
        reload_timer=0,
    )


def make_obs(me, others=(), bullets=(), walls=(), config=None):
    return Observation(
        tick=0,
        viewer_id=me.id,
        me=me,
        others=tuple(others),
        bullets=tuple(bullets),
        walls=tuple(walls),
        config=config or GameConfig(),
    )


class TestRandomAgent:
    def test_reproducible_sequence(self):
        cfg = GameConfig()
        state = build_arena(cfg, 0)
        obs = observe(state, 0, cfg)
        seq_a = [act_random(obs, random.Random(5)) for _ in range(1)]
        rng1, rng2 = random.Random(9), random.Random(9)
        assert [act_random(obs, rng1) for _ in range(50)] == [
            act_random(obs, rng2) for _ in range(50)
        ]

    def test_outputs_in_range(self):
        cfg = GameConfig()
        obs = observe(build_arena(cfg, 1), 0, cfg)
        rng = random.Random(0)
        assert all(0 <= act_random(obs, rng) < N_ACTIONS for _ in range(200))

    def test_uniformity_chi_square(self):
        # 18,000 draws: every action in [800, 1200] and chi-square not
        # rejected at alpha = 0.001 (df = 17).
        cfg = GameConfig()
        obs = observe(build_arena(cfg, 2), 0, cfg)
        rng = random.Random(123)
        counts = np.zeros(N_ACTIONS, dtype=int)
        for _ in range(18_000):
            counts[act_random(obs, rng)] += 1
        assert counts.min() >= 800 and counts.max() <= 1200
        expected = 18_000 / N_ACTIONS
        chi2 = float(((counts - expected) ** 2 / expected).sum())
        critical = stats.chi2.ppf(1.0 - 0.001, df=N_ACTIONS - 1)
        assert chi2 < critical


class TestRuleBased:
    def test_opponent_due_east_clear_fires_east(self):
        me = make_entity(0, PLAYER, 300.0, 450.0)
        foe = make_entity(1, ENEMY, 600.0, 450.0)
        action = decode_action(act_rule_based(make_obs(me, [foe])))
        assert action == ActionSpec(move_dir=3, shoot=True)

    def test_opponent_behind_wall_moves_closer_without_shooting(self):
        me = make_entity(0, PLAYER, 600.0, 600.0)
        foe = make_entity(1, ENEMY, 600.0, 200.0)  # due north
        wall = Wall(Vec2(500.0, 380.0), Vec2(700.0, 420.0))
        obs = make_obs(me, [foe], walls=[wall])
        spec = decode_action(act_rule_based(obs))
        assert not spec.shoot
        assert spec.move_dir != 0
        before = me.position.distance_to(foe.position)
        from arenarl.actions import direction_vector

        after = (me.position + direction_vector(spec.move_dir).scaled(obs.config.move_speed)).distance_to(
            foe.position
        )
        assert after < before

    def test_no_ammo_moves_east_without_shooting(self):
        me = make_entity(0, PLAYER, 300.0, 450.0, ammo=0)
        foe = make_entity(1, ENEMY, 600.0, 450.0)
        action = decode_action(act_rule_based(make_obs(me, [foe])))
        assert action == ActionSpec(move_dir=3, shoot=False)

    def test_never_shoots_without_line_of_sight(self):
        me = make_entity(0, PLAYER, 300.0, 450.0)
        foe = make_entity(1, ENEMY, 600.0, 450.0)
        wall = Wall(Vec2(440.0, 430.0), Vec2(460.0, 470.0))
        spec = decode_action(act_rule_based(make_obs(me, [foe], walls=[wall])))
        assert not spec.shoot

    def test_deterministic(self):
        cfg = GameConfig()
        obs = observe(build_arena(cfg, 7), 0, cfg)
        assert act_rule_based(obs) == act_rule_based(obs)

    def test_no_opponents_stays(self):
        me = make_entity(0, PLAYER, 300.0, 450.0)
        assert decode_action(act_rule_based(make_obs(me))) == ActionSpec(0, False)


class TestRuleBased2:
    def test_incoming_bullet_dodges_perpendicular(self):
        me = make_entity(0, PLAYER, 300.0, 450.0)
        foe = make_entity(1, ENEMY, 900.0, 450.0)
        # Hostile bullet incoming head-on from the east.
        bullet = Bullet(Vec2(500.0, 450.0), Vec2(-1.0, 0.0), owner=1, speed=15.0)
        spec = decode_action(act_rule_based_2(make_obs(me, [foe], bullets=[bullet])))
        assert spec.move_dir in (1, 5)  # N or S
        assert not spec.shoot

    def test_no_bullets_equal_health_matches_rule_based(self):
        cfg = GameConfig()
        for seed in range(8):
            state = build_arena(cfg, seed)
            obs = observe(state, 0, cfg)
            assert act_rule_based_2(obs) == act_rule_based(obs)

    def test_low_health_seeks_nearest_wall(self):
        cfg = GameConfig(n_walls=0)
        me = make_entity(0, PLAYER, 300.0, 450.0, health=1)
        foe = make_entity(1, ENEMY, 900.0, 450.0, health=3)
        wall = Wall(Vec2(280.0, 600.0), Vec2(380.0, 700.0))  # south of me
        obs = make_obs(me, [foe], walls=[wall], config=cfg)
        spec = decode_action(act_rule_based_2(obs))
        from arenarl.actions import direction_vector

        moved = me.position + direction_vector(spec.move_dir).scaled(cfg.move_speed)
        from arenarl.geometry import circle_rect_distance

        before = circle_rect_distance(me.position, wall.min_corner, wall.max_corner)
        after = circle_rect_distance(moved, wall.min_corner, wall.max_corner)
        assert after < before

    def test_own_bullet_is_not_a_threat(self):
        me = make_entity(0, PLAYER, 300.0, 450.0)
        foe = make_entity(1, ENEMY, 900.0, 450.0)
        bullet = Bullet(Vec2(350.0, 450.0), Vec2(-1.0, 0.0), owner=0, speed=15.0)
        obs = make_obs(me, [foe], bullets=[bullet])
        assert act_rule_based_2(obs) == act_rule_based(make_obs(me, [foe]))

    def test_dodge_outranks_cover(self):
        me = make_entity(0, PLAYER, 300.0, 450.0, health=1)
        foe = make_entity(1, ENEMY, 900.0, 450.0, health=3)
        wall = Wall(Vec2(280.0, 600.0), Vec2(380.0, 700.0))
        bullet = Bullet(Vec2(500.0, 450.0), Vec2(-1.0, 0.0), owner=1, speed=15.0)
        spec = decode_action(act_rule_based_2(make_obs(me, [foe], bullets=[bullet], walls=[wall])))
        assert spec.move_dir in (1, 5)


class TestMakePolicy:
    def test_names(self):
        cfg = GameConfig()
        obs = observe(build_arena(cfg, 0), 0, cfg)
        rng = random.Random(0)
        for name in ("random", "rule", "rule2"):
            action = make_policy(name)(obs, rng)
            assert 0 <= action < N_ACTIONS

    def test_unknown_name_raises(self):
        with pytest.raises(ValueError):
            make_policy("alphazero")
