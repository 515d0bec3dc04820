"""Config dataclasses, the key-value file format, and fingerprints."""

import pytest

from arenarl.config import (
    ConfigError,
    DqnConfig,
    GameConfig,
    HybridSchedule,
    ModelConfig,
    OptimizerConfig,
    config_fingerprint,
    load_run_config,
    read_key_values,
)


def test_defaults_match_environment_settings():
    cfg = GameConfig()
    assert cfg.arena_width == 1200.0
    assert cfg.arena_height == 900.0
    assert cfg.max_steps == 1000
    assert cfg.n_enemies == 1


def test_bullet_speed_must_beat_move_speed():
    with pytest.raises(ConfigError):
        GameConfig(move_speed=10.0, bullet_speed=5.0)


def test_negative_field_rejected():
    with pytest.raises(ConfigError):
        GameConfig(entity_radius=-1.0)


def test_dqn_defaults():
    dqn = DqnConfig()
    assert dqn.gamma == 0.99
    assert dqn.epsilon_start == 0.8
    assert dqn.epsilon_end == 0.1
    assert dqn.buffer_capacity == 20_000


def test_schedule_defaults():
    sched = HybridSchedule()
    assert sched.r_initial == 0.8
    assert sched.r_final == 0.2
    assert sched.phase_length == 50


def test_schedule_rejects_inverted_ratios():
    with pytest.raises(ConfigError):
        HybridSchedule(r_initial=0.2, r_final=0.8)


def test_model_presets():
    small = ModelConfig.preset("small")
    large = ModelConfig.preset("large")
    assert small.embedding_width == 32 and small.trunk_widths == (64, 64)
    assert large.embedding_width == 64 and large.trunk_widths == (256, 128)
    assert large.attention_heads == 4


def test_model_head_divisibility():
    with pytest.raises(ConfigError):
        ModelConfig(embedding_width=30, attention_heads=4)


def test_optimizer_kind_checked():
    with pytest.raises(ConfigError):
        OptimizerConfig(kind="rmsprop")


class TestConfigFile:
    def test_read_key_values(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("# comment\narena_width = 600\n\nseed=7 # trailing\n")
        assert read_key_values(path) == {"arena_width": "600", "seed": "7"}

    def test_duplicate_key_rejected(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("seed = 1\nseed = 2\n")
        with pytest.raises(ConfigError):
            read_key_values(path)

    def test_load_run_config_sections(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text(
            "arena_width = 600\narena_height = 450\nseed = 9\n"
            "gamma = 0.95\nmodel_size = large\nhit_enemy = 0.7\n"
        )
        run = load_run_config(path)
        assert run.game.arena_width == 600.0
        assert run.seed == 9
        assert run.dqn.gamma == 0.95
        assert run.model.size == "large"
        assert run.rewards.hit_enemy == 0.7

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("not_a_real_key = 5\n")
        with pytest.raises(ConfigError, match="not_a_real_key"):
            load_run_config(path)

    def test_overrides_win(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("seed = 1\n")
        run = load_run_config(path, overrides={"seed": "42"})
        assert run.seed == 42


def test_fingerprint_stable_and_sensitive():
    a = config_fingerprint(GameConfig())
    b = config_fingerprint(GameConfig())
    c = config_fingerprint(GameConfig(arena_width=600.0, arena_height=450.0))
    assert a == b
    assert a != c
    assert len(a) == 12
