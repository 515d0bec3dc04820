"""Play-session protocol conformance, the golden transcript, and live sockets."""

import asyncio
import json
from pathlib import Path

import pytest

from arenarl.actions import ActionSpec, encode_action
from arenarl.config import GameConfig, config_fingerprint
from arenarl.model import PolicyModel, save_model
from arenarl.protocol import (
    MAX_INPUT_AGE,
    PROTOCOL_VERSION,
    ProtocolError,
    Session,
    decode_message,
    encode_message,
)
from arenarl.scripted import act_rule_based
from arenarl.server import CheckpointMismatch, load_agent, run_session

DATA = Path(__file__).parent / "data"
STAY = encode_action(ActionSpec(0, False))

SMALL = GameConfig(
    arena_width=600.0, arena_height=450.0, max_steps=300, n_walls=2,
    wall_min_size=40.0, wall_max_size=90.0,
)


def rule_agent(obs, rng):
    return act_rule_based(obs)


def make_session(seed=0, config=SMALL):
    return Session(config, rule_agent, seed=seed)


class TestHandshake:
    def test_hello_returns_config(self):
        session = make_session()
        replies = session.handle_message({"type": "hello", "version": PROTOCOL_VERSION})
        assert len(replies) == 1
        config = replies[0]
        assert config["type"] == "config"
        assert config["arena"]["width"] == 600.0
        assert config["entity_ids"]["player"] == 0
        assert config["entity_ids"]["enemies"] == [1]
        assert session.phase == "playing"

    def test_version_mismatch_refused(self):
        session = make_session()
        with pytest.raises(ProtocolError, match="version"):
            session.handle_message({"type": "hello", "version": 99})

    def test_double_hello_refused(self):
        session = make_session()
        session.handle_message({"type": "hello", "version": PROTOCOL_VERSION})
        with pytest.raises(ProtocolError):
            session.handle_message({"type": "hello", "version": PROTOCOL_VERSION})

    def test_unknown_type_refused(self):
        with pytest.raises(ProtocolError):
            make_session().handle_message({"type": "teleport"})


class TestInputHandling:
    def _playing_session(self):
        session = make_session()
        session.handle_message({"type": "hello", "version": PROTOCOL_VERSION})
        return session

    def test_no_input_defaults_to_stay(self):
        session = self._playing_session()
        start = session.state.player().position
        for _ in range(5):
            messages = session.tick()
            assert messages[0]["type"] == "snapshot"
        player = session.state.player()
        assert player.position == start

    def test_input_moves_player(self):
        session = self._playing_session()
        start = session.state.player().position
        session.handle_message({"type": "input", "tick": 0, "move_dir": 3, "shoot": False})
        session.tick()
        assert session.state.player().position.x > start.x

    def test_stale_input_discarded(self):
        session = self._playing_session()
        for _ in range(MAX_INPUT_AGE + 2):
            session.tick()
        start = session.state.player().position
        session.handle_message({"type": "input", "tick": 0, "move_dir": 3, "shoot": False})
        session.tick()
        assert session.state.player().position == start

    def test_latest_input_wins(self):
        session = self._playing_session()
        tick = session.state.tick
        session.handle_message({"type": "input", "tick": tick, "move_dir": 3, "shoot": False})
        session.handle_message({"type": "input", "tick": tick, "move_dir": 7, "shoot": False})
        start = session.state.player().position
        session.tick()
        assert session.state.player().position.x < start.x  # west, not east

    def test_malformed_input_rejected(self):
        session = self._playing_session()
        with pytest.raises(ProtocolError):
            session.handle_message({"type": "input", "tick": 0, "move_dir": 12, "shoot": False})
        with pytest.raises(ProtocolError):
            session.handle_message({"type": "input", "tick": 0})

    def test_snapshot_every_tick_and_end_once(self):
        session = self._playing_session()
        snapshots = 0
        end = None
        for _ in range(SMALL.max_steps + 5):
            messages = session.tick()
            if not messages:
                break
            assert messages[0]["type"] == "snapshot"
            snapshots += 1
            if len(messages) > 1:
                end = messages[1]
        assert end is not None and end["type"] == "end"
        assert snapshots <= SMALL.max_steps
        assert session.phase == "ended"

    def test_rematch_restarts(self):
        session = self._playing_session()
        while session.phase == "playing":
            session.tick()
        replies = session.handle_message({"type": "rematch"})
        assert replies[0]["type"] == "config"
        assert session.phase == "playing"
        assert session.state.tick == 0

    def test_rematch_mid_match_refused(self):
        session = self._playing_session()
        with pytest.raises(ProtocolError):
            session.handle_message({"type": "rematch"})


class TestEncoding:
    def test_canonical_encoding_sorted_compact(self):
        msg = {"type": "input", "tick": 3, "move_dir": 1, "shoot": False}
        assert encode_message(msg) == '{"move_dir":1,"shoot":false,"tick":3,"type":"input"}'

    def test_decode_rejects_garbage(self):
        with pytest.raises(ProtocolError):
            decode_message("{nope")
        with pytest.raises(ProtocolError):
            decode_message('"just a string"')


class TestGoldenTranscript:
    def test_byte_for_byte_replay(self):
        """Regenerate the scripted session and compare with the committed file."""
        import importlib.util

        spec = importlib.util.spec_from_file_location(
            "make_golden_transcript",
            Path(__file__).parent.parent / "scripts" / "make_golden_transcript.py",
        )
        module = importlib.util.module_from_spec(spec)
        spec.loader.exec_module(module)
        generated = "\n".join(module.generate_lines()) + "\n"
        committed = (DATA / "golden_transcript.txt").read_text()
        assert generated == committed

    def test_transcript_covers_full_session(self):
        lines = (DATA / "golden_transcript.txt").read_text().splitlines()
        kinds = []
        for line in lines:
            direction, raw = line.split("\t", 1)
            kinds.append((direction, json.loads(raw)["type"]))
        assert kinds[0] == ("c2s", "hello")
        assert kinds[1] == ("s2c", "config")
        assert ("s2c", "snapshot") in kinds
        assert ("c2s", "input") in kinds
        assert kinds[-1] == ("s2c", "end")


@pytest.fixture()
def anyio_backend():
    return "asyncio"


async def _ws_collect_silent_session(port):
    """Connect, send hello, read everything until End; no inputs."""
    import websockets

    received = []
    async with websockets.connect(f"ws://127.0.0.1:{port}") as ws:
        await ws.send(encode_message({"type": "hello", "version": PROTOCOL_VERSION}))
        while True:
            raw = await asyncio.wait_for(ws.recv(), timeout=10.0)
            message = json.loads(raw)
            received.append(raw if isinstance(raw, str) else raw.decode())
            if message["type"] == "end":
                break
    return received


class TestLiveSocket:
    def test_silent_client_matches_pure_session_bytes(self, unused_tcp_port_factory=None):
        """Over-the-wire frames equal the transport-free session's frames."""
        import websockets

        config = GameConfig(
            arena_width=600.0, arena_height=450.0, max_steps=200, n_walls=0,
        )
        seed = 5

        async def scenario():
            async def handler(ws):
                await run_session(ws, config, rule_agent, seed, tick_period=0.0)

            async with websockets.serve(handler, "127.0.0.1", 0) as server:
                port = server.sockets[0].getsockname()[1]
                return await _ws_collect_silent_session(port)

        received = asyncio.run(scenario())

        session = Session(config, rule_agent, seed=seed, fingerprint=config_fingerprint(config))
        expected = [
            encode_message(m)
            for m in session.handle_message({"type": "hello", "version": PROTOCOL_VERSION})
        ]
        while session.phase == "playing":
            expected.extend(encode_message(m) for m in session.tick())
        assert received == expected

    def test_scripted_client_full_session(self):
        """Hello -> Config -> Input/Snapshot loop -> End within max_steps."""
        import websockets

        config = GameConfig(
            arena_width=600.0, arena_height=450.0, max_steps=400, n_walls=2,
            wall_min_size=40.0, wall_max_size=90.0,
        )

        async def scenario():
            async def handler(ws):
                await run_session(ws, config, rule_agent, seed=9, tick_period=0.001)

            async with websockets.serve(handler, "127.0.0.1", 0) as server:
                port = server.sockets[0].getsockname()[1]
                async with websockets.connect(f"ws://127.0.0.1:{port}") as ws:
                    await ws.send(encode_message({"type": "hello", "version": PROTOCOL_VERSION}))
                    config_msg = json.loads(await asyncio.wait_for(ws.recv(), 10.0))
                    assert config_msg["type"] == "config"
                    ticks = []
                    while True:
                        msg = json.loads(await asyncio.wait_for(ws.recv(), 10.0))
                        if msg["type"] == "snapshot":
                            ticks.append(msg["tick"])
                            await ws.send(
                                encode_message(
                                    {
                                        "type": "input",
                                        "tick": msg["tick"],
                                        "move_dir": 3,
                                        "shoot": msg["tick"] % 4 == 0,
                                    }
                                )
                            )
                        elif msg["type"] == "end":
                            return ticks, msg

            return None

        ticks, end = asyncio.run(scenario())
        assert ticks == sorted(ticks)
        assert end["outcome"] in ("win", "loss", "timeout")
        assert end["stats"]["ticks"] <= 400

    def test_bad_hello_gets_error_frame(self):
        import websockets

        config = GameConfig(arena_width=600.0, arena_height=450.0, n_walls=0)

        async def scenario():
            async def handler(ws):
                await run_session(ws, config, rule_agent, seed=0, tick_period=0.0)

            async with websockets.serve(handler, "127.0.0.1", 0) as server:
                port = server.sockets[0].getsockname()[1]
                async with websockets.connect(f"ws://127.0.0.1:{port}") as ws:
                    await ws.send(encode_message({"type": "hello", "version": 1234}))
                    reply = json.loads(await asyncio.wait_for(ws.recv(), 10.0))
                    return reply

        reply = asyncio.run(scenario())
        assert reply["type"] == "error"
        assert "version" in reply["message"]


class TestLoadAgent:
    def test_fingerprint_mismatch_refused(self, tmp_path):
        from arenarl.config import EncoderLimits, ModelConfig

        model = PolicyModel(
            ModelConfig(embedding_width=8, trunk_widths=(8, 8), attention_heads=2),
            EncoderLimits(max_enemies=1, max_bullets=2, max_walls=2),
            seed=0,
        )
        path = tmp_path / "model.npz"
        trained_on = GameConfig(arena_width=600.0, arena_height=450.0)
        save_model(model, path, fingerprint=config_fingerprint(trained_on))
        with pytest.raises(CheckpointMismatch):
            load_agent(path, GameConfig())

    def test_matching_fingerprint_loads(self, tmp_path):
        from arenarl.config import EncoderLimits, ModelConfig

        config = GameConfig()
        model = PolicyModel(
            ModelConfig(embedding_width=8, trunk_widths=(8, 8), attention_heads=2),
            EncoderLimits(),
            seed=0,
        )
        path = tmp_path / "model.npz"
        save_model(model, path, fingerprint=config_fingerprint(config))
        agent = load_agent(path, config)
        from arenarl.sim import build_arena, observe

        state = build_arena(config, 0)
        import random as _random

        action = agent(observe(state, 0, config), _random.Random(0))
        assert 0 <= action < 18
