"""Play-session protocol: message schema and the tick-loop state machine.

All messages are JSON objects with a lowercase `type` tag, canonically
encoded (sorted keys, compact separators) so transcripts are byte-stable.

Client to server:
    {"type": "hello", "version": 1}
    {"type": "input", "tick": <int>, "move_dir": <0..8>, "shoot": <bool>}
    {"type": "rematch"}

Server to client:
    {"type": "config", "arena": {...}, "tick_rate": 30,
     "entity_ids": {"player": 0, "enemies": [...]}, "fingerprint": <str|null>}
    {"type": "snapshot", "tick": <int>, "entities": [...], "bullets": [...],
     "walls": [...], "outcome": "ongoing"|"win"|"loss"|"timeout"}
    {"type": "end", "outcome": <str>, "stats": {...}}
    {"type": "error", "message": <str>}

The Session object is transport-free: the network layer feeds it decoded
messages and flushes whatever it returns, which keeps the protocol testable
byte-for-byte without sockets.
"""

from __future__ import annotations

import dataclasses
import json
import random
from dataclasses import dataclass
from typing import Callable

from .actions import ActionSpec, N_DIRECTIONS, encode_action
from .config import GameConfig
from .sim import (
    GameState,
    Observation,
    Outcome,
    build_arena,
    observe,
    outcome,
    step,
)
from .serde import bullet_to_dict, entity_to_dict, wall_to_list

PROTOCOL_VERSION = 1
TICK_RATE = 30
# Inputs older than this many ticks behind the loop are stale and dropped.
MAX_INPUT_AGE = 2

Policy = Callable[[Observation, random.Random], int]


class ProtocolError(ValueError):
    """Malformed or out-of-order message."""


def encode_message(message: dict) -> str:
    return json.dumps(message, sort_keys=True, separators=(",", ":"))


def decode_message(raw: str | bytes) -> dict:
    try:
        message = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"malformed JSON: {exc}") from exc
    if not isinstance(message, dict) or "type" not in message:
        raise ProtocolError("message must be an object with a 'type' field")
    return message


@dataclass
class SessionStats:
    ticks: int = 0
    player_shots: int = 0
    player_hits: int = 0
    agent_shots: int = 0
    agent_hits: int = 0

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


class Session:
    """One human-vs-agent match: handshake, tick loop, end, optional rematch.

    The human drives the player entity; the supplied policy drives every
    enemy. Input buffering is latest-wins with a staleness cutoff.
    """

    def __init__(
        self,
        config: GameConfig,
        agent: Policy,
        seed: int,
        fingerprint: str | None = None,
    ):
        self.config = config
        self.agent = agent
        self.seed = seed
        self.fingerprint = fingerprint
        self.phase = "handshake"  # handshake -> playing -> ended
        self.state: GameState | None = None
        self.stats = SessionStats()
        self._latest_input: dict | None = None
        self._match_index = 0
        self._agent_rng = random.Random(f"{seed}:agent")

    # ------------------------------------------------------------------

    def handle_message(self, message: dict) -> list[dict]:
        kind = message.get("type")
        if kind == "hello":
            return self._handle_hello(message)
        if kind == "input":
            return self._handle_input(message)
        if kind == "rematch":
            return self._handle_rematch()
        raise ProtocolError(f"unknown message type {kind!r}")

    def _handle_hello(self, message: dict) -> list[dict]:
        if self.phase != "handshake":
            raise ProtocolError("hello after handshake")
        if message.get("version") != PROTOCOL_VERSION:
            raise ProtocolError(
                f"protocol version {message.get('version')} unsupported, "
                f"server speaks {PROTOCOL_VERSION}"
            )
        self._start_match()
        return [self.config_message()]

    def _handle_input(self, message: dict) -> list[dict]:
        if self.phase != "playing":
            return []
        try:
            tick = int(message["tick"])
            move_dir = int(message["move_dir"])
            shoot = bool(message["shoot"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"bad input message: {exc}") from exc
        if not 0 <= move_dir < N_DIRECTIONS:
            raise ProtocolError(f"move_dir {move_dir} out of range")
        assert self.state is not None
        if self.state.tick - tick > MAX_INPUT_AGE:
            return []  # stale, discarded
        self._latest_input = {"tick": tick, "move_dir": move_dir, "shoot": shoot}
        return []

    def _handle_rematch(self) -> list[dict]:
        if self.phase != "ended":
            raise ProtocolError("rematch before the match ended")
        self._match_index += 1
        self._start_match()
        return [self.config_message()]

    # ------------------------------------------------------------------

    def _start_match(self) -> None:
        self.state = build_arena(self.config, self.seed + self._match_index)
        self.stats = SessionStats()
        self._latest_input = None
        self.phase = "playing"

    def config_message(self) -> dict:
        assert self.state is not None
        return {
            "type": "config",
            "arena": {
                "width": self.config.arena_width,
                "height": self.config.arena_height,
                "entity_radius": self.config.entity_radius,
                "max_steps": self.config.max_steps,
                "tick_rate": TICK_RATE,
            },
            "entity_ids": {
                "player": 0,
                "enemies": [e.id for e in self.state.enemies()],
            },
            "fingerprint": self.fingerprint,
            "version": PROTOCOL_VERSION,
        }

    def _player_action(self) -> int:
        assert self.state is not None
        latest = self._latest_input
        if latest is None or self.state.tick - latest["tick"] > MAX_INPUT_AGE:
            return encode_action(ActionSpec(0, False))
        return encode_action(ActionSpec(latest["move_dir"], latest["shoot"]))

    def tick(self) -> list[dict]:
        """Advance one tick; returns the snapshot and, on termination, End."""
        if self.phase != "playing":
            return []
        assert self.state is not None
        actions = {}
        player = self.state.player()
        if player is not None:
            actions[player.id] = self._player_action()
        for enemy in self.state.enemies():
            obs = observe(self.state, enemy.id, self.config)
            actions[enemy.id] = self.agent(obs, self._agent_rng)

        self.state, events = step(self.state, actions, self.config)
        self.stats.ticks = self.state.tick
        if player is not None and player.id in events:
            self.stats.player_shots += int(events[player.id].shot_fired)
            self.stats.player_hits += len(events[player.id].hit_landed)
        for eid, ev in events.items():
            if player is None or eid != player.id:
                self.stats.agent_shots += int(ev.shot_fired)
                self.stats.agent_hits += len(ev.hit_landed)

        result = outcome(self.state, self.config)
        messages = [self.snapshot_message(result)]
        if result is not Outcome.ONGOING:
            self.phase = "ended"
            messages.append(
                {
                    "type": "end",
                    "outcome": result.value,
                    "stats": self.stats.to_dict(),
                }
            )
        return messages

    def snapshot_message(self, result: Outcome) -> dict:
        assert self.state is not None
        return {
            "type": "snapshot",
            "tick": self.state.tick,
            "entities": [entity_to_dict(e) for e in self.state.entities],
            "bullets": [bullet_to_dict(b) for b in self.state.bullets],
            "walls": [wall_to_list(w) for w in self.state.walls],
            "outcome": result.value,
        }


def error_message(reason: str) -> dict:
    return {"type": "error", "message": reason}
