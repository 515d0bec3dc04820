#!/usr/bin/env python3
"""Regenerate the committed golden play-session transcript.

The transcript drives byte-for-byte protocol conformance tests and the
browser client's render test. Regenerate only when the protocol or the
simulation intentionally changes:

    python scripts/make_golden_transcript.py
"""

from __future__ import annotations

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from arenarl.config import GameConfig
from arenarl.protocol import PROTOCOL_VERSION, Session, encode_message
from arenarl.scripted import act_rule_based

GOLDEN_PATH = Path(__file__).resolve().parent.parent / "tests" / "data" / "golden_transcript.txt"

CONFIG = GameConfig(
    arena_width=600.0, arena_height=450.0, max_steps=300, n_walls=2,
    wall_min_size=40.0, wall_max_size=90.0,
)
SEED = 2024


def scripted_input(tick: int) -> dict:
    """Headless client behavior: strafe north/south, firing every 5th tick."""
    move_dir = 1 if (tick // 20) % 2 == 0 else 5
    return {"type": "input", "tick": tick, "move_dir": move_dir, "shoot": tick % 5 == 0}


def generate_lines() -> list[str]:
    session = Session(CONFIG, lambda obs, rng: act_rule_based(obs), seed=SEED)
    lines: list[str] = []

    def c2s(message: dict) -> list[dict]:
        lines.append("c2s\t" + encode_message(message))
        return session.handle_message(message)

    def record_s2c(messages: list[dict]) -> None:
        for message in messages:
            lines.append("s2c\t" + encode_message(message))

    record_s2c(c2s({"type": "hello", "version": PROTOCOL_VERSION}))
    while session.phase == "playing":
        messages = session.tick()
        record_s2c(messages)
        if session.phase == "playing":
            snapshot = messages[0]
            record_s2c(c2s(scripted_input(snapshot["tick"])))
    return lines


def main() -> None:
    lines = generate_lines()
    GOLDEN_PATH.parent.mkdir(parents=True, exist_ok=True)
    GOLDEN_PATH.write_text("\n".join(lines) + "\n")
    print(f"wrote {len(lines)} lines to {GOLDEN_PATH}")


if __name__ == "__main__":
    main()
