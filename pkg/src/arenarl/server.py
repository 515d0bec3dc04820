"""WebSocket host for human-vs-agent play sessions.

One Session per connection, isolated state, fixed 30 Hz loop. The loop never
blocks on the network: inputs are drained from a queue (latest wins inside
the Session) and snapshots go out via an unawaited-backlog-free send per
tick. The loaded model is shared read-only across sessions.
"""

from __future__ import annotations

import asyncio
import logging
import random
from pathlib import Path

from .config import GameConfig, config_fingerprint
from .evaluation import GreedyModelPolicy
from .model import load_model
from .protocol import (
    PROTOCOL_VERSION,
    ProtocolError,
    Session,
    TICK_RATE,
    decode_message,
    encode_message,
    error_message,
)
from .sim import Observation

logger = logging.getLogger(__name__)


class CheckpointMismatch(RuntimeError):
    """Checkpoint fingerprint does not match the arena config."""


def load_agent(checkpoint: str | Path, config: GameConfig):
    """Greedy policy from a checkpoint, refusing config mismatches."""
    model, meta = load_model(checkpoint)
    expected = config_fingerprint(config)
    stored = meta.get("fingerprint")
    if stored is not None and stored != expected:
        raise CheckpointMismatch(
            f"checkpoint was trained on config {stored}, server runs {expected}"
        )
    return GreedyModelPolicy(model)


async def run_session(
    websocket, config: GameConfig, agent, seed: int, tick_period: float | None = None
) -> None:
    fingerprint = config_fingerprint(config)
    session = Session(config, agent, seed=seed, fingerprint=fingerprint)
    if tick_period is None:
        tick_period = 1.0 / TICK_RATE

    async def _fail(exc: ProtocolError) -> None:
        logger.warning("closing session: %s", exc)
        try:
            await websocket.send(encode_message(error_message(str(exc))))
        except Exception:
            pass
        await websocket.close()

    # Handshake: the first frame must be a valid hello.
    try:
        raw = await websocket.recv()
        for reply in session.handle_message(decode_message(raw)):
            await websocket.send(encode_message(reply))
    except ProtocolError as exc:
        await _fail(exc)
        return

    async def reader() -> None:
        # Messages apply as they arrive; latest-wins lives in Session.
        async for raw in websocket:
            for reply in session.handle_message(decode_message(raw)):
                await websocket.send(encode_message(reply))

    reader_task = asyncio.create_task(reader())
    loop = asyncio.get_running_loop()
    next_tick = loop.time() + tick_period
    try:
        while not reader_task.done():
            for message in session.tick():
                await websocket.send(encode_message(message))
            delay = next_tick - loop.time()
            next_tick += tick_period
            # Always yield so the reader task and peers make progress.
            await asyncio.sleep(delay if delay > 0 else 0)
        # Surface reader failures (protocol violations, disconnects).
        exc = reader_task.exception()
        if isinstance(exc, ProtocolError):
            await _fail(exc)
    except Exception:
        logger.debug("session send failed; client likely disconnected")
    finally:
        reader_task.cancel()


async def serve(
    config: GameConfig,
    checkpoint: str | Path | None,
    port: int,
    host: str = "127.0.0.1",
    seed: int = 0,
    agent=None,
) -> None:
    """Serve play sessions until cancelled.

    `agent` overrides the checkpoint policy (used by scripted opponents and
    tests); exactly one of checkpoint/agent must be provided.
    """
    import websockets

    if agent is None:
        if checkpoint is None:
            raise ValueError("need a checkpoint or an explicit agent policy")
        agent = load_agent(checkpoint, config)

    async def handler(websocket):
        await run_session(websocket, config, agent, seed)

    async with websockets.serve(handler, host, port):
        logger.info("play server listening on ws://%s:%d", host, port)
        await asyncio.Future()  # run until cancelled
