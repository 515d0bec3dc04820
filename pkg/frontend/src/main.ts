/** Browser bootstrap: WebSocket wiring, keyboard capture, render loop. */

import { ClientState } from "./client.js";
import { InputTracker } from "./input.js";
import { PROTOCOL_VERSION, encodeClientMessage } from "./protocol.js";
import { render } from "./render.js";

const DEFAULT_URL = "ws://127.0.0.1:8765";

function start(): void {
  const canvas = document.getElementById("arena") as HTMLCanvasElement;
  const statusLine = document.getElementById("status") as HTMLElement;
  const params = new URLSearchParams(window.location.search);
  const url = params.get("server") ?? DEFAULT_URL;

  const state = new ClientState();
  const tracker = new InputTracker();
  const socket = new WebSocket(url);
  let inputTimer: number | null = null;
  let lastSentTick = -1;

  socket.onopen = () => {
    state.status = "open";
    statusLine.textContent = `connected to ${url}`;
    socket.send(encodeClientMessage({ type: "hello", version: PROTOCOL_VERSION }));
  };
  socket.onclose = () => {
    state.status = "closed";
    statusLine.textContent = "disconnected";
    if (inputTimer !== null) window.clearInterval(inputTimer);
  };
  socket.onerror = () => {
    state.status = "error";
    statusLine.textContent = "connection error";
  };
  socket.onmessage = (event) => {
    const message = state.applyRaw(String(event.data), performance.now());
    if (message.type === "config") {
      canvas.width = message.arena.width;
      canvas.height = message.arena.height;
      // Emit at most one input per tick, aligned to the server tick rate.
      const periodMs = 1000 / message.arena.tick_rate;
      if (inputTimer !== null) window.clearInterval(inputTimer);
      inputTimer = window.setInterval(() => {
        if (!state.latest || state.result) return;
        if (state.latest.tick === lastSentTick) return;
        lastSentTick = state.latest.tick;
        const { moveDir, shoot } = tracker.current();
        socket.send(
          encodeClientMessage({
            type: "input",
            tick: state.latest.tick,
            move_dir: moveDir,
            shoot,
          })
        );
      }, periodMs);
    } else if (message.type === "end") {
      statusLine.textContent = `match over: ${message.outcome} (press R for rematch)`;
    } else if (message.type === "error") {
      statusLine.textContent = `server error: ${message.message}`;
    }
  };

  window.addEventListener("keydown", (event) => {
    if (event.code === "KeyR" && state.result) {
      socket.send(encodeClientMessage({ type: "rematch" }));
      statusLine.textContent = "rematch!";
      return;
    }
    if (tracker.keyDown(event.code)) event.preventDefault();
  });
  window.addEventListener("keyup", (event) => {
    if (tracker.keyUp(event.code)) event.preventDefault();
  });

  const ctx = canvas.getContext("2d")!;
  const frame = () => {
    if (state.config && state.latest) {
      render(ctx, {
        config: state.config,
        previous: state.previous,
        latest: state.latest,
        alpha: state.alpha(performance.now()),
        scale: 1,
      });
    }
    window.requestAnimationFrame(frame);
  };
  window.requestAnimationFrame(frame);
}

window.addEventListener("DOMContentLoaded", start);
