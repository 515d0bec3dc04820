/** Client session state: snapshot buffering for interpolation, connection
 * status, and match result. No game logic lives here beyond interpolation. */

import {
  ConfigMessage,
  EndMessage,
  ServerMessage,
  SnapshotMessage,
  decodeServerMessage,
} from "./protocol.js";

export type ConnectionStatus = "connecting" | "open" | "closed" | "error";

export class ClientState {
  config: ConfigMessage | null = null;
  previous: SnapshotMessage | null = null;
  latest: SnapshotMessage | null = null;
  latestArrivalMs = 0;
  status: ConnectionStatus = "connecting";
  result: EndMessage | null = null;
  errorMessage: string | null = null;

  /** Apply one decoded server message; returns it for convenience. */
  apply(message: ServerMessage, nowMs: number): ServerMessage {
    switch (message.type) {
      case "config":
        this.config = message;
        this.previous = null;
        this.latest = null;
        this.result = null;
        break;
      case "snapshot":
        this.previous = this.latest;
        this.latest = message;
        this.latestArrivalMs = nowMs;
        break;
      case "end":
        this.result = message;
        break;
      case "error":
        this.status = "error";
        this.errorMessage = message.message;
        break;
    }
    return message;
  }

  applyRaw(raw: string, nowMs: number): ServerMessage {
    return this.apply(decodeServerMessage(raw), nowMs);
  }

  /** Interpolation factor for rendering at `nowMs`. */
  alpha(nowMs: number): number {
    if (!this.config || !this.latest || !this.previous) return 1;
    const tickMs = 1000 / this.config.arena.tick_rate;
    const elapsed = nowMs - this.latestArrivalMs;
    return Math.min(1, Math.max(0, elapsed / tickMs));
  }
}
