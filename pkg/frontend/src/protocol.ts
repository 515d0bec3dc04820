/** Play-session wire types, mirroring the server's JSON schema verbatim. */

export const PROTOCOL_VERSION = 1;

export interface EntitySnapshot {
  id: number;
  kind: "player" | "enemy";
  x: number;
  y: number;
  fx: number;
  fy: number;
  health: number;
  ammo: number;
  cooldown: number;
  reload: number;
}

export interface BulletSnapshot {
  x: number;
  y: number;
  dx: number;
  dy: number;
  owner: number;
  speed: number;
}

/** Axis-aligned wall as [minX, minY, maxX, maxY]. */
export type WallSnapshot = [number, number, number, number];

export interface ConfigMessage {
  type: "config";
  arena: {
    width: number;
    height: number;
    entity_radius: number;
    max_steps: number;
    tick_rate: number;
  };
  entity_ids: { player: number; enemies: number[] };
  fingerprint: string | null;
  version: number;
}

export interface SnapshotMessage {
  type: "snapshot";
  tick: number;
  entities: EntitySnapshot[];
  bullets: BulletSnapshot[];
  walls: WallSnapshot[];
  outcome: "ongoing" | "win" | "loss" | "timeout";
}

export interface EndMessage {
  type: "end";
  outcome: string;
  stats: Record<string, number>;
}

export interface ErrorMessage {
  type: "error";
  message: string;
}

export type ServerMessage = ConfigMessage | SnapshotMessage | EndMessage | ErrorMessage;

export interface HelloMessage {
  type: "hello";
  version: number;
}

export interface InputMessage {
  type: "input";
  tick: number;
  move_dir: number;
  shoot: boolean;
}

export interface RematchMessage {
  type: "rematch";
}

export type ClientMessage = HelloMessage | InputMessage | RematchMessage;

export function decodeServerMessage(raw: string): ServerMessage {
  const parsed = JSON.parse(raw) as { type?: string };
  if (
    parsed.type !== "config" &&
    parsed.type !== "snapshot" &&
    parsed.type !== "end" &&
    parsed.type !== "error"
  ) {
    throw new Error(`unknown server message type: ${parsed.type}`);
  }
  return parsed as ServerMessage;
}

export function encodeClientMessage(message: ClientMessage): string {
  // Canonical form: sorted keys, compact separators, matching the server.
  const record = message as unknown as Record<string, unknown>;
  const sorted: Record<string, unknown> = {};
  for (const key of Object.keys(record).sort()) {
    sorted[key] = record[key];
  }
  return JSON.stringify(sorted);
}
