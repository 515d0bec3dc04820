/** Canvas drawing of snapshots with linear interpolation between the two
 * latest frames. Renders only server-authoritative state.
 *
 * The renderer talks to a minimal context interface (a structural subset of
 * CanvasRenderingContext2D) so tests can record draw commands headlessly.
 */

import type { ConfigMessage, EntitySnapshot, SnapshotMessage } from "./protocol.js";

export interface Draw2D {
  fillStyle: string | CanvasGradient | CanvasPattern;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  font: string;
  fillRect(x: number, y: number, w: number, h: number): void;
  strokeRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  fill(): void;
  stroke(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  fillText(text: string, x: number, y: number): void;
}

export const PALETTE = {
  background: "#101418",
  wall: "#4a5460",
  wallEdge: "#6b7684",
  player: "#3a86ff", // blue: the human-controlled entity
  enemy: "#e63946", // red: agent-controlled entities
  bullet: "#ffd166",
  facing: "#e8edf2",
  healthFull: "#52b788",
  healthEmpty: "#343a40",
  ammo: "#ffd166",
  text: "#e8edf2",
} as const;

export interface FrameView {
  config: ConfigMessage;
  previous: SnapshotMessage | null;
  latest: SnapshotMessage;
  /** Interpolation factor in [0, 1] between previous and latest. */
  alpha: number;
  scale: number; // canvas pixels per arena pixel
}

function lerp(a: number, b: number, t: number): number {
  return a + (b - a) * t;
}

function interpolatedEntities(view: FrameView): EntitySnapshot[] {
  const { previous, latest, alpha } = view;
  if (!previous || alpha >= 1) return latest.entities;
  const prevById = new Map(previous.entities.map((e) => [e.id, e]));
  return latest.entities.map((e) => {
    const before = prevById.get(e.id);
    if (!before) return e;
    return { ...e, x: lerp(before.x, e.x, alpha), y: lerp(before.y, e.y, alpha) };
  });
}

export function render(ctx: Draw2D, view: FrameView): void {
  const { config, latest, scale } = view;
  const w = config.arena.width * scale;
  const h = config.arena.height * scale;

  ctx.fillStyle = PALETTE.background;
  ctx.fillRect(0, 0, w, h);

  for (const [x0, y0, x1, y1] of latest.walls) {
    ctx.fillStyle = PALETTE.wall;
    ctx.fillRect(x0 * scale, y0 * scale, (x1 - x0) * scale, (y1 - y0) * scale);
    ctx.strokeStyle = PALETTE.wallEdge;
    ctx.lineWidth = 1;
    ctx.strokeRect(x0 * scale, y0 * scale, (x1 - x0) * scale, (y1 - y0) * scale);
  }

  const radius = config.arena.entity_radius * scale;
  for (const entity of interpolatedEntities(view)) {
    const cx = entity.x * scale;
    const cy = entity.y * scale;
    ctx.fillStyle = entity.kind === "player" ? PALETTE.player : PALETTE.enemy;
    ctx.beginPath();
    ctx.arc(cx, cy, radius, 0, Math.PI * 2);
    ctx.fill();
    // Facing tick.
    ctx.strokeStyle = PALETTE.facing;
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.moveTo(cx, cy);
    ctx.lineTo(cx + entity.fx * radius, cy + entity.fy * radius);
    ctx.stroke();
    // Health pips above the entity.
    for (let i = 0; i < 3; i++) {
      ctx.fillStyle = i < entity.health ? PALETTE.healthFull : PALETTE.healthEmpty;
      ctx.fillRect(cx - radius + i * 9, cy - radius - 8, 7, 4);
    }
  }

  for (const bullet of latest.bullets) {
    ctx.fillStyle = PALETTE.bullet;
    ctx.beginPath();
    ctx.arc(bullet.x * scale, bullet.y * scale, 3, 0, Math.PI * 2);
    ctx.fill();
  }

  // HUD: tick counter plus the player's ammo.
  const player = latest.entities.find((e) => e.kind === "player");
  ctx.fillStyle = PALETTE.text;
  ctx.font = "14px monospace";
  ctx.fillText(`tick ${latest.tick}`, 8, 18);
  if (player) {
    ctx.fillStyle = PALETTE.ammo;
    ctx.fillText(`ammo ${"*".repeat(player.ammo)}`, 8, 36);
  }
  if (latest.outcome !== "ongoing") {
    ctx.fillStyle = PALETTE.text;
    ctx.font = "32px monospace";
    ctx.fillText(latest.outcome.toUpperCase(), w / 2 - 48, h / 2);
  }
}
