/** Keyboard state -> move-direction codes; opposing keys cancel to Stay. */

export const DIRECTION_CODES = {
  stay: 0,
  n: 1,
  ne: 2,
  e: 3,
  se: 4,
  s: 5,
  sw: 6,
  w: 7,
  nw: 8,
} as const;

export const KEY_BINDINGS: Record<string, "up" | "down" | "left" | "right" | "fire"> = {
  KeyW: "up",
  ArrowUp: "up",
  KeyS: "down",
  ArrowDown: "down",
  KeyA: "left",
  ArrowLeft: "left",
  KeyD: "right",
  ArrowRight: "right",
  Space: "fire",
};

export interface HeldKeys {
  up: boolean;
  down: boolean;
  left: boolean;
  right: boolean;
  fire: boolean;
}

export function emptyHeld(): HeldKeys {
  return { up: false, down: false, left: false, right: false, fire: false };
}

/** Resolve held movement keys to a direction code; opposites cancel. */
export function directionFromKeys(held: HeldKeys): number {
  const dx = (held.right ? 1 : 0) - (held.left ? 1 : 0);
  const dy = (held.down ? 1 : 0) - (held.up ? 1 : 0);
  if (dx === 0 && dy === 0) return DIRECTION_CODES.stay;
  if (dx === 0) return dy < 0 ? DIRECTION_CODES.n : DIRECTION_CODES.s;
  if (dy === 0) return dx > 0 ? DIRECTION_CODES.e : DIRECTION_CODES.w;
  if (dx > 0) return dy < 0 ? DIRECTION_CODES.ne : DIRECTION_CODES.se;
  return dy < 0 ? DIRECTION_CODES.nw : DIRECTION_CODES.sw;
}

/** Tracks held keys from key events; one instance per session. */
export class InputTracker {
  held: HeldKeys = emptyHeld();

  keyDown(code: string): boolean {
    const action = KEY_BINDINGS[code];
    if (!action) return false;
    this.held[action] = true;
    return true;
  }

  keyUp(code: string): boolean {
    const action = KEY_BINDINGS[code];
    if (!action) return false;
    this.held[action] = false;
    return true;
  }

  current(): { moveDir: number; shoot: boolean } {
    return { moveDir: directionFromKeys(this.held), shoot: this.held.fire };
  }
}
