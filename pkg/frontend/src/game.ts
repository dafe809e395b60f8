// Target-clicking demo game: the cursor is the nose, the trigger is a left
// blink. Purely a projection of server click events; deterministic given
// the seed and the event stream.

export interface Target {
  x: number;
  y: number;
  radius: number;
}

export interface GameState {
  target: Target;
  hits: number;
  misses: number;
}

// mulberry32: small seeded PRNG, enough for target placement
export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export class TargetGame {
  readonly screenW: number;
  readonly screenH: number;
  readonly radius: number;
  hits = 0;
  misses = 0;
  target: Target;
  private rand: () => number;

  constructor(screenW: number, screenH: number, seed: number, radius = 40) {
    this.screenW = screenW;
    this.screenH = screenH;
    this.radius = radius;
    this.rand = mulberry32(seed);
    // first target sits at the center: freshly calibrated cursor starts there
    this.target = { x: screenW / 2, y: screenH / 2, radius };
  }

  private respawn(): void {
    const margin = this.radius + 10;
    this.target = {
      x: margin + this.rand() * (this.screenW - 2 * margin),
      y: margin + this.rand() * (this.screenH - 2 * margin),
      radius: this.radius,
    };
  }

  /** Feed one left-click at the given cursor position. */
  click(cursorX: number, cursorY: number): boolean {
    const dx = cursorX - this.target.x;
    const dy = cursorY - this.target.y;
    const hit = dx * dx + dy * dy <= this.target.radius * this.target.radius;
    if (hit) {
      this.hits += 1;
      this.respawn();
    } else {
      this.misses += 1;
    }
    return hit;
  }

  get state(): GameState {
    return { target: { ...this.target }, hits: this.hits, misses: this.misses };
  }
}

import type { ServerState } from "./wire.js";

/** Apply one server state message: left clicks at the current cursor. */
export function targetGameStep(game: TargetGame, state: ServerState): boolean {
  if (!state.calibrated || state.pointer === null) {
    return false;
  }
  let anyHit = false;
  for (const event of state.events) {
    if (event.kind === "click" && event.button === "left") {
      anyHit = game.click(state.pointer.x, state.pointer.y) || anyHit;
    }
  }
  return anyHit;
}
