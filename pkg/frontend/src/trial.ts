/**
 * Per-trial presentation state: side randomization and response latency.
 *
 * The pair the service sends has a fixed (left, right) order; to avoid a
 * positional bias the UI re-randomizes which stimulus appears on which side.
 * Latency is measured from the moment *both* images have finished loading,
 * not from when the trial data arrived.
 */

import type { PendingTrial, TrialSide } from "./api.js";

export interface PresentedTrial {
  token: string;
  index: number;
  total: number;
  /** Stimulus shown on the viewer's left. */
  left: TrialSide;
  /** Stimulus shown on the viewer's right. */
  right: TrialSide;
  /** True when the sides were swapped relative to the service's order. */
  swapped: boolean;
}

export type Rng = () => number;

/** Deterministic RNG (mulberry32) so presentations are reproducible. */
export function seededRng(seed: number): Rng {
  let state = seed >>> 0;
  return () => {
    state = (state + 0x6d2b79f5) >>> 0;
    let t = state;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function presentTrial(trial: PendingTrial, rng: Rng): PresentedTrial {
  const swapped = rng() < 0.5;
  return {
    token: trial.token,
    index: trial.index,
    total: trial.total,
    left: swapped ? trial.right : trial.left,
    right: swapped ? trial.left : trial.right,
    swapped,
  };
}

export type Clock = () => number;

/**
 * Latency timer armed when both stimuli are on screen. Choices made before
 * that point have no latency and must be ignored by the caller.
 */
export class TrialTimer {
  private loadedAt: number | null = null;

  constructor(private readonly clock: Clock = () => Date.now()) {}

  reset(): void {
    this.loadedAt = null;
  }

  markImagesLoaded(): void {
    if (this.loadedAt === null) {
      this.loadedAt = this.clock();
    }
  }

  get armed(): boolean {
    return this.loadedAt !== null;
  }

  /** Milliseconds since both images loaded; null if they have not. */
  elapsedMs(): number | null {
    if (this.loadedAt === null) {
      return null;
    }
    return Math.max(1, this.clock() - this.loadedAt);
  }
}
