/**
 * Minimum-viewport guard.
 *
 * The study requires a viewport of at least 1028x764 pixels. The guard is
 * checked before a session starts and re-checked on every resize; while the
 * viewport is too small the session flow is blocked and no responses can be
 * submitted.
 */

export const MIN_VIEWPORT_WIDTH = 1028;
export const MIN_VIEWPORT_HEIGHT = 764;

export interface ViewportSize {
  width: number;
  height: number;
}

export function viewportIsAcceptable(size: ViewportSize): boolean {
  return (
    size.width >= MIN_VIEWPORT_WIDTH && size.height >= MIN_VIEWPORT_HEIGHT
  );
}

export class ViewportGuard {
  private current: ViewportSize;
  private listeners: Array<(blocked: boolean) => void> = [];

  constructor(initial: ViewportSize) {
    this.current = { ...initial };
  }

  get size(): ViewportSize {
    return { ...this.current };
  }

  get blocked(): boolean {
    return !viewportIsAcceptable(this.current);
  }

  onChange(listener: (blocked: boolean) => void): void {
    this.listeners.push(listener);
  }

  resize(size: ViewportSize): void {
    const wasBlocked = this.blocked;
    this.current = { ...size };
    if (this.blocked !== wasBlocked) {
      for (const listener of this.listeners) {
        listener(this.blocked);
      }
    }
  }
}
