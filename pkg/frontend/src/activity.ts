// Optional background behaviour tied to editor activity. Disabled by
// default: until the user opts in, this module must make no calls at all.

import type { Mode } from "./api.js";

export interface ActivityHooks {
  onCancel: () => void;
  onIdle: () => void;
}

export interface TimerHost {
  setTimeout(fn: () => void, ms: number): unknown;
  clearTimeout(handle: unknown): void;
}

export const DEFAULT_IDLE_MS = 10_000;

export class ActivityMonitor {
  private enabled = false;
  private mode: Mode = "idle";
  private cancelSentForRun = false;
  private idleHandle: unknown = null;

  constructor(
    private readonly hooks: ActivityHooks,
    private readonly timers: TimerHost,
    private readonly idleMs: number = DEFAULT_IDLE_MS,
  ) {}

  isEnabled(): boolean {
    return this.enabled;
  }

  setEnabled(enabled: boolean): void {
    this.enabled = enabled;
    if (!enabled) {
      this.clearIdleTimer();
    }
  }

  modeChanged(mode: Mode): void {
    if (this.mode === "running" && mode !== "running") {
      this.cancelSentForRun = false;
    }
    this.mode = mode;
  }

  keystroke(): void {
    if (!this.enabled) {
      return;
    }
    if (this.mode === "running" && !this.cancelSentForRun) {
      this.cancelSentForRun = true;
      this.hooks.onCancel();
    }
    this.armIdleTimer();
  }

  dispose(): void {
    this.clearIdleTimer();
  }

  private armIdleTimer(): void {
    this.clearIdleTimer();
    this.idleHandle = this.timers.setTimeout(() => {
      this.idleHandle = null;
      this.hooks.onIdle();
    }, this.idleMs);
  }

  private clearIdleTimer(): void {
    if (this.idleHandle !== null) {
      this.timers.clearTimeout(this.idleHandle);
      this.idleHandle = null;
    }
  }
}
