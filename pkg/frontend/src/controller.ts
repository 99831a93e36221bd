// Glue between the service client, the view state, and the activity
// monitor. The controller never edits the buffer locally: every change to
// the source goes through the service (/apply or PATCH /source) and the
// buffer is replaced with what the service returns.

import {
  ServiceClient,
  ServiceError,
  type ApplySelect,
  type JobSnapshot,
} from "./api.js";
import { ActivityMonitor, DEFAULT_IDLE_MS, type TimerHost } from "./activity.js";
import { initialViewState, viewStateFrom, type ViewState } from "./render.js";

export class UiController {
  state: ViewState;
  readonly monitor: ActivityMonitor;
  private readonly listeners: Array<(state: ViewState) => void> = [];

  constructor(
    private readonly client: ServiceClient,
    jobId: string,
    timers: TimerHost,
    idleMs: number = DEFAULT_IDLE_MS,
  ) {
    this.state = initialViewState(jobId);
    this.monitor = new ActivityMonitor(
      {
        onCancel: () => {
          void this.client.cancel(this.state.jobId).catch(() => undefined);
        },
        onIdle: () => {
          void this.client
            .idle(this.state.jobId, idleMs)
            .then(() => this.load())
            .catch(() => undefined);
        },
      },
      timers,
      idleMs,
    );
  }

  onChange(listener: (state: ViewState) => void): void {
    this.listeners.push(listener);
  }

  private ingest(snapshot: JobSnapshot): void {
    this.state = viewStateFrom(snapshot, this.state);
    this.monitor.modeChanged(snapshot.mode);
    for (const listener of this.listeners) {
      listener(this.state);
    }
  }

  private update(patch: Partial<ViewState>): void {
    this.state = { ...this.state, ...patch };
    for (const listener of this.listeners) {
      listener(this.state);
    }
  }

  async load(): Promise<void> {
    this.ingest(await this.client.getJob(this.state.jobId));
  }

  async analyze(scope: "all" | { methods: string[] } = "all"): Promise<void> {
    await this.client.analyze(this.state.jobId, scope);
    await this.load();
  }

  setMonitorEnabled(enabled: boolean): void {
    this.monitor.setEnabled(enabled);
    this.update({ enabled });
  }

  keypress(): void {
    this.monitor.keystroke();
  }

  menuOptions(decorationId: string): string[] {
    const decoration = this.state.decorations.find((d) => d.id === decorationId);
    if (decoration === undefined) {
      return [];
    }
    return [
      "remove this",
      `remove all in ${decoration.method}`,
      "remove all in file",
    ];
  }

  async removeThis(id: string): Promise<void> {
    await this.applySelection({ id }, id);
  }

  async removeAllInMethod(method: string): Promise<void> {
    await this.applySelection({ method }, `method:${method}`);
  }

  async removeAllInFile(): Promise<void> {
    await this.applySelection("all", "all");
  }

  async retryPendingSelection(): Promise<void> {
    const pending = this.state.pendingSelection;
    if (pending === null) {
      return;
    }
    if (pending === "all") {
      await this.removeAllInFile();
    } else if (pending.startsWith("method:")) {
      await this.removeAllInMethod(pending.slice("method:".length));
    } else {
      await this.removeThis(pending);
    }
  }

  async commitEdit(source: string): Promise<void> {
    const result = await this.client.patchSource(this.state.jobId, source, this.state.sourceRev);
    this.update({
      source,
      sourceRev: result.source_rev,
      dirty: [...result.dirty].sort(),
      mode: result.mode,
      staleBanner: false,
    });
  }

  private async applySelection(select: ApplySelect, pendingKey: string): Promise<void> {
    try {
      const result = await this.client.apply(this.state.jobId, select, this.state.sourceRev);
      this.update({
        source: result.source,
        sourceRev: result.source_rev,
        staleBanner: false,
        pendingSelection: null,
      });
      await this.load(); // re-decorate from the authoritative snapshot
    } catch (error) {
      if (error instanceof ServiceError && (error.code === "stale" || error.status === 409)) {
        this.update({ staleBanner: true, pendingSelection: pendingKey });
        await this.load();
        return;
      }
      throw error;
    }
  }
}
