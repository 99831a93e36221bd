// Pure view layer: ViewState is derived from job snapshots and rendered to
// an HTML string. Keeping this DOM-free makes the output easy to test and
// deterministic for a given state.

import type { JobSnapshot, Mode } from "./api.js";
import { decorationsFor, type Decoration } from "./decorations.js";

export interface ViewState {
  jobId: string;
  source: string;
  sourceRev: number;
  mode: Mode;
  decorations: Decoration[];
  excluded: string[];
  dirty: string[];
  enabled: boolean; // activity monitor toggle; off unless the user opts in
  staleBanner: boolean;
  pendingSelection: string | null;
  lastError: string | null;
}

export function initialViewState(jobId: string): ViewState {
  return {
    jobId,
    source: "",
    sourceRev: 0,
    mode: "idle",
    decorations: [],
    excluded: [],
    dirty: [],
    enabled: false,
    staleBanner: false,
    pendingSelection: null,
    lastError: null,
  };
}

export function viewStateFrom(snapshot: JobSnapshot, prev?: ViewState): ViewState {
  const base = prev ?? initialViewState(snapshot.id);
  // While a run is in flight the snapshot's removable set is not yet
  // meaningful; keep showing the decorations from the last success.
  const decorations =
    snapshot.mode === "running" ? base.decorations : decorationsFor(snapshot);
  return {
    ...base,
    jobId: snapshot.id,
    source: snapshot.source,
    sourceRev: snapshot.source_rev,
    mode: snapshot.mode,
    decorations,
    excluded: [...snapshot.excluded].sort(),
    dirty: [...snapshot.dirty].sort(),
    lastError: snapshot.last_error,
  };
}

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function modeBadge(mode: Mode): string {
  const spinner = mode === "running" ? '<span class="spinner"></span>' : "";
  return `<span class="mode mode-${mode}">${spinner}${mode}</span>`;
}

function codePane(source: string, decorations: Decoration[]): string {
  const parts: string[] = [];
  let cursor = 0;
  for (const d of decorations) {
    parts.push(escapeHtml(source.slice(cursor, d.start)));
    const id = escapeHtml(d.id);
    parts.push(`<button class="bulb" data-id="${id}" title="remove…">\u{1F4A1}</button>`);
    parts.push(`<span class="dead" data-id="${id}">${escapeHtml(source.slice(d.start, d.end))}</span>`);
    cursor = d.end;
  }
  parts.push(escapeHtml(source.slice(cursor)));
  return `<pre class="code">${parts.join("")}</pre>`;
}

export function renderView(state: ViewState): string {
  const lines: string[] = [];
  lines.push('<div class="app">');
  lines.push('<header class="toolbar">');
  lines.push(modeBadge(state.mode));
  for (const name of state.excluded) {
    lines.push(`<span class="badge excluded">${escapeHtml(name)}: excluded</span>`);
  }
  lines.push(
    `<label class="monitor-toggle"><input type="checkbox" id="monitor"${
      state.enabled ? " checked" : ""
    }> auto analyze</label>`,
  );
  lines.push(`<span class="rev">rev ${state.sourceRev}</span>`);
  lines.push("</header>");
  if (state.staleBanner) {
    lines.push(
      '<div class="banner stale">results are stale — <button class="refresh">refresh</button> and retry</div>',
    );
  }
  if (state.lastError !== null) {
    lines.push(`<div class="banner error">${escapeHtml(state.lastError)}</div>`);
  }
  if (state.mode !== "running" && state.decorations.length === 0) {
    lines.push('<div class="empty">no removable annotations</div>');
  }
  lines.push(codePane(state.source, state.decorations));
  lines.push("</div>");
  return lines.join("\n");
}
