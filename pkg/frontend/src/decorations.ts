// Decorations map the service's removable entries (UTF-8 byte spans) onto
// the JavaScript string (UTF-16 code units) so the renderer can slice it.

import type { JobSnapshot } from "./api.js";

export type DecorationStyle = "dead" | "excluded" | "plain";

export interface Decoration {
  id: string;
  kind: string;
  method: string;
  start: number; // UTF-16 index
  end: number;
  style: DecorationStyle;
}

const encoder = new TextEncoder();

// Byte offsets from the engine always sit on code-point boundaries, so a
// lookup table over those boundaries is total for valid input.
export function byteToUtf16(text: string): (byteOffset: number) => number {
  const table = new Map<number, number>([[0, 0]]);
  let bytes = 0;
  let units = 0;
  for (const ch of text) {
    bytes += encoder.encode(ch).length;
    units += ch.length;
    table.set(bytes, units);
  }
  return (byteOffset: number) => {
    const index = table.get(byteOffset);
    if (index === undefined) {
      throw new Error(`byte offset ${byteOffset} is not a code-point boundary`);
    }
    return index;
  };
}

export function decorationsFor(snapshot: JobSnapshot): Decoration[] {
  const toUtf16 = byteToUtf16(snapshot.source);
  const decorations = snapshot.removable.map((entry) => ({
    id: entry.id,
    kind: entry.kind,
    method: entry.method,
    start: toUtf16(entry.start),
    end: toUtf16(entry.end),
    style: "dead" as DecorationStyle,
  }));
  decorations.sort((a, b) => a.start - b.start || a.end - b.end);
  for (let i = 1; i < decorations.length; i++) {
    const prev = decorations[i - 1]!;
    const here = decorations[i]!;
    if (here.start < prev.end) {
      throw new Error(`overlapping decorations: ${prev.id} and ${here.id}`);
    }
  }
  return decorations;
}
