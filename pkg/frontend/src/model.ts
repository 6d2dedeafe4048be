// View-model for one elicitation session. Everything here is derived from
// server responses; the browser never owns model state, so rebuilding the
// view from a fresh GET must reproduce it exactly.

import type { SessionView } from "./api.js";

/** Relevance judgment for one displayed feature: unset until the user decides. */
export type Toggle = 0 | 1 | null;

export type CellPaint =
  | { kind: "value"; color: string; label: string }
  | { kind: "nodata" };

export interface ColumnView {
  feature: string;
  toggle: Toggle;
  totalCount: number;
  cells: (number | null)[];
}

export interface ElicitationView {
  sessionId: string;
  condition: string;
  iteration: number;
  maxIterations: number | null;
  terminal: boolean;
  updating: boolean;
  rows: string[];
  columns: ColumnView[];
  mseHistory: number[];
  error: string | null;
}

// Okabe-Ito blue / vermillion around a neutral midpoint: diverging and
// distinguishable under the common color-vision deficiencies.
const LOW: [number, number, number] = [0, 114, 178];
const MID: [number, number, number] = [247, 247, 247];
const HIGH: [number, number, number] = [213, 94, 0];

function mix(a: [number, number, number], b: [number, number, number], t: number): string {
  const c = a.map((v, i) => Math.round(v + (b[i]! - v) * t));
  return `rgb(${c[0]}, ${c[1]}, ${c[2]})`;
}

/** Map a cell mean onto the diverging scale; `extent` is max |value| over the grid. */
export function divergingColor(value: number, extent: number): string {
  if (!(extent > 0)) return mix(MID, MID, 0);
  const t = Math.max(-1, Math.min(1, value / extent));
  return t < 0 ? mix(MID, LOW, -t) : mix(MID, HIGH, t);
}

/**
 * Decide how a cell is drawn. Null means the category had no documents with
 * the feature active, which is different information from a mean of zero;
 * it gets no scale color at all.
 */
export function paintCell(value: number | null, extent: number): CellPaint {
  if (value === null) return { kind: "nodata" };
  return { kind: "value", color: divergingColor(value, extent), label: value.toFixed(3) };
}

export function colorExtent(columns: ColumnView[]): number {
  let extent = 0;
  for (const col of columns) {
    for (const v of col.cells) {
      if (v !== null) extent = Math.max(extent, Math.abs(v));
    }
  }
  return extent;
}

export interface ViewOptions {
  maxIterations?: number | null;
  updating?: boolean;
  error?: string | null;
}

/**
 * Combine the server's session view with locally held toggles. Columns are
 * present only while a query is pending; a terminal session renders as a
 * read-only summary.
 */
export function buildView(
  session: SessionView,
  mseHistory: number[],
  toggles: ReadonlyMap<string, Toggle>,
  opts: ViewOptions = {},
): ElicitationView {
  const pending = session.pending_query;
  let rows: string[] = [];
  let columns: ColumnView[] = [];
  if (pending !== null) {
    const heat = pending.heatmap;
    rows = heat.rows.slice();
    columns = heat.cols.map((feature, j) => ({
      feature,
      toggle: toggles.get(feature) ?? null,
      totalCount: heat.total_count[j] ?? 0,
      cells: heat.rows.map((_, i) => heat.cell_mean[i]?.[j] ?? null),
    }));
  }
  return {
    sessionId: session.id,
    condition: session.condition,
    iteration: session.iteration,
    maxIterations: opts.maxIterations ?? null,
    terminal: session.terminal,
    updating: opts.updating ?? false,
    rows,
    columns,
    mseHistory: mseHistory.slice(),
    error: opts.error ?? null,
  };
}

/** Submission is allowed only once every displayed feature has a judgment. */
export function canSubmit(view: ElicitationView): boolean {
  return (
    !view.terminal &&
    !view.updating &&
    view.columns.length > 0 &&
    view.columns.every((c) => c.toggle !== null)
  );
}

/** The exact feedback payload the API expects: feature name to 0 or 1. */
export function feedbackPayload(view: ElicitationView): Record<string, number> {
  const out: Record<string, number> = {};
  for (const col of view.columns) {
    if (col.toggle === null) throw new Error(`feature ${col.feature} has no judgment yet`);
    out[col.feature] = col.toggle;
  }
  return out;
}
