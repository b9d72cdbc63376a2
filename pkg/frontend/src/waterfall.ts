import type { InvocationRecord } from "./types.js";

/** One bar of the trace waterfall, positions as percentages of the total. */
export interface Bar {
  node: string;
  frame: number;
  label: string;
  startPct: number;
  widthPct: number;
  durationMs: number;
  status: string;
  inputSnapshot: string | null;
  outputSnapshot: string | null;
}

/** Bars for one node, fan-out frames grouped together. */
export interface BarGroup {
  node: string;
  fanout: boolean;
  bars: Bar[];
}

const MIN_WIDTH_PCT = 0.5; // keep near-zero bars visible

/** Lay out invocation records as a waterfall. Records of the same node are
 * grouped (fan-out frames side by side under one label); record order is
 * preserved within and across groups. */
export function buildWaterfall(records: InvocationRecord[]): BarGroup[] {
  if (records.length === 0) return [];
  const total = Math.max(
    1e-9,
    ...records.map((r) => r.start_offset_ms + r.duration_ms),
  );
  const groups: BarGroup[] = [];
  let current: BarGroup | null = null;
  for (const r of records) {
    if (current === null || current.node !== r.node) {
      current = { node: r.node, fanout: false, bars: [] };
      groups.push(current);
    }
    current.bars.push({
      node: r.node,
      frame: r.frame,
      label: r.frame >= 0 ? `${r.node}[${r.frame}]` : r.node,
      startPct: (r.start_offset_ms / total) * 100,
      widthPct: Math.max(MIN_WIDTH_PCT, (r.duration_ms / total) * 100),
      durationMs: r.duration_ms,
      status: r.status,
      inputSnapshot: r.input_snapshot ?? null,
      outputSnapshot: r.output_snapshot ?? null,
    });
  }
  for (const g of groups) {
    g.fanout = g.bars.some((b) => b.frame >= 0);
  }
  return groups;
}

export function barCount(groups: BarGroup[]): number {
  return groups.reduce((n, g) => n + g.bars.length, 0);
}
