import type { MetricsReport } from "./types.js";

/** One row of the per-node metrics table. Numbers are passed through from
 * the gateway verbatim; the console never recomputes percentiles. */
export interface MetricsRow {
  node: string;
  count: number;
  p50: string;
  p95: string;
}

function cell(value: number | null): string {
  return value === null ? "—" : String(value);
}

export function metricsRows(report: MetricsReport): MetricsRow[] {
  return Object.keys(report.nodes)
    .sort()
    .map((node) => ({
      node,
      count: report.nodes[node].count,
      p50: cell(report.nodes[node].p50_ms),
      p95: cell(report.nodes[node].p95_ms),
    }));
}
