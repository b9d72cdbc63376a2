// Shapes of the gateway's JSON responses. The console is a pure client of
// these endpoints; nothing here exists only for the UI.

export interface Answer {
  text: string;
  begin_char: number;
  end_char: number;
  score: number;
  no_answer_score: number;
  doc_id: string;
}

export interface AskOutput {
  answers: Answer[];
}

export interface InvocationRecord {
  node: string;
  frame: number; // -1 for root-frame invocations
  start_offset_ms: number;
  duration_ms: number;
  status: string; // ok | timeout | node_error | transport_error
  input_snapshot?: string;
  output_snapshot?: string;
  truncated?: boolean;
}

export interface AskResponse {
  output: AskOutput;
  trace?: InvocationRecord[];
  total_duration_ms?: number;
}

export interface ErrorEnvelope {
  code: string;
  message: string;
  node?: string;
  chain?: string[];
}

export interface GraphDescription {
  nodes: { name: string; service: string; parallel: boolean }[];
  regions: { origin: string; members: string[] }[];
  topo_order: string[];
  metadata?: { corpora?: string[] };
}

export interface NodeMetrics {
  count: number;
  p50_ms: number | null;
  p95_ms: number | null;
}

export interface MetricsReport {
  nodes: Record<string, NodeMetrics>;
  entries: Record<string, { requests: number; errors: number }>;
}
