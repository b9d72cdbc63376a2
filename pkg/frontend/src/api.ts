import type {
  AskResponse,
  ErrorEnvelope,
  GraphDescription,
  MetricsReport,
} from "./types.js";

/** The gateway refused the request and sent a structured error envelope. */
export class GatewayError extends Error {
  constructor(
    readonly status: number,
    readonly envelope: ErrorEnvelope,
  ) {
    super(envelope.message);
  }
}

/** The gateway could not be reached at all (network-level failure). */
export class ConnectionError extends Error {
  constructor(readonly cause: unknown) {
    super("gateway unreachable");
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  let resp: Response;
  try {
    resp = await fetch(url, init);
  } catch (err) {
    throw new ConnectionError(err);
  }
  const body = await resp.json();
  if (!resp.ok) {
    throw new GatewayError(resp.status, body.error as ErrorEnvelope);
  }
  return body as T;
}

export class GatewayClient {
  constructor(readonly baseUrl: string) {}

  ask(
    question: string,
    corpusId: string,
    k: number,
    threshold: number,
  ): Promise<AskResponse> {
    return request<AskResponse>(`${this.baseUrl}/entry/ask?debug=true`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({
        input: { question, corpus_id: corpusId, k, threshold },
      }),
    });
  }

  graph(): Promise<GraphDescription> {
    return request<GraphDescription>(`${this.baseUrl}/graph`);
  }

  metrics(): Promise<MetricsReport> {
    return request<MetricsReport>(`${this.baseUrl}/metrics`);
  }
}

/** Corpus list the gateway advertises alongside the graph, if any. */
export function corporaFrom(graph: GraphDescription): string[] {
  return graph.metadata?.corpora ?? [];
}
