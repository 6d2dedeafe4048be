// Typed client for the elicit session service. Shapes mirror the server's
// JSON exactly (snake_case and all) so a snapshot fetched here compares
// byte-for-byte against one fetched by any other client.

export interface HeatmapPayload {
  rows: string[];
  cols: string[];
  cell_mean: (number | null)[][];
  total_count: number[];
}

export interface PendingQuery {
  features: string[];
  heatmap: HeatmapPayload;
}

export interface SessionView {
  id: string;
  condition: string;
  iteration: number;
  status: string;
  terminal: boolean;
  pending_query: PendingQuery | null;
  metrics: { mse: number; n_relevant: number };
}

export interface IterationOutcome {
  iteration: number;
  mse: number;
  n_positive: number;
  n_negative: number;
  mean_relevance: number;
  predictions_digest: string;
}

export interface SessionMetrics {
  mse_history: number[];
  relevance: { n_positive: number; positive_features: string[] };
}

export interface TranscriptStep {
  query: number[];
  responses: Record<string, number>;
}

export interface SessionSnapshot {
  format: string;
  id: string;
  condition: string;
  seed: number;
  config: { max_iterations: number; batch_size: number } & Record<string, unknown>;
  transcript: TranscriptStep[];
  mse_history: number[];
}

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly detail: string,
  ) {
    super(detail);
    this.name = "ApiError";
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ElicitClient {
  // Wrapping keeps `fetch` bound to its global; browsers throw on unbound calls.
  constructor(
    private readonly base: string,
    private readonly fetchImpl: FetchLike = (input, init) => globalThis.fetch(input, init),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { "Content-Type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const resp = await this.fetchImpl(this.base + path, init);
    if (!resp.ok) {
      let detail = resp.statusText;
      try {
        const parsed = (await resp.json()) as { detail?: unknown };
        if (typeof parsed.detail === "string") detail = parsed.detail;
        else if (parsed.detail !== undefined) detail = JSON.stringify(parsed.detail);
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(resp.status, detail);
    }
    return (await resp.json()) as T;
  }

  health(): Promise<{ status: string }> {
    return this.request("GET", "/health");
  }

  createSession(body: {
    condition: string;
    seed: number;
    id?: string;
    dataset?: string;
  }): Promise<SessionView> {
    return this.request("POST", "/sessions", body);
  }

  getSession(id: string): Promise<SessionView> {
    return this.request("GET", `/sessions/${encodeURIComponent(id)}`);
  }

  postQuery(id: string): Promise<SessionView> {
    return this.request("POST", `/sessions/${encodeURIComponent(id)}/query`);
  }

  postFeedback(id: string, answers: Record<string, number>): Promise<IterationOutcome> {
    return this.request("POST", `/sessions/${encodeURIComponent(id)}/feedback`, answers);
  }

  getMetrics(id: string): Promise<SessionMetrics> {
    return this.request("GET", `/sessions/${encodeURIComponent(id)}/metrics`);
  }

  getHeatmap(id: string, features: string[]): Promise<HeatmapPayload> {
    const param = encodeURIComponent(features.join(","));
    return this.request("GET", `/sessions/${encodeURIComponent(id)}/heatmap?features=${param}`);
  }

  getSnapshot(id: string): Promise<SessionSnapshot> {
    return this.request("GET", `/sessions/${encodeURIComponent(id)}/snapshot`);
  }
}
