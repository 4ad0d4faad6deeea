/** Thin fetch client for the recommendation service. */

import type {
  ApiErrorBody,
  DatasetDescription,
  RoundPayload,
  SessionSummary,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly body: ApiErrorBody,
  ) {
    super(body.message);
  }
}

export interface SessionOptions {
  seed?: number;
  iterations?: number;
  top_k?: number;
  hint_k?: number;
  hint_budget?: number;
}

async function asJson<T>(res: Response): Promise<T> {
  const body = await res.json();
  if (!res.ok) {
    throw new ApiError(res.status, body as ApiErrorBody);
  }
  return body as T;
}

/** All round-trips the UI performs; everything else is client-side. */
export class ApiClient {
  constructor(private readonly base: string = "") {}

  private url(path: string): string {
    return `${this.base}/api/v1${path}`;
  }

  async uploadDataset(name: string, csvText: string): Promise<DatasetDescription> {
    const res = await fetch(this.url("/datasets"), {
      method: "POST",
      headers: { "Content-Type": "text/csv", "X-Dataset-Name": name },
      body: csvText,
    });
    return asJson<DatasetDescription>(res);
  }

  async createSession(datasetId: string, options: SessionOptions = {}): Promise<RoundPayload> {
    const res = await fetch(this.url("/sessions"), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ dataset_id: datasetId, ...options }),
    });
    return asJson<RoundPayload>(res);
  }

  async applyHint(sessionId: string, hintId: string): Promise<RoundPayload> {
    const res = await fetch(
      this.url(`/sessions/${sessionId}/hints/${encodeURIComponent(hintId)}`),
      { method: "POST" },
    );
    return asJson<RoundPayload>(res);
  }

  async getSession(sessionId: string): Promise<SessionSummary> {
    return asJson<SessionSummary>(await fetch(this.url(`/sessions/${sessionId}`)));
  }

  async getRound(sessionId: string, round: number): Promise<RoundPayload> {
    return asJson<RoundPayload>(
      await fetch(this.url(`/sessions/${sessionId}/rounds/${round}`)),
    );
  }

  async recordKept(sessionId: string, round: number, queries: string[]): Promise<string[]> {
    const res = await fetch(this.url(`/sessions/${sessionId}/kept`), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ round, queries }),
    });
    const body = await asJson<{ ok: boolean; kept_union: string[] }>(res);
    return body.kept_union;
  }
}
