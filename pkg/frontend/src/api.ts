/** Thin REST client over the session API. All reasoning stays server-side. */

import type { ActForm, ActResponse, QueryResponse, SessionPayload } from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiRequestError extends Error {
  readonly status: number;

  constructor(status: number, message: string) {
    super(message);
    this.status = status;
  }
}

async function parseError(res: Response): Promise<never> {
  let message = res.statusText || `HTTP ${res.status}`;
  try {
    const body = (await res.json()) as { error?: string };
    if (body.error) message = body.error;
  } catch {
    // non-JSON error body: keep the status text
  }
  throw new ApiRequestError(res.status, message);
}

export class ApiClient {
  private readonly base: string;
  private readonly fetchImpl: FetchLike;

  constructor(baseUrl = "", fetchImpl: FetchLike = (...args) => fetch(...args)) {
    this.base = baseUrl.replace(/\/$/, "");
    this.fetchImpl = fetchImpl;
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const res = await this.fetchImpl(`${this.base}${path}`, init);
    if (!res.ok) await parseError(res);
    if (res.status === 204) return undefined as T;
    return (await res.json()) as T;
  }

  private post<T>(path: string, body: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  health(): Promise<string> {
    return this.fetchImpl(`${this.base}/healthz`).then((r) => r.text());
  }

  createSessionFromPattern(patternId: string): Promise<SessionPayload> {
    return this.post("/sessions", { pattern_id: patternId });
  }

  createSessionFromQuery(query: string): Promise<SessionPayload> {
    return this.post("/sessions", { query });
  }

  getSession(sessionId: string): Promise<SessionPayload> {
    return this.request(`/sessions/${sessionId}`);
  }

  postAct(sessionId: string, act: ActForm): Promise<ActResponse> {
    return this.post(`/sessions/${sessionId}/acts`, act);
  }

  forkSession(sessionId: string): Promise<SessionPayload> {
    return this.post(`/sessions/${sessionId}/fork`, {});
  }

  deleteSession(sessionId: string): Promise<void> {
    return this.request(`/sessions/${sessionId}`, { method: "DELETE" });
  }

  graphText(sessionId: string, format: "dot" | "mermaid"): Promise<string> {
    return this.fetchImpl(`${this.base}/sessions/${sessionId}/graph?format=${format}`).then(
      async (r) => {
        if (!r.ok) await parseError(r);
        return r.text();
      },
    );
  }

  query(query: string, facts?: string): Promise<QueryResponse> {
    return this.post("/query", facts ? { query, facts } : { query });
  }
}
