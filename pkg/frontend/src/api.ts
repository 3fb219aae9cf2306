/** Thin fetch client for the session API. The UI never selects strategies or
 * scores answers itself — every decision comes back in the SessionView. */

import type {
  AnswerRequest,
  SessionView,
  StartRequest,
  StrategyInfo,
} from "./types.js";

export type FetchLike = (
  input: string,
  init?: { method?: string; headers?: Record<string, string>; body?: string },
) => Promise<{ ok: boolean; status: number; json(): Promise<unknown> }>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const resp = await this.fetchFn(this.baseUrl + path, {
      method,
      headers: { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const payload = (await resp.json()) as Record<string, unknown>;
    if (!resp.ok) {
      throw new ApiError(resp.status, String(payload["detail"] ?? "request failed"));
    }
    return payload as T;
  }

  startSession(req: StartRequest): Promise<SessionView> {
    return this.request("POST", "/sessions", req);
  }

  getSession(sessionId: string): Promise<SessionView> {
    return this.request("GET", `/sessions/${encodeURIComponent(sessionId)}`);
  }

  answer(sessionId: string, req: AnswerRequest): Promise<SessionView> {
    return this.request("POST", `/sessions/${encodeURIComponent(sessionId)}/answer`, req);
  }

  listStrategies(): Promise<StrategyInfo[]> {
    return this.request("GET", "/strategies");
  }
}
