/** Thin HTTP client for the diagnostic service.
 *
 * The console performs no diagnostic computation: everything it shows comes
 * back through these calls. `fetchFn` is injectable so tests can intercept
 * every network interaction.
 */

import type { Recommendation, SessionSummary, SessionView } from "./types.js";

export interface ApiConfig {
  baseUrl: string;
  bearerToken?: string;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private config: ApiConfig,
    private fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private url(path: string): string {
    return this.config.baseUrl.replace(/\/$/, "") + path;
  }

  private headers(json: boolean): Record<string, string> {
    const headers: Record<string, string> = {};
    if (json) headers["Content-Type"] = "application/json";
    if (this.config.bearerToken) headers["Authorization"] = `Bearer ${this.config.bearerToken}`;
    return headers;
  }

  private async request<T>(method: string, path: string, body?: unknown, form?: FormData): Promise<T> {
    const init: RequestInit = { method, headers: this.headers(form === undefined) };
    if (form !== undefined) {
      init.body = form;
      // the browser sets the multipart boundary itself
      delete (init.headers as Record<string, string>)["Content-Type"];
    } else if (body !== undefined) {
      init.body = JSON.stringify(body);
    }
    const response = await this.fetchFn(this.url(path), init);
    if (!response.ok) {
      let code = "http_error";
      let message = `${response.status}`;
      try {
        const parsed = (await response.json()) as { error?: { code?: string; message?: string } };
        if (parsed.error) {
          code = parsed.error.code ?? code;
          message = parsed.error.message ?? message;
        }
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(response.status, code, message);
    }
    return (await response.json()) as T;
  }

  healthz(): Promise<{ ready: boolean }> {
    return this.request("GET", "/healthz");
  }

  createSession(): Promise<{ session_id: string }> {
    return this.request("POST", "/sessions");
  }

  listSessions(): Promise<{ sessions: SessionSummary[] }> {
    return this.request("GET", "/sessions");
  }

  getSession(sessionId: string): Promise<SessionView> {
    return this.request("GET", `/sessions/${sessionId}`);
  }

  postUtterance(sessionId: string, input: { text?: string; audio_ref?: string }): Promise<SessionView> {
    return this.request("POST", `/sessions/${sessionId}/utterances`, input);
  }

  uploadEhr(sessionId: string, file: Blob, filename: string): Promise<SessionView> {
    const form = new FormData();
    form.append("file", file, filename);
    return this.request("POST", `/sessions/${sessionId}/ehr`, undefined, form);
  }

  query(text: string): Promise<Recommendation> {
    return this.request("POST", "/query", { text });
  }
}
