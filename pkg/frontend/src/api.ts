import type { ExportPayload, Manifest, ResponseResult, Task } from "./types.js";

export class ApiRequestError extends Error {
  constructor(
    public status: number,
    message: string,
  ) {
    super(message);
  }
}

/** Thin typed client over the session HTTP API. */
export class ApiClient {
  constructor(
    private base: string,
    private fetchFn: typeof fetch = fetch,
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchFn(`${this.base}${path}`, {
      headers: { "content-type": "application/json" },
      ...init,
    });
    const body = await resp.json().catch(() => ({}));
    if (!resp.ok) {
      throw new ApiRequestError(resp.status, body.error ?? resp.statusText);
    }
    return body as T;
  }

  createSession(itemIds: string[], nSub: number, seed?: number): Promise<Manifest> {
    return this.request<Manifest>("/sessions", {
      method: "POST",
      body: JSON.stringify({ item_ids: itemIds, n_sub: nSub, seed }),
    });
  }

  manifest(sessionId: string): Promise<Manifest> {
    return this.request<Manifest>(`/sessions/${sessionId}`);
  }

  task(sessionId: string): Promise<Task> {
    return this.request<Task>(`/sessions/${sessionId}/task`);
  }

  submitOrder(sessionId: string, token: string, order: string[]): Promise<ResponseResult> {
    return this.request<ResponseResult>(`/sessions/${sessionId}/response`, {
      method: "POST",
      body: JSON.stringify({ task_token: token, order }),
    });
  }

  submitChoice(sessionId: string, token: string, choice: string): Promise<ResponseResult> {
    return this.request<ResponseResult>(`/sessions/${sessionId}/response`, {
      method: "POST",
      body: JSON.stringify({ task_token: token, choice }),
    });
  }

  undo(sessionId: string, token: string): Promise<ResponseResult> {
    return this.request<ResponseResult>(`/sessions/${sessionId}/response`, {
      method: "POST",
      body: JSON.stringify({ task_token: token, undo: true }),
    });
  }

  exportRanking(sessionId: string): Promise<ExportPayload> {
    return this.request<ExportPayload>(`/sessions/${sessionId}/export`);
  }

  imageUrl(itemId: string): string {
    return `${this.base}/items/${itemId}/image`;
  }
}
