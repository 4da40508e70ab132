// Thin client over the service HTTP/SSE API. All reads go through GET
// endpoints; approvals are plain POSTs; the event stream is standard SSE
// parsed incrementally so it works over fetch in any runtime.

import type { EngineEvent, PendingApprovalView, ResolutionView } from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    public status: number,
    public detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

export class ApiClient {
  private inflight = new Map<string, Promise<ResolutionView>>();

  constructor(
    private baseUrl: string,
    private fetchImpl: FetchLike = fetch,
  ) {}

  private async getJson(path: string): Promise<any> {
    const resp = await this.fetchImpl(this.baseUrl + path);
    if (!resp.ok) throw new ApiError(resp.status, await detailOf(resp));
    return resp.json();
  }

  async health(): Promise<{ status: string; clock_s: number }> {
    return this.getJson("/health");
  }

  async incidents(): Promise<ResolutionView[]> {
    return (await this.getJson("/incidents")).records;
  }

  async pendingApprovals(): Promise<PendingApprovalView[]> {
    return (await this.getJson("/approvals/pending")).pending;
  }

  async auditTrail(incidentId: string): Promise<ResolutionView[]> {
    return (await this.getJson(`/audit/${incidentId}`)).records;
  }

  /**
   * Approve or reject a pending record. Rapid repeat calls for the same
   * record (double-click) coalesce onto the single in-flight POST.
   */
  submitDecision(
    recordId: string,
    decision: "approve" | "reject",
    operator: string,
  ): Promise<ResolutionView> {
    const existing = this.inflight.get(recordId);
    if (existing) return existing;
    const request = (async () => {
      try {
        const resp = await this.fetchImpl(`${this.baseUrl}/approvals/${recordId}`, {
          method: "POST",
          headers: { "content-type": "application/json" },
          body: JSON.stringify({ decision, operator }),
        });
        if (!resp.ok) throw new ApiError(resp.status, await detailOf(resp));
        return (await resp.json()) as ResolutionView;
      } finally {
        this.inflight.delete(recordId);
      }
    })();
    this.inflight.set(recordId, request);
    return request;
  }

  /**
   * Subscribe to the event stream. Calls onEvent for each parsed event and
   * onState on connect/disconnect; resolves when the stream ends or the
   * signal aborts.
   */
  async subscribe(
    onEvent: (event: EngineEvent) => void,
    onState: (connected: boolean) => void,
    signal?: AbortSignal,
  ): Promise<void> {
    try {
      const resp = await this.fetchImpl(`${this.baseUrl}/events`, { signal });
      if (!resp.ok || !resp.body) throw new ApiError(resp.status, "no event stream");
      onState(true);
      const reader = resp.body.getReader();
      const decoder = new TextDecoder();
      let buffer = "";
      for (;;) {
        const { done, value } = await reader.read();
        if (done) break;
        buffer += decoder.decode(value, { stream: true });
        const [events, rest] = drainSseBuffer(buffer);
        buffer = rest;
        for (const ev of events) onEvent(ev);
      }
    } finally {
      onState(false);
    }
  }
}

async function detailOf(resp: Response): Promise<string> {
  try {
    const body = await resp.json();
    return body.detail ?? resp.statusText;
  } catch {
    return resp.statusText;
  }
}

/**
 * Pull complete SSE messages out of an accumulating text buffer. Returns the
 * parsed events and the unconsumed remainder.
 */
export function drainSseBuffer(buffer: string): [EngineEvent[], string] {
  const events: EngineEvent[] = [];
  let rest = buffer;
  for (;;) {
    const split = rest.indexOf("\n\n");
    if (split < 0) break;
    const message = rest.slice(0, split);
    rest = rest.slice(split + 2);
    const data = message
      .split("\n")
      .filter((line) => line.startsWith("data:"))
      .map((line) => line.slice(5).trimStart())
      .join("\n");
    if (data) events.push(JSON.parse(data));
  }
  return [events, rest];
}
