// Single reducer through which every update flows — snapshots from GET
// endpoints and live events from the SSE stream alike. The event handler
// serializes all mutations here so there is exactly one source of truth.

import type { EngineEvent, PendingApprovalView, ResolutionView } from "./types.js";

export interface ConsoleState {
  connected: boolean;
  incidents: ResolutionView[];
  pending: Map<string, PendingApprovalView>;
  /** local monotonic ms at which each pending entry's server timestamps were taken */
  receivedAtMs: Map<string, number>;
  notices: string[];
}

export function initialState(): ConsoleState {
  return {
    connected: false,
    incidents: [],
    pending: new Map(),
    receivedAtMs: new Map(),
    notices: [],
  };
}

export type Action =
  | { type: "connection"; ok: boolean }
  | { type: "snapshot/incidents"; records: ResolutionView[] }
  | { type: "snapshot/pending"; pending: PendingApprovalView[]; nowMs: number }
  | { type: "event"; event: EngineEvent; nowMs: number }
  | { type: "notice"; text: string };

const URGENCY_RANK: Record<string, number> = { high: 0, normal: 1, low: 2 };

export function reduce(state: ConsoleState, action: Action): ConsoleState {
  switch (action.type) {
    case "connection":
      return { ...state, connected: action.ok };

    case "snapshot/incidents":
      return { ...state, incidents: action.records };

    case "snapshot/pending": {
      const pending = new Map<string, PendingApprovalView>();
      const receivedAtMs = new Map<string, number>();
      for (const entry of action.pending) {
        pending.set(entry.record_id, entry);
        receivedAtMs.set(entry.record_id, action.nowMs);
      }
      return { ...state, pending, receivedAtMs };
    }

    case "event": {
      const ev = action.event;
      const incidents = [
        ev,
        ...state.incidents.filter((r) => r.record_id !== ev.record_id),
      ];
      const pending = new Map(state.pending);
      const receivedAtMs = new Map(state.receivedAtMs);
      if (ev.kind === "approval_pending" && ev.status === "pending") {
        // the event carries no deadline; synthesize one from the record's
        // server-side submission time so the countdown still uses server
        // timestamps only (refined on the next /approvals/pending snapshot)
        const view: PendingApprovalView = {
          ...ev,
          deadline_s: ev.submitted_at_s + FOUR_HOURS_S,
          server_now_s: ev.at_s,
        };
        pending.set(ev.record_id, view);
        receivedAtMs.set(ev.record_id, action.nowMs);
      } else if (ev.status === "closed") {
        // decided or expired — possibly by another operator
        pending.delete(ev.record_id);
        receivedAtMs.delete(ev.record_id);
      }
      return { ...state, incidents, pending, receivedAtMs };
    }

    case "notice":
      return { ...state, notices: [...state.notices, action.text] };
  }
}

// display-only constant mirroring the server's approval timeout; used solely
// to place a provisional countdown until the authoritative deadline arrives
const FOUR_HOURS_S = 4 * 3600;

/** Pending records in display order: urgency first, oldest first within. */
export function approvalQueue(state: ConsoleState): PendingApprovalView[] {
  return [...state.pending.values()].sort((a, b) => {
    const u = (URGENCY_RANK[a.urgency] ?? 1) - (URGENCY_RANK[b.urgency] ?? 1);
    return u !== 0 ? u : a.submitted_at_s - b.submitted_at_s;
  });
}
