// View-model helpers: plain functions from state to display strings so the
// rendering layer stays trivial and testable. No decision logic lives here —
// tiers and confidences are rendered exactly as the server sent them.

import { formatRemaining, secondsRemaining } from "./countdown.js";
import { approvalQueue, ConsoleState } from "./state.js";

export function formatConfidence(confidence: number): string {
  return confidence.toFixed(3);
}

export function connectionBanner(state: ConsoleState): string | null {
  return state.connected
    ? null
    : "Connection lost — showing last known state";
}

export interface QueueRow {
  recordId: string;
  station: string;
  summary: string;
  confidence: string;
  playbook: string;
  remaining: string;
  evidence: string[];
}

export function queueRows(state: ConsoleState, nowMs: number): QueueRow[] {
  return approvalQueue(state).map((entry) => ({
    recordId: entry.record_id,
    station: entry.station_id,
    summary: `${entry.category ?? "unknown"} (${entry.urgency})`,
    confidence: formatConfidence(entry.confidence),
    playbook: entry.playbook_id ?? "—",
    remaining: formatRemaining(
      secondsRemaining(entry, state.receivedAtMs.get(entry.record_id) ?? nowMs, nowMs),
    ),
    evidence: entry.trail,
  }));
}

export function emptyQueueMessage(state: ConsoleState): string | null {
  return state.pending.size === 0 ? "No approvals waiting" : null;
}

export function auditLines(record: {
  record_id: string;
  tier: string;
  confidence: number;
  action_taken: string | null;
  outcome_ok: boolean | null;
  trail: string[];
}): string[] {
  const outcome =
    record.outcome_ok === null ? "" : record.outcome_ok ? " — succeeded" : " — failed";
  return [
    `${record.record_id}: ${record.tier} @ ${formatConfidence(record.confidence)}`,
    `action: ${record.action_taken ?? "none"}${outcome}`,
    ...record.trail.map((line) => `  ${line}`),
  ];
}
