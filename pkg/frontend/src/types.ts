// API view types. Every field here is server-supplied; the console never
// computes tiers or thresholds of its own.

export type Tier =
  | "AUTO_SILENT"
  | "AUTO_NOTIFY"
  | "RECOMMEND"
  | "ESCALATE"
  | "EXPERT_REQUIRED";

export interface ResolutionView {
  record_id: string;
  incident_id: string;
  station_id: string;
  category: string | null;
  playbook_id: string | null;
  confidence: number;
  tier: Tier;
  action_taken: string | null;
  outcome_ok: boolean | null;
  status: "pending" | "closed";
  submitted_at_s: number;
  resolved_by: string | null;
  urgency: "high" | "normal" | "low";
  trail: string[];
}

export interface PendingApprovalView extends ResolutionView {
  // server timestamps — countdowns must derive from these, never Date.now()
  // interpreted as server time
  deadline_s: number;
  server_now_s: number;
}

export interface EngineEvent extends ResolutionView {
  kind: "resolution" | "approval_pending";
  at_s: number;
}
