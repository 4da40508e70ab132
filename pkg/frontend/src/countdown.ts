// Countdown to the approval deadline, computed exclusively from server
// timestamps. The only local input is elapsed monotonic time since the
// server timestamps were received, so client clock skew cannot shift the
// deadline.

export interface ServerTimed {
  deadline_s: number;
  server_now_s: number;
}

export function secondsRemaining(
  entry: ServerTimed,
  receivedAtMs: number,
  nowMs: number,
): number {
  const elapsed = Math.max(nowMs - receivedAtMs, 0) / 1000;
  return Math.max(entry.deadline_s - (entry.server_now_s + elapsed), 0);
}

export function formatRemaining(seconds: number): string {
  const s = Math.floor(seconds);
  const h = Math.floor(s / 3600);
  const m = Math.floor((s % 3600) / 60);
  const sec = s % 60;
  if (h > 0) return `${h}h ${m.toString().padStart(2, "0")}m`;
  if (m > 0) return `${m}m ${sec.toString().padStart(2, "0")}s`;
  return `${sec}s`;
}
