// Scripted operator session against a live service instance:
//   1. an injected incident lands in the Recommend tier and shows up in the
//      console's queue via the event stream, approving it surfaces the
//      execution outcome in the audit view;
//   2. a second pending record is left untouched, the simulated clock jumps
//      past the 4 h approval window, and the record auto-escalates.

import { ChildProcess, spawn } from "node:child_process";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { approvalQueue, ConsoleState, initialState, reduce } from "../src/state.js";
import { secondsRemaining } from "../src/countdown.js";
import type { EngineEvent } from "../src/types.js";

const PORT = 8900 + (process.pid % 100);
const BASE = `http://127.0.0.1:${PORT}`;

let server: ChildProcess;
let client: ApiClient;
let state: ConsoleState;
const abort = new AbortController();

function dispatchEvent(event: EngineEvent) {
  state = reduce(state, { type: "event", event, nowMs: performance.now() });
}

async function waitFor<T>(probe: () => T | undefined, ms = 10_000): Promise<T> {
  const deadline = Date.now() + ms;
  for (;;) {
    const value = probe();
    if (value !== undefined) return value;
    if (Date.now() > deadline) throw new Error("timed out waiting for condition");
    await new Promise((r) => setTimeout(r, 50));
  }
}

beforeAll(async () => {
  server = spawn(
    "python3",
    [
      "-c",
      "from aura.service.api import serve\n" +
        "from aura.service.config import EngineConfig\n" +
        `serve(EngineConfig(bind_port=${PORT}))\n`,
    ],
    { stdio: ["ignore", "inherit", "inherit"] },
  );
  client = new ApiClient(BASE);
  state = initialState();
  // pipeline training happens at startup; poll until the service is live
  const deadline = Date.now() + 150_000;
  for (;;) {
    try {
      await client.health();
      break;
    } catch {
      if (Date.now() > deadline) throw new Error("service never became healthy");
      await new Promise((r) => setTimeout(r, 500));
    }
  }
  client
    .subscribe(
      dispatchEvent,
      (ok) => (state = reduce(state, { type: "connection", ok })),
      abort.signal,
    )
    .catch(() => {}); // abort on teardown is expected
  await waitFor(() => (state.connected ? true : undefined));
});

afterAll(() => {
  abort.abort();
  server?.kill();
});

async function injectPending(): Promise<EngineEvent> {
  const resp = await fetch(`${BASE}/simulate/incident?until=pending`, { method: "POST" });
  const record = (await resp.json()).record;
  expect(record).not.toBeNull();
  expect(record.status).toBe("pending");
  return record;
}

describe("scripted session", () => {
  it("incident -> Recommend -> approve -> execution outcome visible", async () => {
    const record = await injectPending();
    expect(record.tier).toBe("RECOMMEND");

    // the queue updates from the event stream alone — no refetch
    await waitFor(() =>
      approvalQueue(state).some((r) => r.record_id === record.record_id) ? true : undefined,
    );

    // authoritative deadlines come from the pending snapshot
    const pending = await client.pendingApprovals();
    const entry = pending.find((p) => p.record_id === record.record_id)!;
    expect(entry.deadline_s).toBeGreaterThan(entry.server_now_s);
    const now = performance.now();
    const remaining = secondsRemaining(entry, now, now);
    expect(remaining).toBeGreaterThan(0);
    expect(remaining).toBeLessThanOrEqual(4 * 3600);

    const decided = await client.submitDecision(record.record_id, "approve", "op@console");
    expect(decided.status).toBe("closed");
    expect(decided.action_taken).toBe("approved");
    expect(decided.outcome_ok).not.toBeNull();

    // execution outcome is visible in the audit view
    const audit = await client.auditTrail(record.incident_id);
    const final = audit.find((r) => r.record_id === record.record_id)!;
    expect(final.trail.some((line) => /playbook .+ ->/.test(line))).toBe(true);

    // and the resolution event clears it from the console queue
    await waitFor(() =>
      approvalQueue(state).every((r) => r.record_id !== record.record_id)
        ? true
        : undefined,
    );

    // a second approve attempt is a non-destructive 409
    const err = await client
      .submitDecision(record.record_id, "approve", "op@console")
      .catch((e) => e);
    expect(err.status).toBe(409);
  });

  it("untouched record escalates after the simulated 4h timeout", async () => {
    const record = await injectPending();
    await fetch(`${BASE}/clock/advance`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ seconds: 4 * 3600 + 1 }),
    });

    const pending = await client.pendingApprovals();
    expect(pending.every((p) => p.record_id !== record.record_id)).toBe(true);

    const audit = await client.auditTrail(record.incident_id);
    const final = audit.find((r) => r.record_id === record.record_id)!;
    expect(final.tier).toBe("ESCALATE");
    expect(final.action_taken).toBe("escalated");
    expect(final.trail.some((line) => line.includes("timed out"))).toBe(true);

    // the expiry event also clears it from the live console state
    await waitFor(() =>
      approvalQueue(state).every((r) => r.record_id !== record.record_id)
        ? true
        : undefined,
    );
  });
});
