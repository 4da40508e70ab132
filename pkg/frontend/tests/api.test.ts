import { describe, expect, it } from "vitest";

import { ApiClient, ApiError, drainSseBuffer } from "../src/api.js";

describe("SSE buffer parsing", () => {
  it("parses complete messages and keeps the remainder", () => {
    const chunk =
      'data: {"kind":"resolution","record_id":"R1"}\n\n' +
      'data: {"kind":"approval_pe';
    const [events, rest] = drainSseBuffer(chunk);
    expect(events).toHaveLength(1);
    expect(events[0].record_id).toBe("R1");
    expect(rest).toContain("approval_pe");
  });

  it("handles messages split across arbitrary chunk boundaries", () => {
    const full = 'data: {"kind":"resolution","record_id":"R2"}\n\n';
    for (let cut = 1; cut < full.length; cut++) {
      let buffer = full.slice(0, cut);
      let [events] = drainSseBuffer(buffer);
      expect(events).toHaveLength(cut >= full.length ? 1 : 0);
      buffer += full.slice(cut);
      [events, buffer] = drainSseBuffer(buffer);
      expect(events).toHaveLength(1);
      expect(buffer).toBe("");
    }
  });

  it("ignores comment/blank lines", () => {
    const [events] = drainSseBuffer(": keepalive\n\ndata: {\"record_id\":\"R3\"}\n\n");
    expect(events).toHaveLength(1);
  });
});

describe("decision submission", () => {
  function countingFetch(response: any, status = 200) {
    const calls: string[] = [];
    const impl = async (url: string, init?: RequestInit) => {
      calls.push(url);
      // keep the request in flight for a tick so coalescing is observable
      await new Promise((r) => setTimeout(r, 5));
      return new Response(JSON.stringify(response), { status });
    };
    return { calls, impl };
  }

  it("double-click coalesces to a single POST", async () => {
    const { calls, impl } = countingFetch({ record_id: "R1", status: "closed" });
    const client = new ApiClient("http://x", impl);
    const [a, b] = await Promise.all([
      client.submitDecision("R1", "approve", "op"),
      client.submitDecision("R1", "approve", "op"),
    ]);
    expect(calls).toHaveLength(1);
    expect(a).toEqual(b);
  });

  it("distinct records post independently", async () => {
    const { calls, impl } = countingFetch({ status: "closed" });
    const client = new ApiClient("http://x", impl);
    await Promise.all([
      client.submitDecision("R1", "approve", "op"),
      client.submitDecision("R2", "reject", "op"),
    ]);
    expect(calls).toHaveLength(2);
  });

  it("surfaces the server's rejection detail verbatim", async () => {
    const impl = async () =>
      new Response(JSON.stringify({ detail: "record is not pending" }), { status: 409 });
    const client = new ApiClient("http://x", impl);
    const err = await client.submitDecision("R1", "approve", "op").catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.status).toBe(409);
    expect(err.detail).toBe("record is not pending");
  });

  it("a settled decision can be retried", async () => {
    const { calls, impl } = countingFetch({ status: "closed" });
    const client = new ApiClient("http://x", impl);
    await client.submitDecision("R1", "approve", "op");
    await client.submitDecision("R1", "approve", "op");
    expect(calls).toHaveLength(2);
  });
});
