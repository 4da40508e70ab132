// Browser entry point: wire the API client to the reducer and re-render on
// every state change plus a 1 s countdown tick.

import { ApiClient } from "./api.js";
import { Action, ConsoleState, initialState, reduce } from "./state.js";
import { auditLines, connectionBanner, emptyQueueMessage, queueRows } from "./view.js";

export function startConsole(root: HTMLElement, baseUrl: string): () => void {
  const client = new ApiClient(baseUrl);
  let state: ConsoleState = initialState();
  const abort = new AbortController();

  const dispatch = (action: Action) => {
    state = reduce(state, action);
    render();
  };

  const render = () => {
    const now = performance.now();
    const banner = connectionBanner(state);
    const rows = queueRows(state, now);
    const parts: string[] = [];
    if (banner) parts.push(`<div class="banner degraded">${banner}</div>`);
    parts.push("<h2>Approval queue</h2>");
    const empty = emptyQueueMessage(state);
    if (empty) {
      parts.push(`<p class="empty">${empty}</p>`);
    } else {
      for (const row of rows) {
        parts.push(
          `<div class="card" data-record="${row.recordId}">` +
            `<b>${row.station}</b> ${row.summary} · conf ${row.confidence} · ` +
            `${row.playbook} · expires in ${row.remaining}` +
            `<button data-approve="${row.recordId}">Approve</button>` +
            `<button data-reject="${row.recordId}">Reject</button>` +
            `</div>`,
        );
      }
    }
    parts.push("<h2>Recent incidents</h2>");
    for (const rec of state.incidents.slice(0, 20)) {
      parts.push(`<pre class="audit">${auditLines(rec).join("\n")}</pre>`);
    }
    for (const notice of state.notices.slice(-3)) {
      parts.push(`<div class="notice">${notice}</div>`);
    }
    root.innerHTML = parts.join("\n");
  };

  root.addEventListener("click", (ev) => {
    const target = ev.target as HTMLElement;
    const approve = target.getAttribute("data-approve");
    const reject = target.getAttribute("data-reject");
    const recordId = approve ?? reject;
    if (!recordId) return;
    client
      .submitDecision(recordId, approve ? "approve" : "reject", operatorId())
      .then((record) => dispatch({ type: "event", event: { ...record, kind: "resolution", at_s: 0 }, nowMs: performance.now() }))
      .catch((err) => dispatch({ type: "notice", text: String(err) }));
  });

  const refresh = async () => {
    const [records, pending] = await Promise.all([
      client.incidents(),
      client.pendingApprovals(),
    ]);
    dispatch({ type: "snapshot/incidents", records });
    dispatch({ type: "snapshot/pending", pending, nowMs: performance.now() });
  };

  refresh().catch(() => dispatch({ type: "connection", ok: false }));
  client
    .subscribe(
      (event) => dispatch({ type: "event", event, nowMs: performance.now() }),
      (ok) => dispatch({ type: "connection", ok }),
      abort.signal,
    )
    .catch(() => dispatch({ type: "connection", ok: false }));
  const timer = setInterval(render, 1000);

  return () => {
    abort.abort();
    clearInterval(timer);
  };
}

function operatorId(): string {
  const existing = sessionStorage.getItem("operator-id");
  if (existing) return existing;
  const id = `op-${Math.random().toString(36).slice(2, 8)}`;
  sessionStorage.setItem("operator-id", id);
  return id;
}
