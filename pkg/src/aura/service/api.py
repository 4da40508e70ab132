"""HTTP + server-sent-events facade over the engine.

Endpoints:
  GET  /health               liveness
  GET  /incidents            all resolution records, newest first
  GET  /approvals/pending    queue, urgency then age ordered
  POST /approvals/{id}       {"decision": "approve"|"reject", "operator": str}
  GET  /audit/{incident_id}  full record(s) for an incident, 404 if unknown
  GET  /metrics              monotone counters
  GET  /events               SSE stream of resolution/approval events
  POST /simulate/incident    inject a scripted incident (simulated clock mode)
  POST /clock/advance        {"seconds": float} advance the simulated clock

Every state-changing endpoint appends its audit record to the WAL before the
response is acknowledged.
"""

from __future__ import annotations

import asyncio
import itertools
import json
import tempfile
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import StreamingResponse

from aura.fleetsim.corpus import (
    fault_script_for_incident,
    generate_corpus,
    telemetry_stream_for_incident,
)
from aura.fleetsim.station import SimStation
from aura.orchestrator import NotPending, UnknownRecord
from aura.service.config import EngineConfig
from aura.service.evaluate import build_pipeline
from aura.syncfed.wal import WalStore


class ServiceState:
    def __init__(self, config: EngineConfig, wal_path=None):
        self.config = config
        self.pipeline = build_pipeline(config)
        self.engine = self.pipeline.engine
        self.clock = self.pipeline.clock
        if wal_path is None:
            wal_path = Path(tempfile.mkdtemp(prefix="aura-")) / "audit.wal"
        self.wal = WalStore(wal_path)
        self.metrics = {
            "incidents_total": 0,
            "autonomous_total": 0,
            "escalations_total": 0,
            "approvals_total": 0,
            "rejections_total": 0,
            "events_total": 0,
        }
        self._audit_seq = itertools.count(1)
        self.subscribers: list[asyncio.Queue] = []
        # demo material for the injection endpoint
        self._scripted = generate_corpus(200, seed=config.seed + 7)
        self._scripted_idx = 0
        self.engine.listeners.append(self._on_event)

    def _on_event(self, event: dict) -> None:
        self.metrics["events_total"] += 1
        for q in list(self.subscribers):
            q.put_nowait(event)

    def audit_write(self, kind: str, payload: dict) -> None:
        self.wal.persist({"id": f"A{next(self._audit_seq):08d}", "kind": kind, **payload})

    def inject_next_incident(self):
        if self._scripted_idx >= len(self._scripted):
            self._scripted_idx = 0
        incident = self._scripted[self._scripted_idx]
        self._scripted_idx += 1
        station = SimStation(incident.station, clock=self.clock)
        station.inject_fault(fault_script_for_incident(incident))
        stream = telemetry_stream_for_incident(incident, seed=self.config.seed)
        record = self.engine.tick(station, stream, incident=incident)
        self.metrics["incidents_total"] += 1
        if record is not None:
            if record.action_taken in ("autonomous", "notified"):
                self.metrics["autonomous_total"] += 1
            elif record.action_taken == "escalated":
                self.metrics["escalations_total"] += 1
            self.audit_write("resolution", record.to_json())
        return record


def create_app(config: EngineConfig | None = None, wal_path=None) -> FastAPI:
    state = ServiceState(config or EngineConfig(), wal_path=wal_path)
    app = FastAPI(title="aura", docs_url=None, redoc_url=None)
    app.state.engine_state = state

    @app.get("/health")
    def health():
        return {"status": "ok", "clock_s": state.clock.now_s()}

    @app.get("/incidents")
    def incidents():
        records = sorted(
            state.engine.records.values(), key=lambda r: r.record_id, reverse=True
        )
        return {"records": [r.to_json() for r in records]}

    @app.get("/approvals/pending")
    def approvals_pending():
        state.engine.expire_approvals()
        now = state.clock.now_s()
        out = []
        for rec in state.engine.queue.pending():
            doc = rec.to_json()
            doc["deadline_s"] = rec.submitted_at_s + state.engine.queue.timeout_s
            doc["seconds_remaining"] = max(doc["deadline_s"] - now, 0.0)
            doc["server_now_s"] = now
            out.append(doc)
        return {"pending": out}

    @app.post("/approvals/{record_id}")
    async def decide_approval(record_id: str, request: Request):
        body = await request.json()
        decision = body.get("decision")
        operator = body.get("operator", "unknown")
        if decision not in ("approve", "reject"):
            raise HTTPException(status_code=422, detail="decision must be approve or reject")
        # write-ahead: the intent is durable before the state transition is acked
        state.audit_write(
            "approval_decision",
            {"record_id": record_id, "decision": decision, "operator": operator},
        )
        try:
            record = state.engine.resolve_approval(record_id, decision, operator)
        except UnknownRecord:
            raise HTTPException(status_code=404, detail="unknown record")
        except NotPending:
            raise HTTPException(status_code=409, detail="record is not pending")
        if decision == "approve":
            state.metrics["approvals_total"] += 1
        else:
            state.metrics["rejections_total"] += 1
        state.audit_write("resolution", record.to_json())
        return record.to_json()

    @app.get("/audit/{incident_id}")
    def audit(incident_id: str):
        matches = [r.to_json() for r in state.engine.audit if r.incident_id == incident_id]
        if not matches:
            raise HTTPException(status_code=404, detail="unknown incident")
        return {"records": matches}

    @app.get("/metrics")
    def metrics():
        return dict(state.metrics)

    @app.get("/events")
    async def events():
        queue: asyncio.Queue = asyncio.Queue()
        state.subscribers.append(queue)

        async def stream():
            try:
                while True:
                    event = await queue.get()
                    yield f"data: {json.dumps(event, sort_keys=True)}\n\n"
            finally:
                state.subscribers.remove(queue)

        return StreamingResponse(stream(), media_type="text/event-stream")

    @app.post("/simulate/incident")
    def simulate_incident(until: str | None = None):
        """Inject the next scripted incident; with ``until=pending`` keep
        injecting (bounded) until one lands in the approval queue."""
        attempts = 200 if until == "pending" else 1
        record = None
        for _ in range(attempts):
            record = state.inject_next_incident()
            if until != "pending" or (record is not None and record.status == "pending"):
                break
        if record is None:
            return {"record": None}
        return {"record": record.to_json()}

    @app.post("/clock/advance")
    async def clock_advance(request: Request):
        body = await request.json()
        seconds = float(body.get("seconds", 0))
        if seconds < 0:
            raise HTTPException(status_code=422, detail="seconds must be >= 0")
        state.clock.advance_s(seconds)
        expired = state.engine.expire_approvals()
        for rec in expired:
            state.metrics["escalations_total"] += 1
            state.audit_write("resolution", rec.to_json())
        return {"clock_s": state.clock.now_s(), "expired": [r.record_id for r in expired]}

    return app


def serve(config: EngineConfig | None = None) -> None:
    import uvicorn

    config = config or EngineConfig()
    app = create_app(config)
    uvicorn.run(app, host=config.bind_host, port=config.bind_port, log_level="warning")
