"""Seven-phase edge-cloud synchronization.

Phases run strictly in order; a phase failure aborts the remaining phases but
everything already acknowledged stays durable. Sessions are deduplicated by
id on both sides so repeated syncs never double-upload.

Phase order: 1 sessions, 2 incident logs, 3 telemetry (delta-compressed),
4 config download, 5 model-weight download, 6 auth-cache reconciliation,
7 time synchronization.
"""

from __future__ import annotations

import base64
import hashlib
import json
from dataclasses import dataclass, field

from aura.syncfed.compress import delta_compress, raw_size

PHASE_KINDS = {
    1: "sessions",
    2: "incident_logs",
    3: "telemetry_delta",
    4: "config",
    5: "model_weights",
    6: "auth_deltas",
    7: "time_sync",
}


class SyncError(Exception):
    pass


class PhaseFailure(SyncError):
    def __init__(self, phase: int, cause: str):
        super().__init__(f"phase {phase} failed: {cause}")
        self.phase = phase
        self.cause = cause


class ConflictError(SyncError):
    pass


def _checksum(payload: bytes) -> str:
    return hashlib.sha256(payload).hexdigest()


@dataclass
class SyncBatch:
    phase: int
    kind: str
    payload: bytes

    def __post_init__(self):
        if PHASE_KINDS[self.phase] != self.kind:
            raise SyncError(f"phase {self.phase} cannot carry {self.kind!r}")

    def to_wire(self) -> dict:
        return {
            "phase": self.phase,
            "kind": self.kind,
            "payload_b64": base64.b64encode(self.payload).decode("ascii"),
            "checksum": _checksum(self.payload),
        }


@dataclass
class EdgeState:
    """Everything the edge needs to reconcile with the cloud."""

    sessions: list[dict] = field(default_factory=list)
    incident_logs: list[dict] = field(default_factory=list)
    telemetry: list[tuple[int, float]] = field(default_factory=list)
    config: dict = field(default_factory=dict)
    model_version: int = 0
    auth_cache: dict = field(default_factory=dict)  # token -> {"allowed", "updated_at"}
    clock_offset_ms: int = 0
    uploaded_session_ids: set = field(default_factory=set)
    uploaded_incident_ids: set = field(default_factory=set)
    telemetry_synced_until: int = -1


@dataclass
class SyncReport:
    completed_phases: list[int] = field(default_factory=list)
    sessions_uploaded: int = 0
    incidents_uploaded: int = 0
    telemetry_samples: int = 0
    compression_ratio: float = 1.0
    config_updates: int = 0
    model_updated: bool = False
    auth_conflicts: list[str] = field(default_factory=list)
    clock_offset_ms: int = 0
    failure: str | None = None


class InProcessCloud:
    """Mock cloud endpoint speaking the JSON batch wire format in process."""

    def __init__(self, now_ms: int = 0):
        self.sessions: dict[str, dict] = {}
        self.incidents: dict[str, dict] = {}
        self.telemetry_batches: list[bytes] = []
        self.config_updates: dict = {}
        self.model_weights: dict | None = None
        self.model_version: int = 0
        self.auth_deltas: dict = {}  # token -> {"allowed", "updated_at"}
        self.now_ms: int = now_ms
        self.reject_phases: set[int] = set()
        self.batches_seen: list[dict] = []

    def handle(self, batch_wire: dict) -> dict:
        phase = batch_wire["phase"]
        self.batches_seen.append(batch_wire)
        payload = base64.b64decode(batch_wire["payload_b64"])
        if _checksum(payload) != batch_wire["checksum"]:
            return {"ok": False, "error": "checksum mismatch"}
        if phase in self.reject_phases:
            return {"ok": False, "error": "rejected by cloud"}
        kind = batch_wire["kind"]
        if kind == "sessions":
            accepted = 0
            for rec in json.loads(payload):
                if rec["id"] not in self.sessions:
                    self.sessions[rec["id"]] = rec
                    accepted += 1
            return {"ok": True, "accepted": accepted}
        if kind == "incident_logs":
            for rec in json.loads(payload):
                self.incidents[rec["id"]] = rec
            return {"ok": True}
        if kind == "telemetry_delta":
            self.telemetry_batches.append(payload)
            return {"ok": True}
        if kind == "config":
            return {"ok": True, "config": self.config_updates}
        if kind == "model_weights":
            return {
                "ok": True,
                "version": self.model_version,
                "weights": self.model_weights,
            }
        if kind == "auth_deltas":
            return {"ok": True, "deltas": self.auth_deltas}
        if kind == "time_sync":
            return {"ok": True, "now_ms": self.now_ms}
        return {"ok": False, "error": f"unknown kind {kind}"}


def synchronize(edge: EdgeState, cloud: InProcessCloud, edge_now_ms: int = 0) -> SyncReport:
    """Run phases 1..7 in order. Raises PhaseFailure on the first failed
    phase; completed phases remain durable in the edge state."""
    report = SyncReport()

    def send(phase: int, payload: bytes) -> dict:
        batch = SyncBatch(phase=phase, kind=PHASE_KINDS[phase], payload=payload)
        resp = cloud.handle(batch.to_wire())
        if not resp.get("ok"):
            report.failure = resp.get("error", "unknown")
            raise PhaseFailure(phase, report.failure)
        report.completed_phases.append(phase)
        return resp

    # Phase 1: completed sessions (billing critical)
    pending = [s for s in edge.sessions if s["id"] not in edge.uploaded_session_ids]
    send(1, json.dumps(pending, sort_keys=True).encode())
    edge.uploaded_session_ids.update(s["id"] for s in pending)
    report.sessions_uploaded = len(pending)

    # Phase 2: incident logs with resolutions
    new_logs = [r for r in edge.incident_logs if r["id"] not in edge.uploaded_incident_ids]
    send(2, json.dumps(new_logs, sort_keys=True).encode())
    edge.uploaded_incident_ids.update(r["id"] for r in new_logs)
    report.incidents_uploaded = len(new_logs)

    # Phase 3: telemetry, delta-compressed
    fresh = [s for s in edge.telemetry if s[0] > edge.telemetry_synced_until]
    compressed = delta_compress(fresh)
    send(3, compressed)
    if fresh:
        edge.telemetry_synced_until = fresh[-1][0]
        report.telemetry_samples = len(fresh)
        report.compression_ratio = raw_size(fresh) / max(len(compressed), 1)

    # Phase 4: configuration download
    resp = send(4, b"")
    updates = resp.get("config", {})
    edge.config.update(updates)
    report.config_updates = len(updates)

    # Phase 5: model weight download
    resp = send(5, b"")
    if resp.get("weights") is not None and resp.get("version", 0) > edge.model_version:
        edge.model_version = resp["version"]
        report.model_updated = True

    # Phase 6: auth-cache reconciliation, last-writer-wins by cloud timestamp
    resp = send(6, b"")
    for token, entry in resp.get("deltas", {}).items():
        local = edge.auth_cache.get(token)
        if local is not None and local != entry:
            report.auth_conflicts.append(token)
            if local.get("updated_at", 0) > entry.get("updated_at", 0):
                continue
        edge.auth_cache[token] = entry

    # Phase 7: time synchronization; offset applies to wall-clock reads only
    resp = send(7, b"")
    edge.clock_offset_ms = int(resp["now_ms"]) - edge_now_ms
    report.clock_offset_ms = edge.clock_offset_ms
    return report
