"""The sense-diagnose-act loop and multi-agent intent routing.

``AutoOpsEngine.tick`` runs one pass over a station: anomaly detection,
retrieval, diagnosis, indicator extraction, calibrated confidence, tier
decision, then either safety-gated autonomous execution or queued escalation.
Every pass yields a ``ResolutionRecord`` carrying the full reasoning trail,
so any decision is reconstructible from its logged inputs.

Routing (``route``) classifies the intent of a free-text query with a
deterministic keyword table and dispatches to the highest-confidence capable
agent, falling back to a collaborative response when no agent is confident.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from aura import ccar
from aura.anomaly import AnomalyDetector, AnomalyReport, Severity
from aura.ara.index import retrieve as ara_retrieve
from aura.ccar import AUTONOMOUS_TIERS, ConfidenceModel, DecisionTier, IndicatorVector
from aura.diagnosis import (
    ActionHistory,
    ActionRecord,
    Diagnosis,
    ReferenceDiagnoser,
    extract_indicators,
    render_incident,
)
from aura.domain import ErrorCode, FaultCategory, Incident, TelemetrySnapshot, default_taxonomy
from aura.fleetsim.clock import SimClock
from aura.fleetsim.station import SimStation
from aura.playbook.executor import ExecutionOutcome, OutcomeStatus, PlaybookExecutor
from aura.playbook.library import PlaybookLibrary, default_library
from aura.playbook.safety import SafetyVerifier

THETA_AUTONOMOUS = 0.90
TAU_DETECT = 0.75
APPROVAL_TIMEOUT_S = 4 * 3600.0
COLLABORATION_CUTOFF = 0.65


class OrchestratorError(Exception):
    pass


class NoEligibleAgent(OrchestratorError):
    pass


class UnknownRecord(OrchestratorError):
    pass


class NotPending(OrchestratorError):
    pass


# --- intent routing ----------------------------------------------------------

INTENTS = ("diagnose", "repair_guidance", "fleet_query", "driver_query", "integration")

# Deterministic keyword rule table standing in for a learned intent
# classifier; first matching intent wins, default is "diagnose".
_INTENT_KEYWORDS = (
    ("integration", ("api", "integrate", "webhook", "code", "sdk")),
    ("driver_query", ("driver", "customer", "charging session", "my car", "rfid")),
    ("fleet_query", ("fleet", "uptime", "utilization", "report", "how many")),
    ("repair_guidance", ("repair", "replace", "manual", "technician", "how do i fix")),
    ("diagnose", ("error", "fault", "diagnose", "offline", "disconnect", "anomaly")),
)


def classify_intent(query: str) -> str:
    lowered = query.lower()
    for intent, keywords in _INTENT_KEYWORDS:
        if any(kw in lowered for kw in keywords):
            return intent
    return "diagnose"


@dataclass(frozen=True)
class AgentDescriptor:
    name: str
    capabilities: frozenset
    confidence_estimator: object = None  # callable(query, context) -> float

    def estimate(self, query: str, context: dict) -> float:
        if self.confidence_estimator is not None:
            return float(self.confidence_estimator(query, context))
        # capability-match score x upstream diagnoser confidence (stand-in)
        return 0.8 * float(context.get("diagnoser_confidence", 1.0))


def default_agents() -> list[AgentDescriptor]:
    return [
        AgentDescriptor("AutoOps", frozenset({"diagnose"})),
        AgentDescriptor("TechSupport", frozenset({"repair_guidance", "diagnose"})),
        AgentDescriptor("OpsMgmt", frozenset({"fleet_query"})),
        AgentDescriptor("DriverAssist", frozenset({"driver_query"})),
        AgentDescriptor("CodeGen", frozenset({"integration"})),
    ]


@dataclass(frozen=True)
class RoutingDecision:
    intent: str
    scores: dict
    selected: tuple[str, ...]
    collaborative: bool

    @property
    def agent(self) -> str:
        return self.selected[0]


def route(query: str, context: dict, agents: list[AgentDescriptor]) -> RoutingDecision:
    if not agents:
        raise OrchestratorError("no agents registered")
    intent = classify_intent(query)
    eligible = sorted(
        (a for a in agents if intent in a.capabilities), key=lambda a: a.name
    )
    if not eligible:
        raise NoEligibleAgent(intent)
    scores = {a.name: a.estimate(query, context) for a in eligible}
    best = max(eligible, key=lambda a: (scores[a.name], [-ord(c) for c in a.name]))
    if scores[best.name] < COLLABORATION_CUTOFF and len(eligible) > 1:
        return RoutingDecision(intent, scores, tuple(a.name for a in eligible), True)
    return RoutingDecision(intent, scores, (best.name,), False)


def collaborative_response(decision: RoutingDecision, responses: dict) -> str:
    """Concatenate per-agent outputs with attribution; no negotiation."""
    return "\n".join(f"[{name}] {responses.get(name, '')}" for name in decision.selected)


def assess_urgency(severity: Severity) -> str:
    if severity in (Severity.CRITICAL, Severity.HIGH):
        return "high"
    if severity is Severity.MEDIUM:
        return "normal"
    return "low"


# --- resolution records and the approval queue -------------------------------

@dataclass
class ResolutionRecord:
    record_id: str
    incident_id: str
    station_id: str
    diagnosis: Diagnosis | None
    indicators: IndicatorVector | None
    confidence: float
    tier: DecisionTier
    trail: list[str] = field(default_factory=list)
    action_taken: str | None = None  # autonomous | notified | approved | rejected | escalated
    outcome_ok: bool | None = None
    execution: ExecutionOutcome | None = None
    status: str = "closed"  # pending | closed
    submitted_at_s: float = 0.0
    resolved_by: str | None = None
    urgency: str = "normal"

    def __post_init__(self):
        if not self.trail:
            raise OrchestratorError("reasoning trail must be non-empty")

    def to_json(self) -> dict:
        return {
            "record_id": self.record_id,
            "incident_id": self.incident_id,
            "station_id": self.station_id,
            "category": self.diagnosis.category.value if self.diagnosis else None,
            "playbook_id": self.diagnosis.playbook_id if self.diagnosis else None,
            "confidence": round(self.confidence, 6),
            "tier": self.tier.name,
            "action_taken": self.action_taken,
            "outcome_ok": self.outcome_ok,
            "status": self.status,
            "submitted_at_s": self.submitted_at_s,
            "resolved_by": self.resolved_by,
            "urgency": self.urgency,
            "trail": list(self.trail),
        }


class ApprovalQueue:
    """Pending approvals keyed by record id; serialized state transitions,
    timeout enforced against the injected simulated clock."""

    def __init__(self, clock: SimClock, timeout_s: float = APPROVAL_TIMEOUT_S):
        self.clock = clock
        self.timeout_s = timeout_s
        self._records: dict[str, ResolutionRecord] = {}

    def submit(self, record: ResolutionRecord) -> None:
        record.status = "pending"
        record.submitted_at_s = self.clock.now_s()
        self._records[record.record_id] = record

    def get(self, record_id: str) -> ResolutionRecord:
        try:
            return self._records[record_id]
        except KeyError:
            raise UnknownRecord(record_id) from None

    def pending(self) -> list[ResolutionRecord]:
        order = {"high": 0, "normal": 1, "low": 2}
        return sorted(
            (r for r in self._records.values() if r.status == "pending"),
            key=lambda r: (order.get(r.urgency, 1), r.submitted_at_s),
        )

    def expire(self) -> list[ResolutionRecord]:
        """Auto-escalate everything pending past the timeout."""
        now = self.clock.now_s()
        expired = []
        for rec in self._records.values():
            if rec.status == "pending" and now - rec.submitted_at_s > self.timeout_s:
                rec.status = "closed"
                rec.tier = DecisionTier.ESCALATE
                rec.action_taken = "escalated"
                rec.trail.append(f"approval timed out after {self.timeout_s:.0f}s; auto-escalated")
                expired.append(rec)
        return expired


# --- incident construction from live station state ---------------------------

def incident_from_station(
    station: SimStation,
    stream: np.ndarray,
    taxonomy: dict[str, ErrorCode],
    incident_id: str,
) -> Incident:
    last = stream[-1]
    snap = TelemetrySnapshot(
        timestamp=station.clock.now_s(),
        voltage_l1=float(last[0]),
        voltage_l2=float(last[1]),
        voltage_l3=float(last[2]),
        current_total=float(last[3]),
        temperature_cabinet=float(last[4]),
        temperature_connector=float(last[5]),
        comm_error_rate=float(last[6]),
    )
    codes = tuple(taxonomy[c] for c in station.error_codes if c in taxonomy)
    if not codes:
        codes = (taxonomy["NoError"],)
    events = tuple(
        (float(i), f"status {station.connector_status.value}") for i in range(1)
    )
    return Incident(
        id=incident_id,
        station=station.profile,
        error_codes=codes,
        telemetry=snap,
        recent_events=events,
    )


# --- the AutoOps engine ------------------------------------------------------

class AutoOpsEngine:
    def __init__(
        self,
        detector: AnomalyDetector,
        diagnoser,
        model: ConfidenceModel,
        library: PlaybookLibrary | None = None,
        kb=None,
        taxonomy: dict[str, ErrorCode] | None = None,
        clock: SimClock | None = None,
        theta: float = THETA_AUTONOMOUS,
        confidence_source: str = "model",  # model | diagnoser (calibration ablated)
    ):
        self.detector = detector
        self.diagnoser = diagnoser
        self.model = model
        self.library = library or default_library()
        self.kb = kb
        self.taxonomy = taxonomy or default_taxonomy()
        self.clock = clock or SimClock()
        self.theta = theta
        self.confidence_source = confidence_source
        self.safety = SafetyVerifier()
        self.history = ActionHistory()
        self.executor = PlaybookExecutor()
        self.queue = ApprovalQueue(self.clock)
        self.records: dict[str, ResolutionRecord] = {}
        self.audit: list[ResolutionRecord] = []
        self.listeners: list = []
        self._stations: dict[str, SimStation] = {}
        self._seq = itertools.count(1)

    # -- events --

    def _emit(self, kind: str, payload: dict) -> None:
        event = {"kind": kind, "at_s": self.clock.now_s(), **payload}
        for listener in self.listeners:
            listener(event)

    def _finish(self, record: ResolutionRecord) -> ResolutionRecord:
        self.records[record.record_id] = record
        self.audit.append(record)
        self._emit("resolution", record.to_json())
        return record

    def expire_approvals(self) -> list[ResolutionRecord]:
        """Escalate approvals past their deadline, recording each in the
        audit trail and notifying listeners."""
        expired = self.queue.expire()
        for record in expired:
            self.audit.append(record)
            self._emit("resolution", record.to_json())
        return expired

    # -- the loop --

    def tick(self, station: SimStation, stream: np.ndarray, incident: Incident | None = None):
        """One sense-diagnose-act pass. Returns a ResolutionRecord, or None
        when the stream is nominal. Module errors surface as an Escalated
        record; the loop itself never raises."""
        self.expire_approvals()
        record_id = f"R{next(self._seq):06d}"
        self._stations[station.profile.station_id] = station
        try:
            report = self.detector.detect(stream)
            if report is None:
                return None
            return self._handle_anomaly(record_id, station, stream, report, incident)
        except Exception as exc:  # noqa: BLE001 - the loop must survive anything
            record = ResolutionRecord(
                record_id=record_id,
                incident_id=incident.id if incident else record_id,
                station_id=station.profile.station_id,
                diagnosis=None,
                indicators=None,
                confidence=0.0,
                tier=DecisionTier.ESCALATE,
                trail=[f"pipeline error: {type(exc).__name__}: {exc}"],
                action_taken="escalated",
                urgency="high",
            )
            return self._finish(record)

    def _handle_anomaly(
        self,
        record_id: str,
        station: SimStation,
        stream: np.ndarray,
        report: AnomalyReport,
        incident: Incident | None,
    ) -> ResolutionRecord:
        trail = [
            f"anomaly detected: combined={report.score_combined:.4f} severity={report.severity.value}"
        ]
        if incident is None:
            incident = incident_from_station(station, stream, self.taxonomy, record_id)
        retrieval = []
        if self.kb is not None and len(self.kb):
            retrieval = ara_retrieve(render_incident(incident), None, self.kb)
            trail.append(f"retrieved {len(retrieval)} evidence chunks")
        diagnosis = self.diagnoser.diagnose(incident, self.kb)
        trail.append(
            f"diagnosis: {diagnosis.category.value} via {diagnosis.playbook_id} "
            f"(raw confidence {diagnosis.raw_confidence:.3f})"
        )
        playbook = self.library.get(diagnosis.playbook_id) if diagnosis.playbook_id else None
        safety_critical = bool(playbook and playbook.safety_class == "critical") or any(
            ec.playbook_id and ec.playbook_id.startswith("DIAG-SAFETY")
            for ec in incident.error_codes
        )
        novelty = (
            self.diagnoser.novelty(incident)
            if isinstance(self.diagnoser, ReferenceDiagnoser)
            else 0.0
        )
        indicators = extract_indicators(
            incident,
            diagnosis,
            retrieval,
            self.history,
            now_s=self.clock.now_s(),
            telemetry_correlation=self.detector.similarity_to_history(stream),
            novelty=novelty,
            safety_critical_action=safety_critical,
        )
        if self.confidence_source == "diagnoser":
            conf = diagnosis.raw_confidence
        else:
            conf = ccar.calibrated_confidence(self.model, indicators)
        tier = ccar.decide(conf, safety_critical)
        if diagnosis.escalation_required and tier in AUTONOMOUS_TIERS:
            tier = DecisionTier.RECOMMEND
            trail.append("diagnoser flagged escalation; autonomous tier capped")
        trail.append(f"calibrated confidence {conf:.4f} -> tier {tier.name}")
        record = ResolutionRecord(
            record_id=record_id,
            incident_id=incident.id,
            station_id=station.profile.station_id,
            diagnosis=diagnosis,
            indicators=indicators,
            confidence=conf,
            tier=tier,
            trail=trail,
            urgency=assess_urgency(report.severity),
        )
        if tier in AUTONOMOUS_TIERS and conf >= self.theta and playbook is not None:
            return self._execute(record, station, playbook, autonomous=True)
        if tier in (DecisionTier.RECOMMEND, DecisionTier.ESCALATE, DecisionTier.AUTO_NOTIFY):
            trail.append("queued for operator approval")
            self.queue.submit(record)
            self.records[record.record_id] = record
            self._emit("approval_pending", record.to_json())
            return record
        record.action_taken = "escalated"
        trail.append("expert review required; not queued for one-click approval")
        return self._finish(record)

    def _execute(
        self,
        record: ResolutionRecord,
        station: SimStation,
        playbook,
        autonomous: bool,
        operator: str | None = None,
    ) -> ResolutionRecord:
        now = self.clock.now_s()
        # an explicit operator decision satisfies the human-approval
        # requirement for critical actions; rate limiting still applies
        effective_class = playbook.safety_class
        if not autonomous and effective_class == "critical":
            effective_class = "elevated"
        verdict = self.safety.verify(
            playbook.id,
            station.profile.station_id,
            {},
            now,
            safety_class=effective_class,
        )
        if not verdict.approved:
            record.action_taken = "escalated"
            record.status = "closed"
            record.tier = DecisionTier.ESCALATE
            record.trail.append(f"safety verifier rejected: {'; '.join(verdict.reasons)}")
            return self._finish(record)
        self.safety.record(playbook.id, station.profile.station_id, now)
        outcome = self.executor.execute(playbook, station)
        ok = outcome.success
        self.safety.history[-1].outcome = ok
        record.execution = outcome
        record.outcome_ok = ok
        record.status = "closed"
        record.resolved_by = operator
        if autonomous:
            record.action_taken = (
                "autonomous" if record.tier is DecisionTier.AUTO_SILENT else "notified"
            )
        else:
            record.action_taken = "approved"
        record.trail.append(
            f"playbook {playbook.id} -> {outcome.status.value} "
            f"({len(outcome.executed)} steps, {outcome.retries_used} retries)"
        )
        # feedback loop: the historical success rate indicator sees this run
        if record.diagnosis is not None:
            self.history.record(
                ActionRecord(
                    station_id=station.profile.station_id,
                    category=record.diagnosis.category,
                    action=record.diagnosis.action,
                    at_s=now,
                    success=ok,
                    autonomous=autonomous,
                )
            )
        return self._finish(record)

    # -- approvals --

    def resolve_approval(self, record_id: str, decision: str, operator: str) -> ResolutionRecord:
        self.expire_approvals()
        record = self.queue.get(record_id)
        if record.status != "pending":
            raise NotPending(record_id)
        if decision not in ("approve", "reject"):
            raise OrchestratorError(f"unknown decision {decision!r}")
        if decision == "reject":
            record.status = "closed"
            record.action_taken = "rejected"
            record.resolved_by = operator
            record.trail.append(f"rejected by {operator}")
            return self._finish(record)
        station = self._stations.get(record.station_id)
        playbook = (
            self.library.get(record.diagnosis.playbook_id)
            if record.diagnosis and record.diagnosis.playbook_id
            else None
        )
        if station is None or playbook is None:
            record.status = "closed"
            record.action_taken = "escalated"
            record.trail.append("approved but no executable playbook/station; escalated")
            record.resolved_by = operator
            return self._finish(record)
        record.trail.append(f"approved by {operator}")
        return self._execute(record, station, playbook, autonomous=False, operator=operator)
