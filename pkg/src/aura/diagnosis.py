"""Pluggable diagnoser contract, the deterministic retrieval-based reference
diagnoser, and confidence-indicator extraction.

The reference diagnoser is a k-nearest-neighbor vote over a labeled incident
corpus in the shared hashed-embedding space: majority category among the
k = 5 nearest neighbors, with raw confidence = vote fraction x mean
similarity. It is a pure function of (incident, corpus snapshot), so any
LLM-backed implementation can replace it behind the same interface without
touching the decision layer.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from aura.ara.fuse import DEFAULT_K, RetrievalResult
from aura.ara.index import embed
from aura.ara.tokenizer import tokenize
from aura.ccar import IndicatorVector
from aura.domain import ErrorCode, FaultCategory, Incident, PERSISTENT_FAULT_EVENTS

KNN_K = 5

#: Hedging / uncertainty lexicon, matched case-insensitively.
HEDGING_TERMS = ("possibly", "might", "could be", "maybe", "unclear", "perhaps")


class DiagnosisError(Exception):
    pass


class EmptyCorpus(DiagnosisError):
    pass


@dataclass(frozen=True)
class Diagnosis:
    category: FaultCategory
    root_cause: str
    action: str
    playbook_id: str | None
    raw_confidence: float
    narrative: str
    escalation_required: bool = False
    hardware_suspected: float = 0.0  # fraction of neighbors needing physical intervention

    def __post_init__(self):
        if not 0.0 <= self.raw_confidence <= 1.0:
            raise DiagnosisError(f"raw_confidence {self.raw_confidence} outside [0, 1]")


class Diagnoser(Protocol):
    def diagnose(self, incident: Incident, kb=None) -> Diagnosis: ...


def render_incident(incident: Incident) -> str:
    """Stable text rendering used for embedding and retrieval queries."""
    parts = [
        f"station {incident.station.model} firmware {incident.station.firmware}",
        f"ocpp {incident.station.ocpp_version.value}",
        "errors " + " ".join(ec.code for ec in incident.error_codes),
        "events " + " ".join(e for _, e in incident.recent_events),
    ]
    t = incident.telemetry
    if t.comm_error_rate > 1.0:
        parts.append("elevated communication error rate")
    if t.current_total < 0.5:
        parts.append("zero charging current")
    mean_v = (t.voltage_l1 + t.voltage_l2 + t.voltage_l3) / 3
    if mean_v > 430 or mean_v < 370:
        parts.append("voltage deviation")
    if t.temperature_connector > 50:
        parts.append("connector overtemperature")
    return "; ".join(parts)


class ReferenceDiagnoser:
    """Deterministic k-NN diagnoser over a labeled incident corpus."""

    def __init__(self, corpus: list[Incident], k: int = KNN_K):
        if not corpus:
            raise EmptyCorpus("reference diagnoser needs a labeled corpus")
        self.corpus = list(corpus)
        self.k = k
        self._vectors = np.vstack([embed(tokenize(render_incident(i))) for i in self.corpus])
        # 95th-percentile pairwise distance on a bounded sample, for novelty
        # normalization
        sample = self._vectors[: min(len(self.corpus), 200)]
        sims = sample @ sample.T
        dists = 1.0 - sims[np.triu_indices(len(sample), k=1)]
        self._p95_dist = float(np.percentile(dists, 95)) if dists.size else 1.0

    def neighbors(self, incident: Incident) -> list[tuple[int, float]]:
        """(corpus index, cosine similarity) of the k nearest entries."""
        q = embed(tokenize(render_incident(incident)))
        sims = self._vectors @ q
        order = np.argsort(-sims)[: self.k]
        return [(int(i), float(sims[i])) for i in order]

    def nearest_distance(self, incident: Incident) -> float:
        nn = self.neighbors(incident)
        return 1.0 - nn[0][1]

    def novelty(self, incident: Incident) -> float:
        """Distance to nearest neighbor normalized by the p95 pairwise
        corpus distance, clamped to [0, 1]."""
        return float(min(max(self.nearest_distance(incident) / max(self._p95_dist, 1e-9), 0.0), 1.0))

    def diagnose(self, incident: Incident, kb=None) -> Diagnosis:
        nn = self.neighbors(incident)
        votes: dict[FaultCategory, int] = {}
        for idx, _ in nn:
            cat = self.corpus[idx].ground_truth_category or FaultCategory.OTHER
            votes[cat] = votes.get(cat, 0) + 1
        category = max(votes, key=lambda c: (votes[c], c.value))
        vote_fraction = votes[category] / len(nn)
        mean_sim = sum(max(s, 0.0) for _, s in nn) / len(nn)
        hw_frac = sum(
            1 for idx, _ in nn if self.corpus[idx].resolvable_by == "hardware_only"
        ) / len(nn)
        # direct evidence beats neighbor voting: the station already reported
        # that automated remediation did not stick
        if any(e in PERSISTENT_FAULT_EVENTS for _, e in incident.recent_events):
            hw_frac = 1.0
        raw = float(min(max(vote_fraction * mean_sim * (1.0 - hw_frac), 0.0), 1.0))
        playbook_id = None
        for ec in incident.error_codes:
            if ec.playbook_id is not None:
                playbook_id = ec.playbook_id
                break
        hedge = "" if vote_fraction >= 0.6 else " The category is unclear and could be mixed."
        if hw_frac >= 0.5:
            hedge += (
                " This might be a persistent hardware fault; software remediation"
                " is unclear and could be ineffective. Physical service is possibly needed."
            )
        narrative = (
            f"Matched {votes[category]} of {len(nn)} similar incidents as "
            f"{category.value}; primary error {incident.error_codes[0].code}.{hedge}"
        )
        return Diagnosis(
            category=category,
            root_cause=f"{category.value} fault pattern around {incident.error_codes[0].code}",
            action=playbook_id or "escalate",
            playbook_id=playbook_id,
            raw_confidence=raw,
            narrative=narrative,
            escalation_required=raw < 0.5 or hw_frac >= 0.5,
            hardware_suspected=hw_frac,
        )


# --- action history ----------------------------------------------------------

@dataclass
class ActionRecord:
    station_id: str
    category: FaultCategory
    action: str
    at_s: float
    success: bool
    autonomous: bool = True


class ActionHistory:
    """Append-only outcome log; single writer, many readers."""

    def __init__(self):
        self.records: list[ActionRecord] = []

    def record(self, rec: ActionRecord) -> None:
        self.records.append(rec)

    def success_rate(self, category: FaultCategory, action: str) -> float:
        """Laplace-smoothed (s + 1) / (n + 2) so unseen actions score 0.5."""
        relevant = [r for r in self.records if r.category == category and r.action == action]
        successes = sum(1 for r in relevant if r.success)
        return (successes + 1) / (len(relevant) + 2)

    def recent_autonomous_failure(self, station_id: str, now_s: float, window_s: float = 24 * 3600.0) -> bool:
        return any(
            r.station_id == station_id
            and r.autonomous
            and not r.success
            and now_s - r.at_s <= window_s
            for r in self.records
        )


# --- indicator extraction ----------------------------------------------------

def _term_density(text: str) -> float:
    lowered = text.lower()
    hits = sum(len(re.findall(re.escape(term), lowered)) for term in HEDGING_TERMS)
    words = max(len(text.split()), 1)
    return min(hits / words * 10.0, 1.0)  # scaled: 10% hedge words saturates


def extract_indicators(
    incident: Incident,
    diagnosis: Diagnosis,
    retrieval: list[RetrievalResult],
    history: ActionHistory,
    *,
    now_s: float = 0.0,
    telemetry_correlation: float = 0.5,
    novelty: float = 0.0,
    safety_critical_action: bool = False,
    chunk_playbook: dict[str, str] | None = None,
    model_agreement: float = 1.0,
) -> IndicatorVector:
    """Assemble the five positive and five negative confidence indicators.

    ``chunk_playbook`` maps retrieved chunk ids to the playbook they support,
    for the conflicting-evidence indicator.
    """
    n_methods = max((len(r.per_method_rank) for r in retrieval), default=1)
    max_possible = n_methods / (DEFAULT_K + 1)
    phi1 = min(retrieval[0].rrf_score / max_possible, 1.0) if retrieval else 0.0
    phi2 = history.success_rate(diagnosis.category, diagnosis.action)
    phi3 = 1.0 - _term_density(diagnosis.narrative)
    phi4 = float(min(max(telemetry_correlation, 0.0), 1.0))
    phi5 = float(min(max(model_agreement, 0.0), 1.0))

    psi1 = float(min(max(novelty, 0.0), 1.0))
    psi2 = 1.0 if safety_critical_action else 0.0
    psi3 = _term_density(diagnosis.narrative)
    psi4 = 0.0
    if chunk_playbook and len(retrieval) >= 2:
        top2 = [chunk_playbook.get(r.chunk_id) for r in retrieval[:2]]
        if top2[0] is not None and top2[1] is not None and top2[0] != top2[1]:
            psi4 = 1.0
    psi5 = 1.0 if history.recent_autonomous_failure(incident.station.station_id, now_s) else 0.0
    return IndicatorVector(
        phi=(phi1, phi2, phi3, phi4, phi5),
        psi=(psi1, psi2, psi3, psi4, psi5),
    )
