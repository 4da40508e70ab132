"""Corpus replay evaluation and the ablation harness.

``evaluate`` pushes every incident of a labeled corpus through the full
pipeline (detector -> retrieval -> diagnosis -> calibrated confidence ->
safety-gated execution) and reports classification quality, autonomy rates,
calibration, retrieval quality, MTTR, and a failure-mode histogram.

Training material (diagnoser corpus, calibration records) is generated from
seeds derived from the config seed, disjoint from the corpus under test, so
the evaluation replays every given incident out-of-sample.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from aura import ccar
from aura.anomaly import AnomalyDetector
from aura.ara.chunking import Document, chunk_document
from aura.ara.index import KnowledgeBase, retrieve as ara_retrieve
from aura.ara.metrics import retrieval_metrics
from aura.ccar import CalibrationRecord, ConfidenceModel, sigmoid
from aura.diagnosis import (
    ActionHistory,
    Diagnosis,
    ReferenceDiagnoser,
    extract_indicators,
    render_incident,
)
from aura.domain import FaultCategory, Incident, default_taxonomy
from aura.fleetsim.clock import SimClock
from aura.fleetsim.corpus import (
    _EVENT_TEMPLATES,
    generate_corpus,
    fault_script_for_incident,
    telemetry_stream_for_incident,
)
from aura.fleetsim.station import HARDWARE_ONLY, SimStation
from aura.orchestrator import AutoOpsEngine
from aura.service.config import EngineConfig

FAILURE_MODES = (
    "low-confidence-escalated",
    "hardware-replacement",
    "multi-fault",
    "novel-pattern",
    "false-negative",
)

_NOMINAL_BASE = np.array([400.0, 400.0, 400.0, 16.0, 35.0, 30.0, 0.0])
_NOMINAL_NOISE = np.array([0.5, 0.5, 0.5, 0.2, 0.3, 0.3, 0.02])


class CorpusError(Exception):
    pass


@dataclass
class EvaluationReport:
    n: int
    accuracy: float
    per_category: dict  # category -> {precision, recall, f1, support}
    autonomous_rate: float
    false_positive_rate: float
    false_negative_rate: float
    hardware_autonomous: int
    mttr_mean_s: float
    mttr_p50_s: float
    mttr_p95_s: float
    retrieval: dict
    ece_before: float
    ece_after: float
    temperature: float
    theta: float
    failure_modes: dict

    def to_json(self) -> str:
        doc = {
            "n": self.n,
            "accuracy": round(self.accuracy, 6),
            "per_category": {
                k: {m: round(v, 6) if isinstance(v, float) else v for m, v in row.items()}
                for k, row in sorted(self.per_category.items())
            },
            "autonomous_rate": round(self.autonomous_rate, 6),
            "false_positive_rate": round(self.false_positive_rate, 6),
            "false_negative_rate": round(self.false_negative_rate, 6),
            "hardware_autonomous": self.hardware_autonomous,
            "mttr": {
                "mean_s": round(self.mttr_mean_s, 3),
                "p50_s": round(self.mttr_p50_s, 3),
                "p95_s": round(self.mttr_p95_s, 3),
            },
            "retrieval": {k: round(v, 6) for k, v in sorted(self.retrieval.items())},
            "calibration": {
                "ece_before": round(self.ece_before, 6),
                "ece_after": round(self.ece_after, 6),
                "temperature": round(self.temperature, 6),
                "theta": round(self.theta, 6),
            },
            "failure_modes": {k: self.failure_modes.get(k, 0) for k in FAILURE_MODES},
        }
        return json.dumps(doc, sort_keys=True, indent=2)


class MajorityDiagnoser:
    """Retrieval-free baseline for the ablation harness: always predicts the
    most frequent training category; playbook still taken from the error
    taxonomy."""

    def __init__(self, corpus: list[Incident]):
        counts: dict[FaultCategory, int] = {}
        for inc in corpus:
            cat = inc.ground_truth_category or FaultCategory.OTHER
            counts[cat] = counts.get(cat, 0) + 1
        self.category = max(counts, key=lambda c: (counts[c], c.value))
        self.prior = counts[self.category] / len(corpus)

    def diagnose(self, incident: Incident, kb=None) -> Diagnosis:
        playbook_id = next(
            (ec.playbook_id for ec in incident.error_codes if ec.playbook_id), None
        )
        return Diagnosis(
            category=self.category,
            root_cause=f"assumed {self.category.value} fault",
            action=playbook_id or "escalate",
            playbook_id=playbook_id,
            raw_confidence=self.prior,
            narrative=f"No evidence base available; defaulting to {self.category.value}.",
        )


def playbook_documents(taxonomy=None) -> list[Document]:
    """One knowledge-base document per playbook id, carrying the error codes
    and category vocabulary that incident queries mention."""
    taxonomy = taxonomy or default_taxonomy()
    by_playbook: dict[str, list] = {}
    for code in sorted(taxonomy.values(), key=lambda c: c.code):
        if code.playbook_id:
            by_playbook.setdefault(code.playbook_id, []).append(code)
    docs = []
    for pid, codes in sorted(by_playbook.items()):
        category = codes[0].category
        events = _EVENT_TEMPLATES[category]
        # single paragraph per playbook so each doc chunks as one unit and the
        # error codes stay co-located with the category vocabulary
        text = (
            f"Remediation procedure {pid} for {category.value} faults. "
            "Applies to error codes " + " ".join(c.code for c in codes) + ". "
            "Typical events: " + " ".join(events) + "."
        )
        docs.append(
            Document(
                doc_id=pid,
                text=text,
                metadata={"playbook_id": pid, "category": category.value},
            )
        )
    return docs


def build_kb(taxonomy=None) -> KnowledgeBase:
    chunks = []
    for doc in playbook_documents(taxonomy):
        chunks.extend(chunk_document(doc))
    return KnowledgeBase(chunks)


def _nominal_streams(seed: int, count: int = 20, length: int = 240) -> list[np.ndarray]:
    rng = np.random.default_rng(seed)
    return [
        _NOMINAL_BASE + rng.normal(0, 1, size=(length, 7)) * _NOMINAL_NOISE
        for _ in range(count)
    ]


@dataclass
class Pipeline:
    engine: AutoOpsEngine
    detector: AnomalyDetector
    diagnoser: object
    model: ConfidenceModel
    kb: KnowledgeBase
    clock: SimClock
    theta: float
    temperature: float
    ece_before: float
    ece_after: float


def _indicator_sample(incident, detector, diagnoser, kb, history, stream_seed):
    """The engine's indicator computation, standalone, for calibration."""
    stream = telemetry_stream_for_incident(incident, seed=stream_seed)
    retrieval = ara_retrieve(render_incident(incident), None, kb) if len(kb) else []
    diagnosis = diagnoser.diagnose(incident, kb)
    novelty = (
        diagnoser.novelty(incident) if isinstance(diagnoser, ReferenceDiagnoser) else 0.0
    )
    indicators = extract_indicators(
        incident,
        diagnosis,
        retrieval,
        history,
        telemetry_correlation=detector.similarity_to_history(stream),
        novelty=novelty,
    )
    return diagnosis, indicators


def build_pipeline(
    config: EngineConfig,
    disable_calibration: bool = False,
    disable_retrieval: bool = False,
) -> Pipeline:
    taxonomy = default_taxonomy()
    detector = AnomalyDetector(
        window=config.detector_window, threshold=config.detector_threshold, seed=config.seed
    )
    detector.fit(_nominal_streams(config.seed))
    train = generate_corpus(800, seed=config.seed + 1)
    calib = generate_corpus(500, seed=config.seed + 2)
    kb = build_kb(taxonomy)
    diagnoser = MajorityDiagnoser(train) if disable_retrieval else ReferenceDiagnoser(train)

    history = ActionHistory()
    samples = []
    for inc in calib:
        diagnosis, indicators = _indicator_sample(
            inc, detector, diagnoser, kb, history, config.seed
        )
        ok = (
            diagnosis.category == inc.ground_truth_category
            and inc.resolvable_by != HARDWARE_ONLY
            and diagnosis.playbook_id is not None
        )
        samples.append((indicators, ok))

    fit_n = len(samples) * 3 // 5
    model = ccar.fit_weights([CalibrationRecord(i, o) for i, o in samples[:fit_n]])
    holdout = samples[fit_n:]
    logits = np.array([model.raw_logit(i) for i, _ in holdout])
    outcomes = np.array([o for _, o in holdout], dtype=bool)
    ece_before = ccar.expected_calibration_error(
        [sigmoid(z) for z in logits], outcomes
    )
    if disable_calibration:
        # no CCAR layer at all: the diagnoser's self-reported confidence is
        # gated at the fixed autonomous threshold
        temperature, ece_after, theta = 1.0, ece_before, config.theta
    else:
        temperature, ece_after = ccar.calibrate_temperature(logits, outcomes)
        calibrated = [sigmoid(z / temperature) for z in logits]
        try:
            theta = ccar.select_threshold(calibrated, outcomes, config.epsilon)
        except ccar.NoFeasibleThreshold:
            # no operating point is safe enough: disable autonomy outright
            theta = 1.0
    model = ConfidenceModel(
        w0=model.w0, w=model.w, v=model.v, temperature=temperature,
        theta_star=theta, fitted_at=model.fitted_at,
    )
    clock = SimClock()
    engine = AutoOpsEngine(
        detector, diagnoser, model, kb=kb, taxonomy=taxonomy, clock=clock,
        theta=theta,
        confidence_source="diagnoser" if disable_calibration else "model",
    )
    return Pipeline(
        engine=engine, detector=detector, diagnoser=diagnoser, model=model, kb=kb,
        clock=clock, theta=engine.theta, temperature=temperature,
        ece_before=ece_before, ece_after=ece_after,
    )


HUMAN_RESOLUTION_S = 7200.0
DETECTION_LATENCY_S = 60.0


def evaluate(
    corpus: list[Incident],
    config: EngineConfig | None = None,
    disable_calibration: bool = False,
    disable_retrieval: bool = False,
    pipeline: Pipeline | None = None,
) -> EvaluationReport:
    if not corpus:
        raise CorpusError("empty corpus")
    for inc in corpus:
        if inc.ground_truth_category is None:
            raise CorpusError(f"incident {inc.id} is unlabeled")
    config = config or EngineConfig()
    pipe = pipeline or build_pipeline(config, disable_calibration, disable_retrieval)
    engine = pipe.engine

    confusion: dict[tuple[str, str], int] = {}
    autonomous = 0
    auto_failures = 0
    missed = 0
    hardware_autonomous = 0
    mttrs = []
    failure_modes = {k: 0 for k in FAILURE_MODES}
    ranked: dict[str, list[str]] = {}
    gold: dict[str, set[str]] = {}
    gold_chunks: dict[str, set[str]] = {}
    for chunk in pipe.kb.chunks:
        pid = chunk.metadata.get("playbook_id")
        if pid:
            gold_chunks.setdefault(pid, set()).add(chunk.chunk_id)

    for inc in corpus:
        station = SimStation(inc.station, clock=pipe.clock)
        station.inject_fault(fault_script_for_incident(inc))
        stream = telemetry_stream_for_incident(inc, seed=config.seed)
        record = engine.tick(station, stream, incident=inc)
        is_hw = inc.resolvable_by == HARDWARE_ONLY

        if record is None:
            missed += 1
            failure_modes["false-negative"] += 1
            mttrs.append(HUMAN_RESOLUTION_S)
            continue

        predicted = record.diagnosis.category.value if record.diagnosis else "unknown"
        confusion[(inc.ground_truth_category.value, predicted)] = (
            confusion.get((inc.ground_truth_category.value, predicted), 0) + 1
        )
        if record.diagnosis and inc.resolvable_by and inc.resolvable_by != HARDWARE_ONLY:
            if inc.resolvable_by in gold_chunks:
                ranked[inc.id] = [
                    r.chunk_id
                    for r in ara_retrieve(render_incident(inc), None, pipe.kb)
                ]
                gold[inc.id] = gold_chunks[inc.resolvable_by]

        acted = record.action_taken in ("autonomous", "notified")
        if acted:
            autonomous += 1
            if is_hw:
                hardware_autonomous += 1
            if record.outcome_ok:
                mttrs.append(DETECTION_LATENCY_S + record.execution.elapsed_s)
            else:
                auto_failures += 1
                mttrs.append(HUMAN_RESOLUTION_S)
                failure_modes[_failure_mode(inc, record)] += 1
        else:
            mttrs.append(HUMAN_RESOLUTION_S)
            failure_modes[_failure_mode(inc, record)] += 1

    n = len(corpus)
    total_correct = sum(v for (gt, pred), v in confusion.items() if gt == pred)
    classified = sum(confusion.values())
    per_category = _per_category(confusion)
    mttr = np.array(mttrs)
    return EvaluationReport(
        n=n,
        accuracy=total_correct / classified if classified else 0.0,
        per_category=per_category,
        autonomous_rate=autonomous / n,
        false_positive_rate=auto_failures / autonomous if autonomous else 0.0,
        false_negative_rate=missed / n,
        hardware_autonomous=hardware_autonomous,
        mttr_mean_s=float(mttr.mean()),
        mttr_p50_s=float(np.percentile(mttr, 50)),
        mttr_p95_s=float(np.percentile(mttr, 95)),
        retrieval=retrieval_metrics(ranked, gold) if ranked else {},
        ece_before=pipe.ece_before,
        ece_after=pipe.ece_after,
        temperature=pipe.temperature,
        theta=pipe.theta,
        failure_modes=failure_modes,
    )


def _failure_mode(inc: Incident, record) -> str:
    if inc.resolvable_by == HARDWARE_ONLY:
        return "hardware-replacement"
    if record.diagnosis and record.diagnosis.hardware_suspected >= 0.5:
        return "hardware-replacement"
    if record.indicators and record.indicators.psi[0] >= 0.8:
        return "novel-pattern"
    if len({ec.category for ec in inc.error_codes}) > 1 or len(inc.error_codes) > 2:
        return "multi-fault"
    return "low-confidence-escalated"


def _per_category(confusion: dict) -> dict:
    cats = sorted({gt for gt, _ in confusion} | {p for _, p in confusion})
    out = {}
    for cat in cats:
        tp = confusion.get((cat, cat), 0)
        fp = sum(v for (gt, p), v in confusion.items() if p == cat and gt != cat)
        fn = sum(v for (gt, p), v in confusion.items() if gt == cat and p != cat)
        support = tp + fn
        if support == 0 and fp == 0:
            continue
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        out[cat] = {"precision": precision, "recall": recall, "f1": f1, "support": support}
    return out


def ablation(corpus: list[Incident], config: EngineConfig | None = None) -> dict:
    """Full pipeline vs no-calibration vs no-retrieval, on the same corpus."""
    config = config or EngineConfig()
    return {
        "full": evaluate(corpus, config),
        "no_calibration": evaluate(corpus, config, disable_calibration=True),
        "no_retrieval": evaluate(corpus, config, disable_retrieval=True),
    }
