import dataclasses

import numpy as np
import pytest

from aura.ara.fuse import RetrievalResult
from aura.diagnosis import (
    ActionHistory,
    ActionRecord,
    Diagnosis,
    DiagnosisError,
    EmptyCorpus,
    HEDGING_TERMS,
    ReferenceDiagnoser,
    extract_indicators,
    render_incident,
)
from aura.domain import FaultCategory, PERSISTENT_FAULT_EVENTS
from aura.fleetsim.corpus import generate_corpus


@pytest.fixture(scope="module")
def diagnoser(corpus_small):
    return ReferenceDiagnoser(corpus_small)


class TestRendering:
    def test_includes_codes_and_events(self, corpus_small):
        inc = corpus_small[0]
        text = render_incident(inc)
        assert inc.error_codes[0].code in text
        assert inc.recent_events[0][1] in text
        assert inc.station.firmware in text

    def test_symptom_phrases(self, corpus_small):
        comm = next(
            i for i in corpus_small
            if i.ground_truth_category is FaultCategory.COMMUNICATION
        )
        text = render_incident(comm)
        assert "elevated communication error rate" in text
        assert "zero charging current" in text

    def test_stable(self, corpus_small):
        assert render_incident(corpus_small[3]) == render_incident(corpus_small[3])


class TestReferenceDiagnoser:
    def test_empty_corpus_rejected(self):
        with pytest.raises(EmptyCorpus):
            ReferenceDiagnoser([])

    def test_out_of_sample_category_accuracy(self, diagnoser):
        held_out = generate_corpus(150, seed=99)
        correct = sum(
            diagnoser.diagnose(inc).category is inc.ground_truth_category
            for inc in held_out
        )
        assert correct / len(held_out) >= 0.85

    def test_deterministic(self, diagnoser, corpus_small):
        inc = generate_corpus(5, seed=50)[0]
        assert diagnoser.diagnose(inc) == diagnoser.diagnose(inc)

    def test_corpus_member_has_low_novelty(self, diagnoser, corpus_small):
        assert diagnoser.novelty(corpus_small[7]) == pytest.approx(0.0, abs=1e-9)

    def test_novelty_bounded(self, diagnoser):
        for inc in generate_corpus(30, seed=77):
            assert 0.0 <= diagnoser.novelty(inc) <= 1.0

    def test_persistent_fault_events_force_hardware_suspicion(
        self, diagnoser, corpus_small
    ):
        software = next(
            i for i in corpus_small if i.resolvable_by != "hardware_only"
        )
        marked = dataclasses.replace(
            software,
            recent_events=software.recent_events
            + tuple((-3.0, e) for e in sorted(PERSISTENT_FAULT_EVENTS)),
        )
        diag = diagnoser.diagnose(marked)
        assert diag.hardware_suspected == 1.0
        assert diag.escalation_required
        assert diag.raw_confidence == 0.0

    def test_hardware_suspicion_hedges_narrative(self, diagnoser, corpus_small):
        hw = next(i for i in corpus_small if i.resolvable_by == "hardware_only")
        narrative = diagnoser.diagnose(hw).narrative.lower()
        assert any(term in narrative for term in HEDGING_TERMS)

    def test_confident_diagnosis_reads_clean(self, diagnoser, corpus_small):
        for inc in corpus_small:
            diag = diagnoser.diagnose(inc)
            if diag.raw_confidence >= 0.8 and not diag.escalation_required:
                assert not any(t in diag.narrative.lower() for t in HEDGING_TERMS)
                break
        else:
            pytest.fail("no confident diagnosis found in corpus")

    def test_playbook_comes_from_taxonomy(self, diagnoser, corpus_small):
        software = next(i for i in corpus_small if i.resolvable_by != "hardware_only")
        diag = diagnoser.diagnose(software)
        assert diag.playbook_id == software.error_codes[0].playbook_id

    def test_low_confidence_requires_escalation(self, diagnoser):
        for inc in generate_corpus(100, seed=13):
            diag = diagnoser.diagnose(inc)
            if diag.raw_confidence < 0.5:
                assert diag.escalation_required

    def test_confidence_validation(self):
        with pytest.raises(DiagnosisError):
            Diagnosis(
                category=FaultCategory.OTHER,
                root_cause="x",
                action="x",
                playbook_id=None,
                raw_confidence=1.5,
                narrative="",
            )


class TestActionHistory:
    def test_unseen_action_scores_half(self):
        assert ActionHistory().success_rate(FaultCategory.COMMUNICATION, "PB") == 0.5

    def test_laplace_smoothing(self):
        history = ActionHistory()
        for ok in (True, True, True, False):
            history.record(
                ActionRecord("CS-1", FaultCategory.COMMUNICATION, "PB", 0.0, ok)
            )
        assert history.success_rate(FaultCategory.COMMUNICATION, "PB") == (3 + 1) / (4 + 2)
        # other (category, action) pairs are unaffected
        assert history.success_rate(FaultCategory.MECHANICAL, "PB") == 0.5

    def test_rate_non_decreasing_with_successes(self):
        history = ActionHistory()
        last = history.success_rate(FaultCategory.OTHER, "PB")
        for i in range(10):
            history.record(ActionRecord("CS-1", FaultCategory.OTHER, "PB", float(i), True))
            rate = history.success_rate(FaultCategory.OTHER, "PB")
            assert rate >= last
            last = rate

    def test_recent_autonomous_failure_window(self):
        history = ActionHistory()
        history.record(
            ActionRecord("CS-1", FaultCategory.OTHER, "PB", 0.0, False, autonomous=True)
        )
        assert history.recent_autonomous_failure("CS-1", now_s=3600.0)
        assert not history.recent_autonomous_failure("CS-1", now_s=25 * 3600.0)
        assert not history.recent_autonomous_failure("CS-2", now_s=3600.0)

    def test_operator_failures_do_not_count(self):
        history = ActionHistory()
        history.record(
            ActionRecord("CS-1", FaultCategory.OTHER, "PB", 0.0, False, autonomous=False)
        )
        assert not history.recent_autonomous_failure("CS-1", now_s=10.0)


def _diag(narrative="Matched 5 of 5 similar incidents.", category=FaultCategory.COMMUNICATION):
    return Diagnosis(
        category=category,
        root_cause="r",
        action="DIAG-COMM-OCPP-001",
        playbook_id="DIAG-COMM-OCPP-001",
        raw_confidence=0.9,
        narrative=narrative,
    )


def _result(cid, methods, rank=1):
    ranks = {m: rank for m in methods}
    return RetrievalResult(
        chunk_id=cid,
        per_method_rank=ranks,
        rrf_score=sum(1.0 / (60 + r) for r in ranks.values()),
    )


class TestIndicators:
    def test_unanimous_rank_one_gives_full_retrieval_score(self, corpus_small):
        retrieval = [_result("c1", ("dense", "sparse", "metadata"))]
        iv = extract_indicators(corpus_small[0], _diag(), retrieval, ActionHistory())
        assert iv.phi[0] == pytest.approx(1.0)

    def test_no_retrieval_scores_zero(self, corpus_small):
        iv = extract_indicators(corpus_small[0], _diag(), [], ActionHistory())
        assert iv.phi[0] == 0.0

    def test_certainty_complements_hedging(self, corpus_small):
        hedged = _diag("This might be a fault; the cause is unclear, possibly thermal.")
        iv = extract_indicators(corpus_small[0], hedged, [], ActionHistory())
        assert iv.phi[2] == pytest.approx(1.0 - iv.psi[2])
        assert iv.psi[2] > 0.0
        clean = extract_indicators(corpus_small[0], _diag(), [], ActionHistory())
        assert clean.psi[2] == 0.0

    def test_safety_flag(self, corpus_small):
        iv = extract_indicators(
            corpus_small[0], _diag(), [], ActionHistory(), safety_critical_action=True
        )
        assert iv.psi[1] == 1.0

    def test_conflicting_top_chunks(self, corpus_small):
        retrieval = [_result("a", ("dense",)), _result("b", ("dense",), rank=2)]
        mapping = {"a": "PB-1", "b": "PB-2"}
        iv = extract_indicators(
            corpus_small[0], _diag(), retrieval, ActionHistory(), chunk_playbook=mapping
        )
        assert iv.psi[3] == 1.0
        agreeing = {"a": "PB-1", "b": "PB-1"}
        iv2 = extract_indicators(
            corpus_small[0], _diag(), retrieval, ActionHistory(), chunk_playbook=agreeing
        )
        assert iv2.psi[3] == 0.0

    def test_recent_failure_flag(self, corpus_small):
        inc = corpus_small[0]
        history = ActionHistory()
        history.record(
            ActionRecord(inc.station.station_id, FaultCategory.OTHER, "PB", 0.0, False)
        )
        iv = extract_indicators(inc, _diag(), [], history, now_s=60.0)
        assert iv.psi[4] == 1.0

    def test_all_components_bounded(self, corpus_small):
        iv = extract_indicators(
            corpus_small[0],
            _diag(),
            [_result("a", ("dense",))],
            ActionHistory(),
            telemetry_correlation=2.0,
            novelty=1.5,
            model_agreement=-0.2,
        )
        for v in (*iv.phi, *iv.psi):
            assert 0.0 <= v <= 1.0
