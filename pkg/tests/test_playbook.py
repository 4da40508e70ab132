import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aura.domain import (
    ConnectorStandard,
    FaultCategory,
    OcppVersion,
    StationProfile,
)
from aura.fleetsim.clock import SimClock
from aura.fleetsim.station import ActionResult, FaultScript, SimStation
from aura.playbook.executor import OutcomeStatus, PlaybookExecutor, verify_resolution
from aura.playbook.library import default_library
from aura.playbook.model import (
    Playbook,
    RollbackPolicy,
    SchemaError,
    UnknownActionError,
    eval_condition,
    parse_playbook,
)
from aura.playbook.safety import (
    CRITICAL_REJECT_MESSAGE,
    RATE_LIMIT_MESSAGE,
    ActionClass,
    SafetyRule,
    SafetyVerifier,
    classify_action,
)

OCPP_RECOVERY = "DIAG-COMM-OCPP-001"


@pytest.fixture(scope="module")
def library():
    return default_library()


@pytest.fixture(scope="module")
def ocpp_playbook(library):
    return library.get(OCPP_RECOVERY)


def _station():
    profile = StationProfile(
        station_id="CS-0001",
        model="DCFC-150",
        firmware="3.2.1",
        ocpp_version=OcppVersion.V1_6J,
        connector_standard=ConnectorStandard.CCS2,
    )
    return SimStation(profile, clock=SimClock())


def _comm_fault():
    return FaultScript(
        category=FaultCategory.COMMUNICATION,
        error_codes=("CommTimeout",),
        perturbation="noise",
        resolvable_by=OCPP_RECOVERY,
        cleared_by="clear_connection_cache",
    )


class TestParsing:
    def test_ocpp_recovery_document(self, ocpp_playbook):
        pb = ocpp_playbook
        assert pb.version == "2.4.1"
        assert pb.confidence_threshold == 0.85
        assert pb.safety_class == "non_critical"
        assert pb.max_execution_time_s == 300.0
        assert len(pb.steps) == 8
        assert [s.id for s in pb.steps] == list(range(1, 9))
        assert pb.steps[6].expect_response == "Accepted"
        assert pb.steps[6].expect_timeout_s == 30.0
        assert pb.rollback.max_retries == 3
        assert pb.rollback.on_failure == "escalate_operator"
        assert pb.trigger.duration_s == 60.0
        assert pb.trigger.exclude_states == ("maintenance", "firmware_update")

    def test_missing_trigger_reports_path(self):
        doc = {"playbook": {"id": "X", "confidence_threshold": 0.8,
                            "safety_class": "standard",
                            "steps": [{"id": 1, "action": "log_state"}]}}
        with pytest.raises(SchemaError) as err:
            parse_playbook(doc)
        assert err.value.path == ".trigger"

    def test_unknown_action_rejected(self):
        doc = {"playbook": {"id": "X", "trigger": {"condition": "errors.count >= 1"},
                            "confidence_threshold": 0.8, "safety_class": "standard",
                            "steps": [{"id": 1, "action": "format_disk"}]}}
        with pytest.raises(UnknownActionError) as err:
            parse_playbook(doc)
        assert err.value.action == "format_disk"

    def test_non_increasing_step_ids_rejected(self):
        doc = {"playbook": {"id": "X", "trigger": {"condition": "errors.count >= 1"},
                            "confidence_threshold": 0.8, "safety_class": "standard",
                            "steps": [{"id": 2, "action": "log_state"},
                                      {"id": 2, "action": "log_state"}]}}
        with pytest.raises(SchemaError):
            parse_playbook(doc)

    def test_threshold_range_enforced(self):
        doc = {"playbook": {"id": "X", "trigger": {"condition": "errors.count >= 1"},
                            "confidence_threshold": 1.5, "safety_class": "standard",
                            "steps": [{"id": 1, "action": "log_state"}]}}
        with pytest.raises(SchemaError):
            parse_playbook(doc)

    def test_unknown_key_rejected(self):
        doc = {"playbook": {"id": "X", "trigger": {"condition": "errors.count >= 1"},
                            "confidence_threshold": 0.8, "safety_class": "standard",
                            "steps": [{"id": 1, "action": "log_state"}],
                            "bogus": 1}}
        with pytest.raises(SchemaError) as err:
            parse_playbook(doc)
        assert "bogus" in err.value.path

    def test_library_covers_taxonomy(self, library):
        assert OCPP_RECOVERY in library
        assert len(library) >= 8


class TestTriggerLanguage:
    def test_equality_and_conjunction(self):
        state = {"ocpp": {"websocket": {"state": "disconnected"}}, "errors": {"count": 2}}
        assert eval_condition("ocpp.websocket.state == disconnected", state)
        assert eval_condition(
            "ocpp.websocket.state == disconnected and errors.count >= 1", state
        )
        assert not eval_condition("ocpp.websocket.state != disconnected", state)

    def test_missing_path_is_false(self):
        assert not eval_condition("no.such.path == x", {})

    def test_unparseable_clause(self):
        with pytest.raises(SchemaError):
            eval_condition("gibberish", {})


class _FailAt:
    """Wrap a station so the n-th apply_action invocation fails."""

    def __init__(self, station, fail_at):
        self._station = station
        self._fail_at = fail_at
        self._calls = 0
        self._orig = station.apply_action
        station.apply_action = self._apply

    def _apply(self, action, params=None):
        self._calls += 1
        if self._calls == self._fail_at:
            return ActionResult(False, action, detail="injected failure")
        return self._orig(action, params)


class TestExecution:
    def test_full_run_resolves_comm_fault(self, ocpp_playbook):
        station = _station()
        station.inject_fault(_comm_fault())
        outcome = PlaybookExecutor().execute(ocpp_playbook, station)
        assert outcome.status is OutcomeStatus.SUCCESS
        assert outcome.verification_ok
        assert len(outcome.executed) == 8
        assert station.websocket_state == "connected"
        assert not station.error_codes

    @pytest.mark.parametrize("fail_at", list(range(1, 9)))
    def test_rollback_restores_checkpoint_for_every_failing_step(
        self, ocpp_playbook, fail_at
    ):
        pb = dataclasses.replace(
            ocpp_playbook,
            rollback=RollbackPolicy(max_retries=0, on_failure="rollback"),
        )
        station = _station()
        station.inject_fault(_comm_fault())
        before = station.observable_state()
        _FailAt(station, fail_at)
        outcome = PlaybookExecutor().execute(pb, station)
        assert outcome.status is OutcomeStatus.STEP_FAILURE
        assert outcome.failed_step.id == fail_at
        assert station.observable_state() == before

    def test_escalate_policy_leaves_partial_state(self, ocpp_playbook):
        station = _station()
        station.inject_fault(_comm_fault())
        before = station.observable_state()
        _FailAt(station, 6)  # fail the reconnect, after the cache clear ran
        outcome = PlaybookExecutor().execute(ocpp_playbook, station)
        assert outcome.status is OutcomeStatus.STEP_FAILURE
        assert station.observable_state() != before

    def test_timeout_restores_checkpoint(self, ocpp_playbook):
        station = _station()
        station.inject_fault(_comm_fault())
        before = station.observable_state()
        outcome = PlaybookExecutor().execute(ocpp_playbook, station, t_max_s=3.0)
        assert outcome.status is OutcomeStatus.TIMEOUT
        assert station.observable_state() == before

    def test_verification_failure_consumes_retries(self):
        pb = parse_playbook(
            {"playbook": {
                "id": "X-DIAG", "trigger": {"condition": "errors.count >= 1"},
                "confidence_threshold": 0.8, "safety_class": "standard",
                "steps": [{"id": 1, "action": "log_state"},
                          {"id": 2, "action": "wait", "params": {"duration": "1s"}}],
                "rollback": {"max_retries": 3},
            }}
        )
        station = _station()
        # hardware-only fault: every step succeeds but the error persists
        station.inject_fault(
            FaultScript(
                category=FaultCategory.AUTHORIZATION,
                error_codes=("LocalListConflict",),
                perturbation="noise",
            )
        )
        outcome = PlaybookExecutor().execute(pb, station)
        assert outcome.status is OutcomeStatus.VERIFICATION_FAILURE
        assert outcome.retries_used == 3

    def test_verify_resolution_checks_trigger(self, ocpp_playbook):
        station = _station()
        assert verify_resolution(station, ocpp_playbook)
        station.websocket_state = "disconnected"
        assert not verify_resolution(station, ocpp_playbook)


class TestSafety:
    def test_critical_rejected_with_exact_message(self):
        v = SafetyVerifier()
        result = v.verify("reset_protocol_state", "CS-1", {}, 0.0, safety_class="critical")
        assert not result.approved
        assert result.reasons == (CRITICAL_REJECT_MESSAGE,)

    def test_critical_component_rejected(self):
        v = SafetyVerifier()
        result = v.verify("adjust_config", "CS-1", {}, 0.0, component="hv_dc_contactor")
        assert not result.approved
        assert result.reasons == (CRITICAL_REJECT_MESSAGE,)

    def test_classification_table(self):
        assert classify_action("x", safety_class="critical") is ActionClass.CRITICAL
        assert classify_action("x", component="firmware") is ActionClass.ELEVATED
        assert classify_action("x", safety_class="elevated") is ActionClass.ELEVATED
        assert classify_action("x") is ActionClass.STANDARD

    def test_fourth_similar_action_in_window_rejected(self):
        v = SafetyVerifier()
        for t in (0.0, 100.0, 200.0):
            assert v.verify("retry_comm", "CS-1", {}, t).approved
            v.record("retry_comm", "CS-1", t)
        fourth = v.verify("retry_comm", "CS-1", {}, 299.0)
        assert not fourth.approved
        assert fourth.reasons == (RATE_LIMIT_MESSAGE,)

    def test_window_slides(self):
        v = SafetyVerifier()
        for t in (0.0, 1.0, 2.0):
            v.record("retry_comm", "CS-1", t)
        # the first entry has aged out at t=302
        assert v.verify("retry_comm", "CS-1", {}, 302.0).approved

    def test_rate_limit_scoped_per_station_and_action(self):
        v = SafetyVerifier()
        for t in (0.0, 1.0, 2.0):
            v.record("retry_comm", "CS-1", t)
        assert v.verify("retry_comm", "CS-2", {}, 3.0).approved
        assert v.verify("connect_websocket", "CS-1", {}, 3.0).approved

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.floats(0, 1000), max_size=30), st.floats(0, 300))
    def test_rate_limit_matches_window_count(self, times, gap):
        # clocks are monotone: history never post-dates the check
        now = max(times, default=0.0) + gap
        v = SafetyVerifier()
        for t in times:
            v.record("a", "s", t)
        in_window = sum(1 for t in times if now - t <= 300.0)
        assert v.verify("a", "s", {}, now).approved == (in_window < 3)

    def test_rule_violation_rejects_without_override(self):
        charging = SafetyRule(
            name="no_reset_while_charging",
            applies=lambda a, s: a == "reset_protocol_state",
            evaluate=lambda a, s: s.get("connector") != "Charging",
        )
        v = SafetyVerifier(rules=[charging])
        rej = v.verify("reset_protocol_state", "CS-1", {"connector": "Charging"}, 0.0)
        assert not rej.approved and rej.reasons == ("no_reset_while_charging",)
        ok = v.verify("reset_protocol_state", "CS-1", {"connector": "Available"}, 0.0)
        assert ok.approved

    def test_override_hook_converts_to_constraint(self):
        rule = SafetyRule("r", lambda a, s: True, lambda a, s: False)
        v = SafetyVerifier(rules=[rule], override_check=lambda names, s: True)
        result = v.verify("wait", "CS-1", {}, 0.0)
        assert result.approved
        assert result.constraints == ("r",)

    def test_recent_failures_window(self):
        v = SafetyVerifier()
        v.record("a", "CS-1", 0.0, outcome=False)
        v.record("a", "CS-1", 10.0, outcome=True)
        assert v.recent_failures("CS-1", 100.0) == 1
        assert v.recent_failures("CS-1", 25 * 3600.0) == 0
