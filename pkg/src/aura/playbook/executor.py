"""Checkpointed playbook execution with rollback.

A checkpoint is captured before the first step. Step failure with an
``on_failure: rollback`` policy, and any timeout, restore the station to the
checkpoint. Failed resolution verification consumes retries by re-executing
the whole playbook.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from aura.fleetsim.station import ActionResult, SimStation
from aura.playbook.model import Playbook, PlaybookStep, eval_condition


class OutcomeStatus(str, Enum):
    SUCCESS = "success"
    STEP_FAILURE = "step_failure"
    TIMEOUT = "timeout"
    VERIFICATION_FAILURE = "verification_failure"


class StepFailure(Exception):
    pass


class TimeoutError_(Exception):
    pass


class VerificationFailure(Exception):
    pass


@dataclass
class ExecutionOutcome:
    status: OutcomeStatus
    playbook_id: str
    executed: list[tuple[PlaybookStep, ActionResult]] = field(default_factory=list)
    failed_step: PlaybookStep | None = None
    retries_used: int = 0
    verification_ok: bool = False
    elapsed_s: float = 0.0

    @property
    def success(self) -> bool:
        return self.status is OutcomeStatus.SUCCESS


def station_state_view(station: SimStation) -> dict:
    """Dotted-path view of station state for trigger predicates."""
    return {
        "ocpp": {"websocket": {"state": station.websocket_state}},
        "connector": {"status": station.connector_status.value},
        "station": {"protocol_state": station.protocol_state},
        "errors": {"count": len(station.error_codes)},
    }


def verify_resolution(station: SimStation, playbook: Playbook) -> bool:
    """Resolved when the triggering condition no longer holds and the
    connector is out of the faulted state."""
    if station.error_codes:
        return False
    if station.connector_status.value == "Faulted":
        return False
    return not eval_condition(playbook.trigger.condition, station_state_view(station))


class PlaybookExecutor:
    """One executor per station at a time (callers hold per-station mutual
    exclusion); the simulated clock drives waits and timeouts."""

    def __init__(self, verify=verify_resolution):
        self._verify = verify

    def execute(
        self,
        playbook: Playbook,
        station: SimStation,
        t_max_s: float | None = None,
    ) -> ExecutionOutcome:
        t_max = playbook.max_execution_time_s if t_max_s is None else t_max_s
        retries_left = playbook.rollback.max_retries
        attempt = 0
        while True:
            outcome = self._execute_once(playbook, station, t_max)
            outcome.retries_used = attempt
            if outcome.status is OutcomeStatus.VERIFICATION_FAILURE and retries_left > 0:
                retries_left -= 1
                attempt += 1
                continue
            return outcome

    def _execute_once(self, playbook: Playbook, station: SimStation, t_max: float) -> ExecutionOutcome:
        checkpoint = station.capture_state()
        start_s = station.clock.now_s()
        executed: list[tuple[PlaybookStep, ActionResult]] = []

        def elapsed() -> float:
            return station.clock.now_s() - start_s

        for step in playbook.steps:
            if elapsed() > t_max:
                station.restore_state(checkpoint)
                return ExecutionOutcome(
                    status=OutcomeStatus.TIMEOUT,
                    playbook_id=playbook.id,
                    executed=executed,
                    failed_step=step,
                    elapsed_s=elapsed(),
                )
            result = station.apply_action(step.action, step.params)
            if result.ok and step.expect_response is not None:
                if result.response != step.expect_response:
                    result = ActionResult(
                        False,
                        step.action,
                        detail=f"expected response {step.expect_response!r}, got {result.response!r}",
                    )
            if not result.ok:
                if playbook.rollback.on_failure == "rollback":
                    station.restore_state(checkpoint)
                return ExecutionOutcome(
                    status=OutcomeStatus.STEP_FAILURE,
                    playbook_id=playbook.id,
                    executed=executed,
                    failed_step=step,
                    elapsed_s=elapsed(),
                )
            executed.append((step, result))
            if step.post_delay_s:
                station.clock.advance_s(step.post_delay_s)
        verification = self._verify(station, playbook)
        if not verification:
            return ExecutionOutcome(
                status=OutcomeStatus.VERIFICATION_FAILURE,
                playbook_id=playbook.id,
                executed=executed,
                verification_ok=False,
                elapsed_s=elapsed(),
            )
        return ExecutionOutcome(
            status=OutcomeStatus.SUCCESS,
            playbook_id=playbook.id,
            executed=executed,
            verification_ok=True,
            elapsed_s=elapsed(),
        )
