"""Deterministic safety verification with rate limiting.

Critical actions are rejected outright; rule violations without an override
reject; more than the rate limit of similar actions (same action name and
station) inside a 300 s sliding window rejects. Approve/Reject are values,
not exceptions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

CRITICAL_REJECT_MESSAGE = "Safety-critical actions require human approval"
RATE_LIMIT_MESSAGE = "Rate limit exceeded for action type"

RATE_LIMIT_WINDOW_S = 300.0
RATE_LIMIT_COUNT = 3


class ActionClass(str, Enum):
    CRITICAL = "critical"
    ELEVATED = "elevated"
    STANDARD = "standard"


#: Component tags whose actions are never executed autonomously.
CRITICAL_COMPONENTS = frozenset(
    {
        "hv_dc_contactor",
        "grid_protection_relay",
        "emergency_stop",
        "safety_firmware",
        "certificate_infrastructure",
    }
)

#: Firmware updates classify elevated (with mandatory dual-bank rollback).
ELEVATED_COMPONENTS = frozenset({"firmware", "grid_interface"})


def classify_action(
    action: str,
    component: str | None = None,
    safety_class: str | None = None,
) -> ActionClass:
    if safety_class in ("critical",):
        return ActionClass.CRITICAL
    if component in CRITICAL_COMPONENTS:
        return ActionClass.CRITICAL
    if safety_class == "elevated" or component in ELEVATED_COMPONENTS:
        return ActionClass.ELEVATED
    return ActionClass.STANDARD


@dataclass(frozen=True)
class Approve:
    action: str
    constraints: tuple[str, ...] = ()

    @property
    def approved(self) -> bool:
        return True


@dataclass(frozen=True)
class Reject:
    action: str
    reasons: tuple[str, ...]

    @property
    def approved(self) -> bool:
        return False


@dataclass(frozen=True)
class SafetyRule:
    """A named predicate over (action, station state)."""

    name: str
    applies: object  # callable(action, state) -> bool
    evaluate: object  # callable(action, state) -> bool, True = passed


@dataclass
class ActionHistoryEntry:
    action: str
    station_id: str
    at_s: float
    outcome: bool | None = None  # None while in flight


class SafetyVerifier:
    """Shares one append-only action history with the executor (single
    writer). Override conditions default to "no overrides"; a hook can be
    installed via ``override_check``."""

    def __init__(
        self,
        rules: list[SafetyRule] | None = None,
        rate_limit: int = RATE_LIMIT_COUNT,
        window_s: float = RATE_LIMIT_WINDOW_S,
        override_check=None,
    ):
        self.rules = list(rules or [])
        self.rate_limit = rate_limit
        self.window_s = window_s
        self.override_check = override_check
        self.history: list[ActionHistoryEntry] = []

    def record(self, action: str, station_id: str, at_s: float, outcome: bool | None = None) -> None:
        self.history.append(ActionHistoryEntry(action, station_id, at_s, outcome))

    def _count_similar(self, action: str, station_id: str, now_s: float) -> int:
        return sum(
            1
            for e in self.history
            if e.action == action
            and e.station_id == station_id
            and now_s - e.at_s <= self.window_s
        )

    def verify(
        self,
        action: str,
        station_id: str,
        station_state: dict,
        now_s: float,
        component: str | None = None,
        safety_class: str | None = None,
    ) -> Approve | Reject:
        klass = classify_action(action, component, safety_class)
        if klass is ActionClass.CRITICAL:
            return Reject(action, (CRITICAL_REJECT_MESSAGE,))
        violations = []
        for rule in self.rules:
            if rule.applies(action, station_state) and not rule.evaluate(action, station_state):
                violations.append(rule.name)
        if violations:
            allowed = bool(self.override_check and self.override_check(violations, station_state))
            if not allowed:
                return Reject(action, tuple(violations))
        if self._count_similar(action, station_id, now_s) >= self.rate_limit:
            return Reject(action, (RATE_LIMIT_MESSAGE,))
        return Approve(action, constraints=tuple(violations))

    def recent_failures(self, station_id: str, now_s: float, window_s: float = 24 * 3600.0) -> int:
        return sum(
            1
            for e in self.history
            if e.station_id == station_id
            and e.outcome is False
            and now_s - e.at_s <= window_s
        )
