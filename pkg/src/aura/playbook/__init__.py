"""Playbook parsing, checkpointed execution with rollback, and deterministic
safety verification with rate limiting."""

from aura.playbook.executor import (
    ExecutionOutcome,
    PlaybookExecutor,
    StepFailure,
    TimeoutError_,
    VerificationFailure,
)
from aura.playbook.library import PlaybookLibrary, default_library
from aura.playbook.model import Playbook, PlaybookStep, SchemaError, UnknownActionError, parse_playbook
from aura.playbook.safety import (
    ActionClass,
    Approve,
    Reject,
    SafetyVerifier,
    classify_action,
)

__all__ = [
    "ExecutionOutcome",
    "PlaybookExecutor",
    "StepFailure",
    "TimeoutError_",
    "VerificationFailure",
    "PlaybookLibrary",
    "default_library",
    "Playbook",
    "PlaybookStep",
    "SchemaError",
    "UnknownActionError",
    "parse_playbook",
    "ActionClass",
    "Approve",
    "Reject",
    "SafetyVerifier",
    "classify_action",
]
