"""Deterministic simulated charging fleet: stations with protocol-lite state
machines, fault injection, labeled-corpus generation, and offline-mode
operation."""

from aura.fleetsim.clock import SimClock
from aura.fleetsim.corpus import generate_corpus, telemetry_stream_for_incident
from aura.fleetsim.lru import LruCache
from aura.fleetsim.station import (
    ActionResult,
    FaultScript,
    Fleet,
    PreconditionViolated,
    SimStation,
    UnknownAction,
    run_offline,
)

__all__ = [
    "SimClock",
    "LruCache",
    "generate_corpus",
    "telemetry_stream_for_incident",
    "ActionResult",
    "FaultScript",
    "Fleet",
    "SimStation",
    "UnknownAction",
    "PreconditionViolated",
    "run_offline",
]
