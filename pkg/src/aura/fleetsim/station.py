"""Protocol-lite station state machines with scripted fault injection.

Only the behavior remediation playbooks touch is modeled: websocket
connect/disconnect, a handful of protocol messages over an in-process bus,
connector status, config, and the local authorization cache. Everything is
deterministic given (seed, fault script, action sequence).
"""

from __future__ import annotations

import copy
import re
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from aura.domain import FaultCategory, StationProfile
from aura.fleetsim.clock import SimClock
from aura.fleetsim.lru import LruCache


class ConnectorStatus(str, Enum):
    AVAILABLE = "Available"
    PREPARING = "Preparing"
    CHARGING = "Charging"
    FINISHING = "Finishing"
    FAULTED = "Faulted"
    UNAVAILABLE = "Unavailable"


class SimError(Exception):
    pass


class UnknownAction(SimError):
    pass


class PreconditionViolated(SimError):
    pass


#: Closed action vocabulary understood by the simulator.
ACTION_VOCABULARY = frozenset(
    {
        "log_state",
        "close_websocket",
        "clear_connection_cache",
        "wait",
        "reinitialize_tls",
        "connect_websocket",
        "send_message",
        "verify_status",
        "reset_protocol_state",
        "adjust_config",
        "retry_comm",
    }
)

HARDWARE_ONLY = "hardware_only"

_DURATION_RE = re.compile(r"^(\d+(?:\.\d+)?)\s*(ms|s|m|h)?$")


def parse_duration_s(value) -> float:
    """Parse '5s', '300s', '2m', 60, '>= 60s' style durations to seconds."""
    if isinstance(value, (int, float)):
        return float(value)
    text = str(value).strip().lstrip(">=< ").strip()
    m = _DURATION_RE.match(text)
    if not m:
        raise SimError(f"cannot parse duration {value!r}")
    n = float(m.group(1))
    unit = m.group(2) or "s"
    return n * {"ms": 0.001, "s": 1.0, "m": 60.0, "h": 3600.0}[unit]


@dataclass(frozen=True)
class FaultScript:
    category: FaultCategory
    error_codes: tuple[str, ...]
    perturbation: str = "noise"  # spike | ramp | noise
    resolvable_by: str = HARDWARE_ONLY  # playbook id or "hardware_only"
    cleared_by: str | None = None  # action that clears the fault (software faults)

    @property
    def hardware_only(self) -> bool:
        return self.resolvable_by == HARDWARE_ONLY


@dataclass
class ActionResult:
    ok: bool
    action: str
    detail: str = ""
    response: str | None = None


@dataclass
class Session:
    id: str
    token: str
    start_ms: int
    meter_wh: float = 0.0
    stop_ms: int | None = None
    state: str = "active"  # active | completed | aborted
    synced: bool = False


class SimStation:
    def __init__(
        self,
        profile: StationProfile,
        clock: SimClock | None = None,
        cache_capacity: int = 25000,
        seed: int = 0,
    ):
        self.profile = profile
        self.clock = clock or SimClock()
        self.seed = seed
        self.connector_status = ConnectorStatus.AVAILABLE
        self.websocket_state = "connected"
        self.config: dict = {"ocpp.central_system_url": "ws://cloud.local/ocpp"}
        self.auth_cache = LruCache(cache_capacity)
        self.connection_cache_dirty = False
        self.tls_ok = True
        self.protocol_state = "idle"
        self.error_codes: list[str] = []
        self.fault: FaultScript | None = None
        self.fault_cleared = False
        self.sessions: list[Session] = []
        self._session_counter = 0

    # --- state snapshot ----------------------------------------------------

    def capture_state(self) -> dict:
        """Deep snapshot of mutable station state plus the capture time."""
        return {
            "connector_status": self.connector_status,
            "websocket_state": self.websocket_state,
            "config": copy.deepcopy(self.config),
            "auth_cache": self.auth_cache.snapshot(),
            "connection_cache_dirty": self.connection_cache_dirty,
            "tls_ok": self.tls_ok,
            "protocol_state": self.protocol_state,
            "error_codes": list(self.error_codes),
            "fault": self.fault,
            "fault_cleared": self.fault_cleared,
            "captured_at_ms": self.clock.now_ms(),
        }

    def restore_state(self, checkpoint: dict) -> None:
        self.connector_status = checkpoint["connector_status"]
        self.websocket_state = checkpoint["websocket_state"]
        self.config = copy.deepcopy(checkpoint["config"])
        self.auth_cache.restore(checkpoint["auth_cache"])
        self.connection_cache_dirty = checkpoint["connection_cache_dirty"]
        self.tls_ok = checkpoint["tls_ok"]
        self.protocol_state = checkpoint["protocol_state"]
        self.error_codes = list(checkpoint["error_codes"])
        self.fault = checkpoint["fault"]
        self.fault_cleared = checkpoint["fault_cleared"]

    def observable_state(self) -> dict:
        """State under the simulator's equality (capture time excluded)."""
        snap = self.capture_state()
        snap.pop("captured_at_ms")
        return snap

    # --- faults ------------------------------------------------------------

    def inject_fault(self, script: FaultScript) -> None:
        self.fault = script
        self.fault_cleared = False
        self.error_codes = list(script.error_codes)
        self.connector_status = ConnectorStatus.FAULTED
        if script.category is FaultCategory.COMMUNICATION:
            self.websocket_state = "disconnected"

    def _fault_active(self) -> bool:
        return self.fault is not None and not self.fault_cleared

    def _clear_fault(self) -> None:
        self.fault_cleared = True
        self.error_codes = []
        self.connector_status = ConnectorStatus.AVAILABLE

    # --- actions -----------------------------------------------------------

    def apply_action(self, action: str, params: dict | None = None) -> ActionResult:
        params = params or {}
        if action not in ACTION_VOCABULARY:
            raise UnknownAction(action)
        handler = getattr(self, f"_do_{action}")
        result = handler(params)
        # a software-resolvable fault clears once its resolving action ran
        if (
            self._fault_active()
            and not self.fault.hardware_only
            and self.fault.cleared_by == action
            and result.ok
        ):
            self._clear_fault()
        return result

    def _do_log_state(self, params) -> ActionResult:
        return ActionResult(True, "log_state", detail=str(self.observable_state()))

    def _do_close_websocket(self, params) -> ActionResult:
        self.websocket_state = "disconnected"
        return ActionResult(True, "close_websocket")

    def _do_clear_connection_cache(self, params) -> ActionResult:
        self.connection_cache_dirty = False
        return ActionResult(True, "clear_connection_cache")

    def _do_wait(self, params) -> ActionResult:
        self.clock.advance_s(parse_duration_s(params.get("duration", "1s")))
        return ActionResult(True, "wait")

    def _do_reinitialize_tls(self, params) -> ActionResult:
        self.tls_ok = True
        return ActionResult(True, "reinitialize_tls")

    def _do_connect_websocket(self, params) -> ActionResult:
        if self._fault_active() and self.fault.category is FaultCategory.COMMUNICATION:
            return ActionResult(False, "connect_websocket", detail="connection refused")
        self.websocket_state = "connected"
        return ActionResult(True, "connect_websocket")

    def _do_send_message(self, params) -> ActionResult:
        if self.websocket_state != "connected":
            return ActionResult(False, "send_message", detail="websocket not connected")
        msg_type = params.get("type", "Heartbeat")
        return ActionResult(True, "send_message", response="Accepted", detail=msg_type)

    def _do_verify_status(self, params) -> ActionResult:
        expected = params.get("expected", ConnectorStatus.AVAILABLE.value)
        ok = self.connector_status.value == expected
        return ActionResult(ok, "verify_status", detail=self.connector_status.value)

    def _do_reset_protocol_state(self, params) -> ActionResult:
        self.protocol_state = "idle"
        return ActionResult(True, "reset_protocol_state")

    def _do_adjust_config(self, params) -> ActionResult:
        for key, value in params.get("set", {}).items():
            self.config[key] = value
        return ActionResult(True, "adjust_config")

    def _do_retry_comm(self, params) -> ActionResult:
        if self._fault_active() and self.fault.category is FaultCategory.COMMUNICATION:
            # a retry is the resolving action for some comm faults; cleared in
            # apply_action when cleared_by matches, otherwise it fails
            if self.fault.cleared_by != "retry_comm" or self.fault.hardware_only:
                return ActionResult(False, "retry_comm", detail="still unreachable")
        return ActionResult(True, "retry_comm")

    # --- sessions ----------------------------------------------------------

    def authorize(self, token: str, online: bool, fallback: str = "deny") -> bool:
        if online:
            return True  # cloud accepts anything the fleet whitelisted upstream
        if token in self.auth_cache:
            return bool(self.auth_cache.get(token))
        return fallback == "allow"

    def start_session(self, token: str, online: bool, fallback: str = "deny") -> Session | None:
        if any(s.state == "active" for s in self.sessions):
            raise PreconditionViolated("connector already has an active session")
        if not self.authorize(token, online, fallback):
            return None
        self._session_counter += 1
        session = Session(
            id=f"{self.profile.station_id}-s{self._session_counter}",
            token=token,
            start_ms=self.clock.now_ms(),
        )
        self.sessions.append(session)
        self.connector_status = ConnectorStatus.CHARGING
        return session

    def stop_session(self, session: Session, energy_wh: float) -> None:
        session.meter_wh = energy_wh
        session.stop_ms = self.clock.now_ms()
        session.state = "completed"
        if self.connector_status is ConnectorStatus.CHARGING:
            self.connector_status = ConnectorStatus.AVAILABLE

    # --- telemetry ---------------------------------------------------------

    def telemetry_matrix(self, n: int, seed: int | None = None) -> np.ndarray:
        """n samples of the 7 monitored channels; the active fault's
        perturbation shapes the tail."""
        rng = np.random.default_rng(self.seed if seed is None else seed)
        base = np.array([400.0, 400.0, 400.0, 16.0, 35.0, 30.0, 0.0])
        noise = np.array([0.5, 0.5, 0.5, 0.2, 0.3, 0.3, 0.02])
        data = base + rng.normal(0, 1, size=(n, 7)) * noise
        if self._fault_active():
            data = _perturb(data, self.fault, rng)
        return np.round(np.abs(data), 2)


def _perturb(data: np.ndarray, fault: FaultScript, rng) -> np.ndarray:
    n = data.shape[0]
    tail = slice(max(n - n // 3, 0), n)
    if fault.perturbation == "spike":
        data[tail, 0:3] *= 1.25
        data[tail, 5] += 40.0
    elif fault.perturbation == "ramp":
        ramp = np.linspace(0, 30.0, n - tail.start)
        data[tail, 4] += ramp
        data[tail, 5] += ramp
    else:  # noise: communication-style errors
        data[tail, 6] += rng.uniform(5.0, 12.0, size=n - tail.start)
        data[tail, 3] *= 0.1
    return data


class Fleet:
    """Stations sharing one simulated clock; mutation only via tick/actions."""

    def __init__(self, clock: SimClock | None = None, seed: int = 0):
        self.clock = clock or SimClock()
        self.seed = seed
        self.stations: dict[str, SimStation] = {}
        self.cloud_online = True
        self.auth_fallback = "deny"

    def add_station(self, station: SimStation) -> None:
        station.clock = self.clock
        self.stations[station.profile.station_id] = station

    def tick(self, ms: int = 1000) -> None:
        self.clock.advance_ms(ms)

    def session_counts(self) -> dict[str, int]:
        counts = {"started": 0, "completed": 0, "active": 0, "aborted": 0}
        for st in self.stations.values():
            for s in st.sessions:
                counts["started"] += 1
                counts[s.state] += 1
        return counts


@dataclass
class OfflineReport:
    duration_hours: float
    sessions_started: int = 0
    sessions_authorized: int = 0
    sessions_rejected: int = 0
    sessions_persisted: int = 0
    pending_sync: list[str] = field(default_factory=list)


def run_offline(
    fleet: Fleet,
    duration_hours: float,
    wal,
    arrivals_per_hour: float = 1.0,
    seed: int = 7,
) -> OfflineReport:
    """Sever the cloud link and run sessions against local caches, persisting
    every completed session to the WAL store."""
    fleet.cloud_online = False
    rng = np.random.default_rng(seed)
    report = OfflineReport(duration_hours=duration_hours)
    stations = list(fleet.stations.values())
    steps = int(duration_hours)
    for _ in range(max(steps, 1)):
        for station in stations:
            if rng.random() > arrivals_per_hour / 1.0:
                continue
            cached = list(station.auth_cache.snapshot().keys())
            use_cached = cached and rng.random() < 0.9
            token = cached[int(rng.integers(len(cached)))] if use_cached else f"UNKNOWN-{rng.integers(1e6)}"
            report.sessions_started += 1
            session = station.start_session(token, online=False, fallback=fleet.auth_fallback)
            if session is None:
                report.sessions_rejected += 1
                continue
            report.sessions_authorized += 1
            fleet.tick(30 * 60 * 1000)
            station.stop_session(session, energy_wh=float(rng.integers(5000, 40000)))
            wal.persist(
                {
                    "id": session.id,
                    "station_id": station.profile.station_id,
                    "token": session.token,
                    "start_ms": session.start_ms,
                    "stop_ms": session.stop_ms,
                    "meter_wh": session.meter_wh,
                }
            )
            report.sessions_persisted += 1
        fleet.tick(30 * 60 * 1000)
    report.pending_sync = [r["id"] for r in wal.recover()]
    return report
