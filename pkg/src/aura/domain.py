"""Core vocabulary for the engine: stations, telemetry, incidents, the error
taxonomy, and the closed-form protocol math (availability product, control-loop
delay, IEC 61851 pilot duty-cycle current).

All types are immutable after construction and the operations are pure, so
everything here is safe to share freely across threads.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path


class OcppVersion(str, Enum):
    V1_6J = "1.6J"
    V2_0_1 = "2.0.1"


class ConnectorStandard(str, Enum):
    CCS1 = "CCS1"
    CCS2 = "CCS2"
    CHADEMO = "CHAdeMO"
    NACS = "NACS"
    AC_TYPE2 = "AC_Type2"


class FaultCategory(str, Enum):
    """Incident categories with their fleet-wide base rates."""

    COMMUNICATION = "communication"
    AUTHORIZATION = "authorization"
    POWER_ELECTRONICS = "power_electronics"
    FIRMWARE_SOFTWARE = "firmware_software"
    MECHANICAL = "mechanical"
    PAYMENT_PROCESSING = "payment_processing"
    GRID_INTEGRATION = "grid_integration"
    OTHER = "other"


#: Event names meaning automated remediation was already attempted and the
#: fault came back — the telltale of damage needing physical service.
PERSISTENT_FAULT_EVENTS = frozenset({"ResetNoEffect", "PersistentFaultAfterReboot"})

#: Expected fraction of incidents per category in a representative fleet.
CATEGORY_DISTRIBUTION: dict[FaultCategory, float] = {
    FaultCategory.COMMUNICATION: 0.30,
    FaultCategory.AUTHORIZATION: 0.18,
    FaultCategory.POWER_ELECTRONICS: 0.15,
    FaultCategory.FIRMWARE_SOFTWARE: 0.13,
    FaultCategory.MECHANICAL: 0.10,
    FaultCategory.PAYMENT_PROCESSING: 0.08,
    FaultCategory.GRID_INTEGRATION: 0.04,
    FaultCategory.OTHER: 0.02,
}


class Criticality(str, Enum):
    CRITICAL = "CRITICAL"
    ELEVATED = "ELEVATED"
    STANDARD = "STANDARD"


class DomainError(Exception):
    """Base class for domain-level failures."""


class OutOfRange(DomainError):
    pass


class ParseError(DomainError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class DuplicateCode(DomainError):
    pass


_SEMVER_RE = re.compile(r"^\d+(\.\d+)+$")


@dataclass(frozen=True)
class StationProfile:
    station_id: str
    model: str
    firmware: str
    ocpp_version: OcppVersion
    connector_standard: ConnectorStandard

    def __post_init__(self):
        if not _SEMVER_RE.match(self.firmware):
            raise DomainError(f"firmware {self.firmware!r} is not a dotted version")


@dataclass(frozen=True)
class TelemetrySnapshot:
    timestamp: int  # monotonic milliseconds
    voltage_l1: float
    voltage_l2: float
    voltage_l3: float
    current_total: float
    temperature_cabinet: float
    temperature_connector: float
    comm_error_rate: float = 0.0

    def __post_init__(self):
        for v in (self.voltage_l1, self.voltage_l2, self.voltage_l3):
            if v < 0:
                raise DomainError(f"negative voltage {v}")
        for t in (self.temperature_cabinet, self.temperature_connector):
            if not -60.0 <= t <= 200.0:
                raise DomainError(f"temperature {t} outside [-60, 200]")


@dataclass(frozen=True)
class ErrorCode:
    code: str
    category: FaultCategory
    playbook_id: str | None = None
    criticality: Criticality = Criticality.STANDARD
    group: str = ""
    synthetic: bool = False


@dataclass(frozen=True)
class Incident:
    id: str
    station: StationProfile
    error_codes: tuple[ErrorCode, ...]
    telemetry: TelemetrySnapshot
    recent_events: tuple[tuple[float, str], ...] = ()
    historical_incidents: int = 0
    ground_truth_category: FaultCategory | None = None
    resolvable_by: str | None = None

    def __post_init__(self):
        if not self.error_codes:
            raise DomainError("incident requires at least one error code")
        times = [t for t, _ in self.recent_events]
        if times != sorted(times):
            raise DomainError("recent_events must be sorted by relative time")


@dataclass(frozen=True)
class AvailabilityModel:
    a_cloud: float
    a_network: float
    a_edge: float

    def __post_init__(self):
        for a in (self.a_cloud, self.a_network, self.a_edge):
            if not 0.0 < a <= 1.0:
                raise DomainError(f"availability {a} outside (0, 1]")


@dataclass(frozen=True)
class LoopDelay:
    tau_sense: float
    tau_process: float
    tau_comm: float
    tau_actuate: float

    def __post_init__(self):
        for tau in (self.tau_sense, self.tau_process, self.tau_comm, self.tau_actuate):
            if tau < 0:
                raise DomainError(f"negative delay {tau}")


def system_availability(m: AvailabilityModel) -> float:
    """Serial availability of the cloud + network + edge chain."""
    return m.a_cloud * m.a_network * m.a_edge


def loop_delay_total(d: LoopDelay) -> float:
    """End-to-end control-loop delay: sense + process + communicate + actuate."""
    return d.tau_sense + d.tau_process + d.tau_comm + d.tau_actuate


def pilot_available_current(duty_cycle_pct: float) -> float:
    """Available charging current (A) encoded by the control-pilot PWM duty cycle.

    Two ranges: D * 0.6 A up to 85% (51 A), then (D - 64) * 2.5 A up to 96%
    (80 A for high-power AC). Duty cycles at or below 10% or above 96% do not
    encode a current and indicate an invalid CP signal.
    """
    d = duty_cycle_pct
    if not 10.0 < d <= 96.0:
        raise OutOfRange(f"duty cycle {d}% outside valid signalling range (10, 96]")
    if d <= 85.0:
        return d * 0.6
    return (d - 64.0) * 2.5


# --- Error taxonomy ---------------------------------------------------------

_ENTRY_RE = re.compile(
    r"^- (?P<code>[A-Za-z0-9_]+) -> (?P<playbook>[A-Z0-9-]+|NULL)"
    r"(?: \[(?P<crit>[A-Z]+)\])?(?: \[(?P<flags>[a-z]+)\])?$"
)

#: Playbook-id prefix to incident category. Entries without a recognized
#: prefix fall back to OTHER.
_PREFIX_CATEGORY: dict[str, FaultCategory] = {
    "DIAG-COMM": FaultCategory.COMMUNICATION,
    "DIAG-AUTH": FaultCategory.AUTHORIZATION,
    "DIAG-POWER": FaultCategory.POWER_ELECTRONICS,
    "DIAG-METER": FaultCategory.POWER_ELECTRONICS,
    "DIAG-THERM": FaultCategory.POWER_ELECTRONICS,
    "DIAG-FW": FaultCategory.FIRMWARE_SOFTWARE,
    "DIAG-MECH": FaultCategory.MECHANICAL,
    "DIAG-PAY": FaultCategory.PAYMENT_PROCESSING,
    "DIAG-GRID": FaultCategory.GRID_INTEGRATION,
    "DIAG-SAFETY": FaultCategory.OTHER,
    "DIAG-GEN": FaultCategory.OTHER,
}


def _category_for_playbook(playbook_id: str | None) -> FaultCategory:
    if playbook_id is None:
        return FaultCategory.OTHER
    for prefix, cat in _PREFIX_CATEGORY.items():
        if playbook_id.startswith(prefix):
            return cat
    return FaultCategory.OTHER


def load_error_taxonomy(source: str) -> dict[str, ErrorCode]:
    """Parse the indented-arrow taxonomy text into a code -> ErrorCode map.

    Format::

        Namespace:
          GroupName:
            - Code -> PLAYBOOK-ID [CRITICAL] [synthetic]
            - NoError -> NULL

    ``NULL`` targets map to no playbook. Criticality defaults to STANDARD;
    an ``[ELEVATED]`` or ``[CRITICAL]`` marker overrides it. A trailing
    ``[synthetic]`` flag marks entries added to cover categories the source
    excerpt does not.
    """
    out: dict[str, ErrorCode] = {}
    group = ""
    for lineno, raw in enumerate(source.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.endswith(":"):
            # namespace (no indent) or group (indented); only groups matter
            if raw.startswith((" ", "\t")):
                group = line[:-1]
            continue
        m = _ENTRY_RE.match(line)
        if not m:
            raise ParseError(f"unrecognized taxonomy entry {line!r}", lineno)
        code = m.group("code")
        if code in out:
            raise DuplicateCode(code)
        playbook = None if m.group("playbook") == "NULL" else m.group("playbook")
        crit = Criticality(m.group("crit")) if m.group("crit") else Criticality.STANDARD
        out[code] = ErrorCode(
            code=code,
            category=_category_for_playbook(playbook),
            playbook_id=playbook,
            criticality=crit,
            group=group,
            synthetic=m.group("flags") == "synthetic",
        )
    return out


def serialize_error_taxonomy(taxonomy: dict[str, ErrorCode]) -> str:
    """Inverse of :func:`load_error_taxonomy` (round-trips to an equal map)."""
    groups: dict[str, list[ErrorCode]] = {}
    for ec in taxonomy.values():
        groups.setdefault(ec.group, []).append(ec)
    lines = ["Taxonomy:"]
    for group in sorted(groups):
        lines.append(f"  {group}:")
        for ec in sorted(groups[group], key=lambda e: e.code):
            target = ec.playbook_id or "NULL"
            entry = f"    - {ec.code} -> {target}"
            if ec.criticality is not Criticality.STANDARD:
                entry += f" [{ec.criticality.value}]"
            if ec.synthetic:
                entry += " [synthetic]"
            lines.append(entry)
    return "\n".join(lines) + "\n"


def default_taxonomy() -> dict[str, ErrorCode]:
    """The taxonomy shipped with the package (source excerpt + synthetic rows)."""
    path = Path(__file__).parent / "data" / "taxonomy.txt"
    return load_error_taxonomy(path.read_text())


# --- Incident JSON interchange ---------------------------------------------

def incident_to_json(incident: Incident, taxonomy: dict[str, ErrorCode] | None = None) -> dict:
    """Render an incident in the corpus-interchange JSON shape."""
    doc = {
        "id": incident.id,
        "context": {
            "station": {
                "station_id": incident.station.station_id,
                "model": incident.station.model,
                "firmware": incident.station.firmware,
                "ocpp_version": incident.station.ocpp_version.value,
                "connector_standard": incident.station.connector_standard.value,
            },
            "error_codes": [ec.code for ec in incident.error_codes],
            "telemetry_snapshot": {
                "timestamp": incident.telemetry.timestamp,
                "voltage_l1": incident.telemetry.voltage_l1,
                "voltage_l2": incident.telemetry.voltage_l2,
                "voltage_l3": incident.telemetry.voltage_l3,
                "current_total": incident.telemetry.current_total,
                "temperature_cabinet": incident.telemetry.temperature_cabinet,
                "temperature_connector": incident.telemetry.temperature_connector,
                "comm_error_rate": incident.telemetry.comm_error_rate,
            },
            "recent_events": [
                {"t": t, "event": event} for t, event in incident.recent_events
            ],
            "historical_incidents": incident.historical_incidents,
        },
    }
    if incident.ground_truth_category is not None:
        doc["ground_truth_category"] = incident.ground_truth_category.value
    if incident.resolvable_by is not None:
        doc["resolvable_by"] = incident.resolvable_by
    return doc


def incident_from_json(doc: dict, taxonomy: dict[str, ErrorCode]) -> Incident:
    ctx = doc["context"]
    st = ctx["station"]
    tele = ctx["telemetry_snapshot"]
    codes = []
    for code in ctx["error_codes"]:
        bare = code.split(":", 1)[-1]
        if bare in taxonomy:
            codes.append(taxonomy[bare])
        else:
            codes.append(ErrorCode(code=bare, category=FaultCategory.OTHER))
    return Incident(
        id=doc["id"],
        station=StationProfile(
            station_id=st.get("station_id", st["model"]),
            model=st["model"],
            firmware=st["firmware"],
            ocpp_version=OcppVersion(st["ocpp_version"]),
            connector_standard=ConnectorStandard(st.get("connector_standard", "CCS2")),
        ),
        error_codes=tuple(codes),
        telemetry=TelemetrySnapshot(
            timestamp=tele.get("timestamp", 0),
            voltage_l1=tele["voltage_l1"],
            voltage_l2=tele["voltage_l2"],
            voltage_l3=tele["voltage_l3"],
            current_total=tele["current_total"],
            temperature_cabinet=tele["temperature_cabinet"],
            temperature_connector=tele["temperature_connector"],
            comm_error_rate=tele.get("comm_error_rate", 0.0),
        ),
        recent_events=tuple((e["t"], e["event"]) for e in ctx.get("recent_events", [])),
        historical_incidents=ctx.get("historical_incidents", 0),
        ground_truth_category=(
            FaultCategory(doc["ground_truth_category"])
            if "ground_truth_category" in doc
            else None
        ),
        resolvable_by=doc.get("resolvable_by"),
    )


def dump_incident_jsonl(incidents: list[Incident]) -> str:
    """Canonical (sorted-key) JSON-lines rendering, byte-stable under a fixed seed."""
    return "".join(
        json.dumps(incident_to_json(i), sort_keys=True, separators=(",", ":")) + "\n"
        for i in incidents
    )


def load_incident_jsonl(text: str, taxonomy: dict[str, ErrorCode]) -> list[Incident]:
    return [
        incident_from_json(json.loads(line), taxonomy)
        for line in text.splitlines()
        if line.strip()
    ]
