"""Labeled incident corpus generation.

Category frequencies follow the fleet-wide distribution; every incident
carries generator ground truth (category and the playbook that can resolve
it, or ``hardware_only``). Generation is fully deterministic under a seed
and serializes byte-identically.
"""

from __future__ import annotations

import zlib

import numpy as np

from aura.domain import (
    CATEGORY_DISTRIBUTION,
    ConnectorStandard,
    ErrorCode,
    FaultCategory,
    Incident,
    OcppVersion,
    PERSISTENT_FAULT_EVENTS,
    StationProfile,
    TelemetrySnapshot,
    default_taxonomy,
)
from aura.fleetsim.station import HARDWARE_ONLY, FaultScript

#: Software action that resolves faults of each category. Fault scripts and
#: the generic playbook library are generated from this same map so the
#: resolving playbook's key step actually clears the fault in simulation.
CATEGORY_RESOLVE_ACTION: dict[FaultCategory, str] = {
    FaultCategory.COMMUNICATION: "reinitialize_tls",
    FaultCategory.AUTHORIZATION: "clear_connection_cache",
    FaultCategory.POWER_ELECTRONICS: "reset_protocol_state",
    FaultCategory.FIRMWARE_SOFTWARE: "reset_protocol_state",
    FaultCategory.MECHANICAL: "reset_protocol_state",
    FaultCategory.PAYMENT_PROCESSING: "retry_comm",
    FaultCategory.GRID_INTEGRATION: "adjust_config",
    FaultCategory.OTHER: "reset_protocol_state",
}

_CATEGORY_PERTURBATION: dict[FaultCategory, str] = {
    FaultCategory.COMMUNICATION: "noise",
    FaultCategory.AUTHORIZATION: "noise",
    FaultCategory.POWER_ELECTRONICS: "spike",
    FaultCategory.FIRMWARE_SOFTWARE: "noise",
    FaultCategory.MECHANICAL: "ramp",
    FaultCategory.PAYMENT_PROCESSING: "noise",
    FaultCategory.GRID_INTEGRATION: "spike",
    FaultCategory.OTHER: "noise",
}

_EVENT_TEMPLATES: dict[FaultCategory, list[str]] = {
    FaultCategory.COMMUNICATION: ["HeartbeatTimeout", "WebSocketClosed", "ReconnectAttempt"],
    FaultCategory.AUTHORIZATION: ["AuthorizeRequest", "ReaderTimeout", "AuthorizeDenied"],
    FaultCategory.POWER_ELECTRONICS: ["MeterValues", "VoltageDeviation", "ContactorTrip"],
    FaultCategory.FIRMWARE_SOFTWARE: ["FirmwareStatusNotification", "Watchdog", "RebootLoop"],
    FaultCategory.MECHANICAL: ["ConnectorPlugIn", "LockActuate", "LockTimeout"],
    FaultCategory.PAYMENT_PROCESSING: ["PaymentInit", "GatewayTimeout", "PaymentAborted"],
    FaultCategory.GRID_INTEGRATION: ["LoadProfileUpdate", "FrequencyDeviation", "CurtailmentCmd"],
    FaultCategory.OTHER: ["StatusNotification", "InternalError"],
}

_STATION_MODELS = [
    ("ABB Terra 184", "2.4.1.2847", OcppVersion.V1_6J, ConnectorStandard.CCS2),
    ("Alpitronic HYC300", "1.9.2", OcppVersion.V2_0_1, ConnectorStandard.CCS2),
    ("Tritium PKM150", "3.1.0", OcppVersion.V1_6J, ConnectorStandard.CCS1),
    ("Kempower S-Series", "2.12.4", OcppVersion.V2_0_1, ConnectorStandard.CCS2),
    ("Delta City 200", "1.4.7", OcppVersion.V1_6J, ConnectorStandard.CHADEMO),
]


def codes_by_category(taxonomy: dict[str, ErrorCode] | None = None) -> dict[FaultCategory, list[ErrorCode]]:
    taxonomy = taxonomy or default_taxonomy()
    out: dict[FaultCategory, list[ErrorCode]] = {c: [] for c in FaultCategory}
    for code in sorted(taxonomy.values(), key=lambda e: e.code):
        if code.playbook_id is None:
            continue  # NoError carries no fault
        out[code.category].append(code)
    return out


_HARDWARE_EVENTS = sorted(PERSISTENT_FAULT_EVENTS, reverse=True)


def _telemetry_for(category: FaultCategory, rng, hardware: bool = False) -> TelemetrySnapshot:
    v = 400.0 + rng.normal(0, 0.8, size=3)
    current = 16.0 + rng.normal(0, 0.3)
    cab, conn = 35.0 + rng.normal(0, 0.5), 30.0 + rng.normal(0, 0.5)
    err_rate = abs(rng.normal(0, 0.05))
    if category is FaultCategory.COMMUNICATION:
        err_rate = 5.0 + rng.uniform(0, 7.0)
        current = 0.0
    elif category is FaultCategory.POWER_ELECTRONICS:
        v = v + rng.choice([-1, 1]) * rng.uniform(40, 80, size=3)
        current = 0.0
    elif category is FaultCategory.MECHANICAL:
        conn += rng.uniform(15, 35)
        current = 0.0
    elif category is FaultCategory.GRID_INTEGRATION:
        v = v - rng.uniform(15, 30, size=3)
    elif category is FaultCategory.FIRMWARE_SOFTWARE:
        current = 0.0
    elif category is FaultCategory.AUTHORIZATION:
        # sessions cannot start and the reader keeps retrying
        err_rate = 1.5 + rng.uniform(0, 1.5)
        current = 0.0
    elif category is FaultCategory.PAYMENT_PROCESSING:
        err_rate = 0.8 + rng.uniform(0, 1.0)
        current = 0.0
    elif category is FaultCategory.OTHER:
        current = 0.0
        cab += rng.uniform(8, 15)
    if hardware:
        # damaged components run hot and keep erroring regardless of category
        conn += rng.uniform(18, 30)
        err_rate += rng.uniform(1.0, 3.0)
    return TelemetrySnapshot(
        timestamp=int(rng.integers(1, 10**9)),
        voltage_l1=round(max(float(v[0]), 0.0), 2),
        voltage_l2=round(max(float(v[1]), 0.0), 2),
        voltage_l3=round(max(float(v[2]), 0.0), 2),
        current_total=round(max(float(current), 0.0), 2),
        temperature_cabinet=round(float(cab), 2),
        temperature_connector=round(float(conn), 2),
        comm_error_rate=round(float(err_rate), 2),
    )


def generate_corpus(
    n: int,
    seed: int,
    hardware_fraction: float = 0.2,
    taxonomy: dict[str, ErrorCode] | None = None,
) -> list[Incident]:
    """Generate ``n`` labeled incidents with category frequencies matching the
    fleet distribution."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    by_cat = codes_by_category(taxonomy)
    categories = list(CATEGORY_DISTRIBUTION.keys())
    probs = np.array([CATEGORY_DISTRIBUTION[c] for c in categories])
    incidents: list[Incident] = []
    for i in range(n):
        category = categories[int(rng.choice(len(categories), p=probs))]
        pool = by_cat[category]
        primary = pool[int(rng.integers(len(pool)))]
        codes = [primary]
        if rng.random() < 0.3 and len(pool) > 1:
            extra = pool[int(rng.integers(len(pool)))]
            if extra.code != primary.code:
                codes.append(extra)
        model, fw, ocpp, conn = _STATION_MODELS[int(rng.integers(len(_STATION_MODELS)))]
        station = StationProfile(
            station_id=f"ST-{int(rng.integers(1, 500)):04d}",
            model=model,
            firmware=fw,
            ocpp_version=ocpp,
            connector_standard=conn,
        )
        events = _EVENT_TEMPLATES[category]
        n_events = int(rng.integers(2, len(events) + 1))
        times = sorted(-float(t) for t in rng.integers(5, 600, size=n_events))
        recent = [(round(t, 1), events[j % len(events)]) for j, t in enumerate(times)]
        hardware = rng.random() < hardware_fraction or primary.playbook_id is None
        if hardware:
            recent += [(-4.0, _HARDWARE_EVENTS[0]), (-2.0, _HARDWARE_EVENTS[1])]
        incidents.append(
            Incident(
                id=f"INC-{seed}-{i:06d}",
                station=station,
                error_codes=tuple(codes),
                telemetry=_telemetry_for(category, rng, hardware),
                recent_events=tuple(recent),
                historical_incidents=int(rng.integers(0, 6)),
                ground_truth_category=category,
                resolvable_by=HARDWARE_ONLY if hardware else primary.playbook_id,
            )
        )
    return incidents


def fault_script_for_incident(incident: Incident) -> FaultScript:
    category = incident.ground_truth_category or incident.error_codes[0].category
    resolvable = incident.resolvable_by or HARDWARE_ONLY
    return FaultScript(
        category=category,
        error_codes=tuple(ec.code for ec in incident.error_codes),
        perturbation=_CATEGORY_PERTURBATION[category],
        resolvable_by=resolvable,
        cleared_by=None if resolvable == HARDWARE_ONLY else CATEGORY_RESOLVE_ACTION[category],
    )


def telemetry_stream_for_incident(incident: Incident, length: int = 120, seed: int = 0) -> np.ndarray:
    """A telemetry window whose tail reflects the incident's snapshot, for
    feeding the anomaly detector during corpus replay."""
    rng = np.random.default_rng(seed ^ zlib.crc32(incident.id.encode("utf-8")))
    base = np.array([400.0, 400.0, 400.0, 16.0, 35.0, 30.0, 0.0])
    noise = np.array([0.5, 0.5, 0.5, 0.2, 0.3, 0.3, 0.02])
    data = base + rng.normal(0, 1, size=(length, 7)) * noise
    snap = incident.telemetry
    target = np.array(
        [
            snap.voltage_l1,
            snap.voltage_l2,
            snap.voltage_l3,
            snap.current_total,
            snap.temperature_cabinet,
            snap.temperature_connector,
            snap.comm_error_rate,
        ]
    )
    tail = length // 3
    ramp = np.linspace(0, 1, tail)[:, None]
    data[-tail:] = data[-tail:] * (1 - ramp) + (target + rng.normal(0, 0.2, size=(tail, 7))) * ramp
    return np.round(np.abs(data), 2)
