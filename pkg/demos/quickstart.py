"""Walk a handful of synthetic incidents through the full resolution engine.

Builds the standard pipeline (anomaly detector, retrieval knowledge base,
reference diagnoser, calibrated confidence model), replays incidents against
simulated stations, and prints what the engine decided for each one —
including one record pulled off the approval queue and approved by hand.

Run:  python3 demos/quickstart.py
"""

from aura.fleetsim.corpus import (
    fault_script_for_incident,
    generate_corpus,
    telemetry_stream_for_incident,
)
from aura.fleetsim.station import SimStation
from aura.service.config import EngineConfig
from aura.service.evaluate import build_pipeline


def main():
    config = EngineConfig()
    print("Building pipeline (training detector, diagnoser, confidence model)...")
    pipe = build_pipeline(config)
    print(f"  temperature T* = {pipe.temperature:.3f}")
    print(f"  ECE before/after calibration = {pipe.ece_before:.4f} / {pipe.ece_after:.4f}")
    print(f"  selected autonomous threshold theta = {pipe.theta:.2f}")
    print()

    incidents = generate_corpus(60, seed=7)
    tiers = {}
    for n, inc in enumerate(incidents):
        station = SimStation(inc.station, clock=pipe.clock)
        station.inject_fault(fault_script_for_incident(inc))
        stream = telemetry_stream_for_incident(inc, seed=config.seed)
        record = pipe.engine.tick(station, stream, incident=inc)
        if record is None:
            tiers["(not flagged)"] = tiers.get("(not flagged)", 0) + 1
            continue
        tiers[record.tier.name] = tiers.get(record.tier.name, 0) + 1
        if record.tier.name in ("RECOMMEND", "ESCALATE") or n < 10:
            category = record.diagnosis.category.value if record.diagnosis else "?"
            print(
                f"{inc.id}: {category:20s} conf={record.confidence:.3f} "
                f"tier={record.tier.name:15s} action={record.action_taken or 'pending'}"
            )

    print("\ntier breakdown over 60 incidents:")
    for name, count in sorted(tiers.items(), key=lambda kv: -kv[1]):
        print(f"  {name:16s} {count}")

    pending = pipe.engine.queue.pending()
    print(f"\n{len(pending)} record(s) waiting for operator approval")
    if pending:
        rec = pending[0]
        print(f"Approving {rec.record_id} ({rec.incident_id}) as demo-operator...")
        done = pipe.engine.resolve_approval(rec.record_id, "approve", "demo-operator")
        print(f"  action_taken={done.action_taken} outcome_ok={done.outcome_ok}")
        print("  reasoning trail:")
        for line in done.trail:
            print(f"    - {line}")


if __name__ == "__main__":
    main()
