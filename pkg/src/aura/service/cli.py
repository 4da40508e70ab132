"""Command-line entry points.

Exit codes: 0 success, 2 usage error (argument parsing), 1 runtime error.
"""

from __future__ import annotations

import dataclasses
import json
import sys
from pathlib import Path

import click
import numpy as np

from aura import ccar
from aura.ccar import CalibrationRecord, IndicatorVector, sigmoid
from aura.domain import default_taxonomy, dump_incident_jsonl, load_incident_jsonl
from aura.fleetsim.clock import SimClock
from aura.fleetsim.corpus import generate_corpus
from aura.fleetsim.station import Fleet, SimStation, run_offline
from aura.service.config import load_config
from aura.service.evaluate import evaluate as run_evaluation
from aura.syncfed.wal import WalStore


@click.group()
def main():
    """Autonomous incident-resolution engine for simulated EV charging fleets."""


def _fail(message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(1)


@main.command()
@click.option("--scenario", "scenario_path", required=True, type=click.Path())
@click.option("--out", "out_dir", required=True, type=click.Path())
def simulate(scenario_path, out_dir):
    """Run a fleet scenario (JSON) and write session/offline reports."""
    try:
        scenario = json.loads(Path(scenario_path).read_text())
    except (OSError, ValueError) as exc:
        _fail(f"cannot read scenario: {exc}")
    seed = int(scenario.get("seed", 0))
    n_stations = int(scenario.get("n_stations", 3))
    offline_windows = scenario.get("offline_windows", [])
    clock = SimClock()
    fleet = Fleet(clock=clock, seed=seed)
    sample = generate_corpus(n_stations, seed=seed)
    for i, inc in enumerate(sample):
        station = SimStation(inc.station, clock=clock, seed=seed)
        for t in range(50):
            station.auth_cache.put(f"RFID-{i}-{t:04d}", True)
        fleet.add_station(station)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    reports = []
    for i, window in enumerate(offline_windows):
        wal = WalStore(out / f"offline-{i}.wal")
        offline = run_offline(
            fleet, duration_hours=float(window.get("duration_hours", 4)), wal=wal, seed=seed
        )
        wal.close()
        reports.append(dataclasses.asdict(offline))
    doc = {"seed": seed, "sessions": fleet.session_counts(), "offline": reports}
    (out / "report.json").write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")
    click.echo(str(out / "report.json"))


@main.command("gen-corpus")
@click.option("--n", required=True, type=int)
@click.option("--seed", required=True, type=int)
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.option("--hardware-fraction", type=float, default=0.2, show_default=True)
def gen_corpus(n, seed, out_path, hardware_fraction):
    """Generate a labeled incident corpus as canonical JSON lines."""
    try:
        corpus = generate_corpus(n, seed=seed, hardware_fraction=hardware_fraction)
    except ValueError as exc:
        _fail(str(exc))
    text = dump_incident_jsonl(corpus)
    if out_path:
        Path(out_path).write_text(text)
        click.echo(f"{len(corpus)} incidents -> {out_path}")
    else:
        click.echo(text, nl=False)


@main.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path())
@click.option("--report", "report_path", type=click.Path(), default=None)
@click.option("--config", "config_path", type=click.Path(), default=None)
def evaluate(corpus_path, report_path, config_path):
    """Replay a labeled corpus through the pipeline and report metrics."""
    try:
        text = Path(corpus_path).read_text()
        incidents = load_incident_jsonl(text, default_taxonomy())
        config = load_config(config_path)
        report = run_evaluation(incidents, config)
    except Exception as exc:  # noqa: BLE001
        _fail(str(exc))
    doc = report.to_json()
    if report_path:
        Path(report_path).write_text(doc + "\n")
        click.echo(f"report -> {report_path}")
    else:
        click.echo(doc)


@main.command()
@click.option("--records", "records_path", required=True, type=click.Path())
def calibrate(records_path):
    """Fit confidence weights + temperature on JSON calibration records."""
    try:
        rows = json.loads(Path(records_path).read_text())
        records = [
            CalibrationRecord(
                IndicatorVector(phi=tuple(r["phi"]), psi=tuple(r["psi"])),
                bool(r["outcome"]),
            )
            for r in rows
        ]
        model = ccar.fit_weights(records)
        logits = np.array([model.raw_logit(r.indicators) for r in records])
        outcomes = np.array([r.outcome for r in records], dtype=bool)
        ece_before = ccar.expected_calibration_error(
            [sigmoid(z) for z in logits], outcomes
        )
        t_star, ece_after = ccar.calibrate_temperature(logits, outcomes)
    except Exception as exc:  # noqa: BLE001
        _fail(str(exc))
    click.echo(f"T* = {t_star:.4f}")
    click.echo(f"ECE before = {ece_before:.4f}")
    click.echo(f"ECE after  = {ece_after:.4f}")


@main.command()
@click.option("--config", "config_path", type=click.Path(), default=None)
def serve(config_path):
    """Run the HTTP/SSE service."""
    from aura.service.api import serve as run_server

    try:
        config = load_config(config_path)
    except Exception as exc:  # noqa: BLE001
        _fail(str(exc))
    run_server(config)


@main.command()
@click.option("--report", "report_path", required=True, type=click.Path())
@click.option(
    "--format", "fmt", type=click.Choice(["json", "csv", "md"]), default="json",
    show_default=True,
)
def report(report_path, fmt):
    """Render an evaluation report as json, csv, or markdown."""
    try:
        doc = json.loads(Path(report_path).read_text())
    except (OSError, ValueError) as exc:
        _fail(f"cannot read report: {exc}")
    if fmt == "json":
        click.echo(json.dumps(doc, sort_keys=True, indent=2))
        return
    rows = [("metric", "value")]
    rows.append(("accuracy", doc.get("accuracy")))
    rows.append(("autonomous_rate", doc.get("autonomous_rate")))
    rows.append(("false_positive_rate", doc.get("false_positive_rate")))
    rows.append(("false_negative_rate", doc.get("false_negative_rate")))
    for cat, stats in sorted(doc.get("per_category", {}).items()):
        rows.append((f"f1[{cat}]", stats.get("f1")))
    for k, v in sorted(doc.get("calibration", {}).items()):
        rows.append((f"calibration.{k}", v))
    for k, v in sorted(doc.get("failure_modes", {}).items()):
        rows.append((f"failures.{k}", v))
    if fmt == "csv":
        for name, value in rows:
            click.echo(f"{name},{value}")
    else:
        click.echo(f"| {rows[0][0]} | {rows[0][1]} |")
        click.echo("| --- | --- |")
        for name, value in rows[1:]:
            click.echo(f"| {name} | {value} |")


if __name__ == "__main__":
    main()
