"""Playbook library: YAML files from a directory plus generated generic
playbooks covering every playbook id in the error taxonomy."""

from __future__ import annotations

from pathlib import Path

from aura.domain import Criticality, ErrorCode, FaultCategory, default_taxonomy
from aura.fleetsim.corpus import CATEGORY_RESOLVE_ACTION
from aura.playbook.model import Playbook, parse_playbook

_DATA_DIR = Path(__file__).parent.parent / "data" / "playbooks"

_ELEVATED_PREFIXES = ("DIAG-FW", "DIAG-GRID")


def _generic_playbook(playbook_id: str, category: FaultCategory, safety_class: str) -> Playbook:
    resolve = CATEGORY_RESOLVE_ACTION[category]
    if category is FaultCategory.COMMUNICATION:
        steps = [
            {"id": 1, "action": "log_state"},
            {"id": 2, "action": "close_websocket"},
            {"id": 3, "action": resolve},
            {"id": 4, "action": "connect_websocket"},
            {"id": 5, "action": "send_message", "params": {"type": "BootNotification"},
             "expect": {"response": "Accepted", "timeout": "30s"}},
            {"id": 6, "action": "verify_status", "params": {"expected": "Available"}},
        ]
    else:
        steps = [
            {"id": 1, "action": "log_state"},
            {"id": 2, "action": resolve},
            {"id": 3, "action": "verify_status", "params": {"expected": "Available"}},
        ]
    if safety_class == "elevated" and category is FaultCategory.FIRMWARE_SOFTWARE:
        # firmware playbooks carry a mandatory dual-bank style reset step
        steps.insert(1, {"id": 1, "action": "adjust_config",
                         "params": {"set": {"firmware.bank": "fallback"}}})
        for i, s in enumerate(steps):
            s["id"] = i + 1
    return parse_playbook(
        {
            "playbook": {
                "id": playbook_id,
                "version": "1.0",
                "name": f"Generic remediation {playbook_id}",
                "category": category.value,
                "trigger": {"condition": "errors.count >= 1", "duration": "0s"},
                "confidence_threshold": 0.85,
                "safety_class": safety_class,
                "max_execution_time": "300s",
                "steps": steps,
                "rollback": {"max_retries": 1, "on_failure": "rollback", "preserve_state": True},
            }
        }
    )


def _safety_class_for(code: ErrorCode) -> str:
    if code.criticality is Criticality.CRITICAL or (
        code.playbook_id and code.playbook_id.startswith("DIAG-SAFETY")
    ):
        return "critical"
    if code.criticality is Criticality.ELEVATED or (
        code.playbook_id and code.playbook_id.startswith(_ELEVATED_PREFIXES)
    ):
        return "elevated"
    return "standard"


class PlaybookLibrary:
    def __init__(self, playbooks: dict[str, Playbook]):
        self._playbooks = dict(playbooks)

    def __contains__(self, playbook_id: str) -> bool:
        return playbook_id in self._playbooks

    def __len__(self) -> int:
        return len(self._playbooks)

    def get(self, playbook_id: str) -> Playbook | None:
        return self._playbooks.get(playbook_id)

    def ids(self) -> list[str]:
        return sorted(self._playbooks)

    @classmethod
    def from_directory(cls, directory) -> "PlaybookLibrary":
        books = {}
        for path in sorted(Path(directory).glob("*.yaml")):
            pb = parse_playbook(path.read_text())
            books[pb.id] = pb
        return cls(books)


def default_library(taxonomy=None, extra_dir=None) -> PlaybookLibrary:
    """Shipped YAML playbooks plus generics for every taxonomy playbook id."""
    taxonomy = taxonomy or default_taxonomy()
    books: dict[str, Playbook] = {}
    for code in taxonomy.values():
        pid = code.playbook_id
        if pid is None or pid in books:
            continue
        books[pid] = _generic_playbook(pid, code.category, _safety_class_for(code))
    for path in sorted(_DATA_DIR.glob("*.yaml")):
        pb = parse_playbook(path.read_text())
        books[pb.id] = pb
    if extra_dir is not None:
        for path in sorted(Path(extra_dir).glob("*.yaml")):
            pb = parse_playbook(path.read_text())
            books[pb.id] = pb
    return PlaybookLibrary(books)
