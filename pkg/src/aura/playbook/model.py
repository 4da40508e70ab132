"""Playbook schema and YAML parsing.

Documents follow the versioned remediation-playbook layout: trigger,
confidence threshold, safety class, ordered steps with optional expectations,
and a rollback policy. Unknown keys are rejected so typos fail loudly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import yaml

from aura.fleetsim.station import ACTION_VOCABULARY, parse_duration_s

SAFETY_CLASSES = {"critical", "elevated", "standard", "non_critical"}


class SchemaError(Exception):
    def __init__(self, path: str, message: str = ""):
        super().__init__(f"{path}: {message}" if message else path)
        self.path = path


class UnknownActionError(SchemaError):
    def __init__(self, path: str, action: str):
        super().__init__(path, f"unknown action {action!r}")
        self.action = action


@dataclass(frozen=True)
class Trigger:
    condition: str
    duration_s: float = 0.0
    exclude_states: tuple[str, ...] = ()


@dataclass(frozen=True)
class PlaybookStep:
    id: int
    action: str
    params: dict = field(default_factory=dict)
    expect_response: str | None = None
    expect_timeout_s: float | None = None
    post_delay_s: float = 0.0


@dataclass(frozen=True)
class RollbackPolicy:
    max_retries: int = 0
    on_failure: str = "escalate_operator"  # rollback | escalate_operator
    preserve_state: bool = True


@dataclass(frozen=True)
class Playbook:
    id: str
    version: str
    name: str
    category: str
    trigger: Trigger
    confidence_threshold: float
    safety_class: str
    max_execution_time_s: float
    steps: tuple[PlaybookStep, ...]
    rollback: RollbackPolicy
    metrics: dict = field(default_factory=dict)

    @property
    def critical(self) -> bool:
        return self.safety_class == "critical"


def _require(mapping: dict, key: str, path: str):
    if key not in mapping:
        raise SchemaError(f"{path}.{key}", "missing required key")
    return mapping[key]


def _reject_unknown(mapping: dict, allowed: set[str], path: str) -> None:
    extra = set(mapping) - allowed
    if extra:
        raise SchemaError(f"{path}.{sorted(extra)[0]}", "unknown key")


def parse_playbook(document: str | dict) -> Playbook:
    if isinstance(document, str):
        doc = yaml.safe_load(document)
    else:
        doc = document
    if not isinstance(doc, dict):
        raise SchemaError(".", "document is not a mapping")
    root = doc.get("playbook", doc)
    if not isinstance(root, dict):
        raise SchemaError(".playbook", "not a mapping")
    _reject_unknown(
        root,
        {
            "id", "version", "name", "category", "trigger", "confidence_threshold",
            "safety_class", "max_execution_time", "steps", "rollback", "metrics",
        },
        "",
    )
    trig = _require(root, "trigger", "")
    _reject_unknown(trig, {"condition", "duration", "exclude_states"}, ".trigger")
    trigger = Trigger(
        condition=_require(trig, "condition", ".trigger"),
        duration_s=parse_duration_s(trig.get("duration", 0)),
        exclude_states=tuple(trig.get("exclude_states", [])),
    )
    threshold = float(_require(root, "confidence_threshold", ""))
    if not 0.0 <= threshold <= 1.0:
        raise SchemaError(".confidence_threshold", f"{threshold} outside [0, 1]")
    safety_class = _require(root, "safety_class", "")
    if safety_class not in SAFETY_CLASSES:
        raise SchemaError(".safety_class", f"unknown class {safety_class!r}")
    raw_steps = _require(root, "steps", "")
    if not raw_steps:
        raise SchemaError(".steps", "empty step list")
    steps: list[PlaybookStep] = []
    last_id = 0
    for i, raw in enumerate(raw_steps):
        path = f".steps[{i}]"
        _reject_unknown(raw, {"id", "action", "params", "expect", "post_delay"}, path)
        sid = int(_require(raw, "id", path))
        if sid <= last_id:
            raise SchemaError(f"{path}.id", f"step ids must strictly increase, got {sid} after {last_id}")
        last_id = sid
        action = _require(raw, "action", path)
        if action not in ACTION_VOCABULARY:
            raise UnknownActionError(f"{path}.action", action)
        expect = raw.get("expect") or {}
        _reject_unknown(expect, {"response", "timeout"}, f"{path}.expect")
        steps.append(
            PlaybookStep(
                id=sid,
                action=action,
                params=dict(raw.get("params") or {}),
                expect_response=expect.get("response"),
                expect_timeout_s=parse_duration_s(expect["timeout"]) if "timeout" in expect else None,
                post_delay_s=parse_duration_s(raw.get("post_delay", 0)),
            )
        )
    rb = root.get("rollback", {})
    _reject_unknown(rb, {"max_retries", "on_failure", "preserve_state"}, ".rollback")
    rollback = RollbackPolicy(
        max_retries=int(rb.get("max_retries", 0)),
        on_failure=rb.get("on_failure", "escalate_operator"),
        preserve_state=bool(rb.get("preserve_state", True)),
    )
    return Playbook(
        id=_require(root, "id", ""),
        version=str(root.get("version", "1.0")),
        name=root.get("name", root["id"]),
        category=root.get("category", "general"),
        trigger=trigger,
        confidence_threshold=threshold,
        safety_class=safety_class,
        max_execution_time_s=parse_duration_s(root.get("max_execution_time", "300s")),
        steps=tuple(steps),
        rollback=rollback,
        metrics=dict(root.get("metrics", {})),
    )


# --- trigger predicate language ---------------------------------------------

def eval_condition(condition: str, state: dict) -> bool:
    """Evaluate a minimal predicate over dotted state paths.

    Supports ``path == value``, ``path != value``, ``path >= number`` and
    conjunction with `` and ``.
    """
    clauses = [c.strip() for c in condition.split(" and ")]
    return all(_eval_clause(c, state) for c in clauses)


def _lookup(path: str, state: dict):
    node = state
    for part in path.split("."):
        if not isinstance(node, dict) or part not in node:
            return None
        node = node[part]
    return node


def _eval_clause(clause: str, state: dict) -> bool:
    for op in ("==", "!=", ">="):
        if op in clause:
            lhs, rhs = (s.strip() for s in clause.split(op, 1))
            actual = _lookup(lhs, state)
            rhs = rhs.strip("\"'")
            if op == ">=":
                try:
                    return actual is not None and float(actual) >= float(rhs)
                except (TypeError, ValueError):
                    return False
            matches = str(actual) == rhs
            return matches if op == "==" else not matches
    raise SchemaError(".trigger.condition", f"unparseable clause {clause!r}")
