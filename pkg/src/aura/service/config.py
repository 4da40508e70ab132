"""Engine configuration.

Config files use a commented ``key = value`` format ('#' starts a comment).
The ``AURA_CONFIG`` environment variable overrides the config path.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields
from pathlib import Path


class ConfigError(Exception):
    pass


@dataclass
class EngineConfig:
    scenario_path: str | None = None
    corpus_path: str | None = None
    playbook_dir: str | None = None
    kb_dir: str | None = None
    bind_host: str = "127.0.0.1"
    bind_port: int = 8787
    clock_mode: str = "simulated"  # real | simulated
    detector_window: int = 60
    detector_threshold: float = 0.75
    theta: float = 0.90
    epsilon: float = 0.05
    seed: int = 42
    corpus_n: int = 2000
    train_fraction: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.theta <= 1.0:
            raise ConfigError(f"theta {self.theta} outside [0, 1]")
        if self.clock_mode not in ("real", "simulated"):
            raise ConfigError(f"unknown clock_mode {self.clock_mode!r}")
        for name in ("scenario_path", "corpus_path", "playbook_dir", "kb_dir"):
            value = getattr(self, name)
            if value is not None and not Path(value).exists():
                raise ConfigError(f"{name} does not exist: {value}")


_INT_KEYS = {"bind_port", "detector_window", "seed", "corpus_n"}
_FLOAT_KEYS = {"detector_threshold", "theta", "epsilon", "train_fraction"}


def parse_config(text: str) -> EngineConfig:
    known = {f.name for f in fields(EngineConfig)}
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in _INT_KEYS:
            values[key] = int(value)
        elif key in _FLOAT_KEYS:
            values[key] = float(value)
        else:
            values[key] = value
    return EngineConfig(**values)


def load_config(path: str | None = None) -> EngineConfig:
    path = os.environ.get("AURA_CONFIG", path)
    if path is None:
        return EngineConfig()
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)
