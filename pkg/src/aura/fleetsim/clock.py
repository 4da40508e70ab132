"""Injectable simulated clock. All waits and rate-limit windows in the engine
run against one of these so tests complete in milliseconds."""

from __future__ import annotations

import time


class SimClock:
    def __init__(self, start_ms: int = 0):
        self._now_ms = start_ms

    def now_ms(self) -> int:
        return self._now_ms

    def now_s(self) -> float:
        return self._now_ms / 1000.0

    def advance_ms(self, ms: int) -> None:
        if ms < 0:
            raise ValueError("simulated time never steps backward")
        self._now_ms += int(ms)

    def advance_s(self, seconds: float) -> None:
        self.advance_ms(int(seconds * 1000))


class RealClock:
    """Wall-clock variant with the same interface."""

    def now_ms(self) -> int:
        return int(time.monotonic() * 1000)

    def now_s(self) -> float:
        return time.monotonic()

    def advance_ms(self, ms: int) -> None:
        time.sleep(ms / 1000.0)

    def advance_s(self, seconds: float) -> None:
        time.sleep(seconds)
