"""Millisecond clocks: a virtual one for simulation, a monotonic one for serving.

All timestamps in the system are integer milliseconds from the clock's epoch.
The virtual clock only moves when told to, which is what makes whole
simulated studies replayable from a seed.
"""

from __future__ import annotations

import time
from typing import Protocol


class Clock(Protocol):
    def now_ms(self) -> int: ...


class VirtualClock:
    """Manually advanced clock starting at zero."""

    def __init__(self, start_ms: int = 0) -> None:
        if start_ms < 0:
            raise ValueError("start_ms must be non-negative")
        self._now = start_ms

    def now_ms(self) -> int:
        return self._now

    def advance(self, delta_ms: int) -> int:
        if delta_ms < 0:
            raise ValueError("cannot advance by a negative amount")
        self._now += delta_ms
        return self._now

    def advance_to(self, target_ms: int) -> int:
        if target_ms < self._now:
            raise ValueError(
                f"cannot move backwards from {self._now} to {target_ms}"
            )
        self._now = target_ms
        return self._now


class MonotonicClock:
    """Wall-adjacent clock anchored at construction time."""

    def __init__(self) -> None:
        self._anchor_ns = time.monotonic_ns()

    def now_ms(self) -> int:
        return (time.monotonic_ns() - self._anchor_ns) // 1_000_000
