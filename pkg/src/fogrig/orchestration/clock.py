"""Injectable clocks.

The runner never touches wall time directly: production uses
:class:`WallClock`, tests use :class:`SimulatedClock`, which advances
instantly and fires scheduled callbacks (e.g. scripted event injection)
deterministically. A full experiment replay under the simulated clock is
bit-for-bit reproducible.
"""

from __future__ import annotations

import heapq
import itertools
import queue
import time
from typing import Any, Callable, Protocol


class Clock(Protocol):
    def now(self) -> float: ...

    def sleep(self, seconds: float) -> None: ...

    def wait_for_item(self, source: "queue.Queue[Any]", timeout: float) -> Any | None: ...


class WallClock:
    def now(self) -> float:
        return time.monotonic()

    def sleep(self, seconds: float) -> None:
        time.sleep(seconds)

    def wait_for_item(self, source: queue.Queue, timeout: float):
        """Block until an item arrives or the timeout elapses."""
        try:
            return source.get(timeout=timeout)
        except queue.Empty:
            return None


class SimulatedClock:
    def __init__(self, start: float = 0.0):
        self._now = start
        self._scheduled: list[tuple[float, int, Callable[[], None]]] = []
        self._seq = itertools.count()

    def now(self) -> float:
        return self._now

    def schedule(self, at: float, callback: Callable[[], None]) -> None:
        """Run ``callback`` when simulated time reaches ``at``."""
        heapq.heappush(self._scheduled, (at, next(self._seq), callback))

    def sleep(self, seconds: float) -> None:
        target = self._now + seconds
        while self._scheduled and self._scheduled[0][0] <= target:
            at, _, callback = heapq.heappop(self._scheduled)
            self._now = max(self._now, at)
            callback()
        self._now = target

    def wait_for_item(self, source: queue.Queue, timeout: float):
        """Advance time by ``timeout``, delivering any item that appears."""
        if not source.empty():
            return source.get_nowait()
        self.sleep(timeout)
        try:
            return source.get_nowait()
        except queue.Empty:
            return None
