"""Heap-driven delivery scheduling for the shaping proxy.

A single daemon thread owns a priority queue of (due, seq, action) items and
fires each action at its due time. Delaying one message never blocks others:
new items can always be enqueued and preempt the current wait.
"""

from __future__ import annotations

import heapq
import itertools
import threading
import time
from typing import Callable


class DeliveryScheduler:
    def __init__(self, clock: Callable[[], float] = time.monotonic):
        self._clock = clock
        self._heap: list[tuple[float, int, Callable[[], None]]] = []
        self._seq = itertools.count()
        self._condition = threading.Condition()
        self._stopped = False
        self._thread = threading.Thread(target=self._run, name="fogrig-delivery", daemon=True)

    def start(self) -> None:
        self._thread.start()

    def stop(self) -> None:
        with self._condition:
            self._stopped = True
            self._condition.notify()
        if self._thread.is_alive():
            self._thread.join(timeout=2.0)

    def schedule(self, due: float, action: Callable[[], None]) -> None:
        with self._condition:
            heapq.heappush(self._heap, (due, next(self._seq), action))
            self._condition.notify()

    def pending(self) -> int:
        with self._condition:
            return len(self._heap)

    def _run(self) -> None:
        while True:
            with self._condition:
                while not self._stopped and not self._heap:
                    self._condition.wait()
                if self._stopped:
                    return
                due = self._heap[0][0]
                wait = due - self._clock()
                if wait > 0:
                    self._condition.wait(timeout=wait)
                    continue
                _, _, action = heapq.heappop(self._heap)
            try:
                action()
            except Exception:  # delivery is best-effort; never kill the loop
                pass
