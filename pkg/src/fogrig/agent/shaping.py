"""Message-level impairment pipeline.

This is the portable stand-in for OS traffic control used by the proxy
backend: one pipe per destination shapes the messages an agent forwards
there. Per message, in order:

1. dropped with probability ``loss``
2. payload gets one random bit flipped with probability ``corruption``
3. an extra copy is emitted with probability ``duplicate``
4. held back one slot with probability ``reorder``: the message waits until
   the next one has been scheduled, or until ``max_hold_s`` passes
5. serialization at ``rate_bps`` (a byte queue draining at the configured
   rate), then a delivery delay sampled from Normal(delay, dispersion)
   truncated at zero, matching netem's delay/jitter semantics

The pipe is pure bookkeeping: callers pass the current time in and receive
(due-time, payload) tuples back, which makes the logic fully testable with a
fake clock and a seeded RNG. Live delivery is driven by
:class:`fogrig.agent.scheduler.DeliveryScheduler`.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from fogrig.netplan.plan import ImpairmentSpec


@dataclass(frozen=True)
class ShapedDelivery:
    due: float
    payload: bytes


@dataclass
class PipeCounters:
    offered: int = 0
    scheduled: int = 0
    dropped: int = 0
    corrupted: int = 0
    duplicated: int = 0
    held: int = 0


@dataclass
class _Held:
    payload: bytes
    deadline: float


class ImpairmentPipe:
    """Shapes the message stream toward a single destination."""

    def __init__(self, spec: ImpairmentSpec, rng: random.Random | None = None,
                 max_hold_s: float = 0.25):
        self.spec = spec
        self.counters = PipeCounters()
        self._rng = rng or random.Random()
        self._max_hold_s = max_hold_s
        self._held: _Held | None = None
        self._link_free_at = 0.0

    def offer(self, payload: bytes, now: float) -> list[ShapedDelivery]:
        """Shape one message; returns zero or more scheduled deliveries."""
        self.counters.offered += 1
        deliveries: list[ShapedDelivery] = []

        if self._rng.random() < self.spec.loss:
            self.counters.dropped += 1
            deliveries.extend(self.flush(now))
            return deliveries

        if self.spec.corruption and payload and self._rng.random() < self.spec.corruption:
            payload = self._flip_bit(payload)
            self.counters.corrupted += 1

        copies = [payload]
        if self.spec.duplicate and self._rng.random() < self.spec.duplicate:
            copies.append(payload)
            self.counters.duplicated += 1

        if self._held is None and self.spec.reorder and self._rng.random() < self.spec.reorder:
            # Hold the primary copy one slot; a duplicate copy travels normally.
            self.counters.held += 1
            self._held = _Held(copies[0], now + self._max_hold_s)
            copies = copies[1:]

        held = self._take_held() if self._held is not None and copies else None
        for copy in copies:
            deliveries.append(self._schedule(copy, now))
        if held is not None:
            deliveries.append(self._schedule(held.payload, now))
        return deliveries

    def flush(self, now: float, force: bool = False) -> list[ShapedDelivery]:
        """Release a held message whose deadline has passed (or any, if forced)."""
        if self._held is None:
            return []
        if force or now >= self._held.deadline:
            held = self._take_held()
            return [self._schedule(held.payload, now)]
        return []

    def hold_deadline(self) -> float | None:
        return self._held.deadline if self._held is not None else None

    def _take_held(self) -> _Held:
        held = self._held
        assert held is not None
        self._held = None
        return held

    def _schedule(self, payload: bytes, now: float) -> ShapedDelivery:
        departure = now
        if self.spec.rate_bps:
            start = max(now, self._link_free_at)
            departure = start + (len(payload) * 8) / self.spec.rate_bps
            self._link_free_at = departure
        delay_s = self.spec.delay_ms / 1000.0
        if self.spec.dispersion_ms:
            delay_s = max(0.0, self._rng.normalvariate(delay_s, self.spec.dispersion_ms / 1000.0))
        self.counters.scheduled += 1
        return ShapedDelivery(due=departure + delay_s, payload=payload)

    def _flip_bit(self, payload: bytes) -> bytes:
        bit = self._rng.randrange(len(payload) * 8)
        corrupted = bytearray(payload)
        corrupted[bit // 8] ^= 1 << (bit % 8)
        return bytes(corrupted)
