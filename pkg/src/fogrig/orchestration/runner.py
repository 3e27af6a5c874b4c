"""The experiment control loop.

One logical loop owns the state machine. Per active state it runs the four
actions in order -- infrastructure update (all agent acknowledgments
collected before proceeding), application commands, phase broadcast, then
condition monitoring -- and exits the state through the first satisfied
transition in declaration order.

Event handling: events arriving while a state is still executing actions are
buffered and credited when its experiment timer starts, so acknowledgment
latency can never lose events. Tallies are scoped to the current state; a
state entered again starts from zero with a fresh timer. Conditions are
re-evaluated on every event arrival and on a fixed tick.

Unrecoverable action failures route the run to the schedule's declared
failure state, or abort with the partial trace when none is declared.
"""

from __future__ import annotations

import json
import logging
import queue
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

from fogrig.infra.overlay import InfraUpdate
from fogrig.orchestration.clock import Clock
from fogrig.orchestration.conditions import evaluate_condition, is_time_sensitive
from fogrig.orchestration.schedule import OrchestrationSchedule, ScheduleState, transition_snapshot

log = logging.getLogger(__name__)


class InfrastructureChannel(Protocol):
    """Dispatches one state's infrastructure update and collects all acks."""

    def apply_update(self, update: InfraUpdate) -> list[str]: ...


class ApplicationChannel(Protocol):
    def send_command(self, target: str, payload: dict) -> None: ...

    def broadcast(self, state: str, payload: dict) -> list[str]: ...


class ActionError(RuntimeError):
    """An action failed in a way agents/components could not recover from."""


class DeadlockError(RuntimeError):
    def __init__(self, state: str):
        self.state = state
        super().__init__(
            f"state {state!r} can never transition: all conditions are event-based "
            "and no further events can arrive")


class OrchestrationAborted(RuntimeError):
    def __init__(self, message: str, trace: "ExperimentTrace"):
        self.trace = trace
        super().__init__(message)


@dataclass
class TraceEntry:
    state: str
    entered_at: float
    infra: dict | None = None
    commands: dict | None = None
    broadcast: dict | None = None
    monitor_started: float | None = None
    events: list[dict] = field(default_factory=list)
    exit: dict | None = None

    def to_json(self) -> dict:
        return {
            "state": self.state,
            "entered_at": self.entered_at,
            "infra": self.infra,
            "commands": self.commands,
            "broadcast": self.broadcast,
            "monitor_started": self.monitor_started,
            "events": self.events,
            "exit": self.exit,
        }


@dataclass
class ExperimentTrace:
    entries: list[TraceEntry] = field(default_factory=list)

    @property
    def visited(self) -> list[str]:
        return [entry.state for entry in self.entries]

    def to_jsonl(self) -> str:
        return "".join(json.dumps(entry.to_json(), sort_keys=True) + "\n" for entry in self.entries)

    def write(self, path: Path) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_jsonl(), encoding="utf-8")


class ScheduleRunner:
    def __init__(self, schedule: OrchestrationSchedule, infra: InfrastructureChannel | None,
                 apps: ApplicationChannel | None, clock: Clock, tick_s: float = 0.1):
        self.schedule = schedule
        self.infra = infra
        self.apps = apps
        self.clock = clock
        self.tick_s = tick_s
        self.trace = ExperimentTrace()
        self._events: queue.Queue[tuple[str, str]] = queue.Queue()
        self._sources_closed = threading.Event()
        self._finished = threading.Event()

    # -- event intake (thread-safe) -----------------------------------------

    def submit_event(self, name: str, source: str = "") -> None:
        self._events.put((name, source))

    def close_event_sources(self) -> None:
        """Declare that no further events can arrive (enables deadlock detection)."""
        self._sources_closed.set()

    @property
    def finished(self) -> bool:
        return self._finished.is_set()

    # -- the control loop -----------------------------------------------------

    def run(self) -> ExperimentTrace:
        current = self.schedule.initial
        routing_failure = False
        try:
            while True:
                state = self.schedule.state(current)
                entry = TraceEntry(state=current, entered_at=self.clock.now())
                self.trace.entries.append(entry)
                try:
                    self._run_actions(state, entry)
                except ActionError as exc:
                    entry.exit = {"error": str(exc), "at": self.clock.now()}
                    failure = self.schedule.failure_state
                    if failure is None or routing_failure or current == failure:
                        raise OrchestrationAborted(str(exc), self.trace) from exc
                    log.error("state %r failed (%s); routing to failure state %r",
                              current, exc, failure)
                    routing_failure = True
                    current = failure
                    continue
                routing_failure = False

                if state.terminal:
                    entry.exit = {"terminal": True, "at": self.clock.now()}
                    return self.trace
                current = self._monitor(state, entry)
        finally:
            self._finished.set()

    def _run_actions(self, state: ScheduleState, entry: TraceEntry) -> None:
        if state.infra_update is not None and self.infra is not None:
            started = self.clock.now()
            try:
                warnings = self.infra.apply_update(state.infra_update)
            except Exception as exc:
                raise ActionError(f"infrastructure update failed: {exc}") from exc
            entry.infra = {"started": started, "acked": self.clock.now(), "warnings": warnings}
        if state.commands and self.apps is not None:
            started = self.clock.now()
            for command in state.commands:
                try:
                    self.apps.send_command(command.target, command.payload)
                except Exception as exc:
                    raise ActionError(
                        f"command delivery to {command.target!r} failed: {exc}") from exc
            entry.commands = {"started": started, "done": self.clock.now(),
                              "count": len(state.commands)}
        if state.broadcast is not None and self.apps is not None:
            started = self.clock.now()
            warnings = self.apps.broadcast(state.name, state.broadcast)
            entry.broadcast = {"started": started, "done": self.clock.now(), "warnings": warnings}

    def _monitor(self, state: ScheduleState, entry: TraceEntry) -> str:
        monitor_started = self.clock.now()
        entry.monitor_started = monitor_started
        counts: dict[str, int] = {}
        # Credit events buffered while actions ran.
        self._drain(counts, entry)

        time_can_fire = any(is_time_sensitive(t.condition) for t in state.transitions)
        while True:
            elapsed = self.clock.now() - monitor_started
            for index, transition in enumerate(state.transitions):
                if evaluate_condition(transition.condition, elapsed, counts):
                    entry.exit = {
                        "to": transition.to,
                        "at": self.clock.now(),
                        "elapsed": elapsed,
                        "fired": transition_snapshot(transition),
                        "transition_index": index,
                        "counts": dict(sorted(counts.items())),
                    }
                    return transition.to
            if (not time_can_fire and self._sources_closed.is_set() and self._events.empty()):
                raise DeadlockError(state.name)
            item = self.clock.wait_for_item(self._events, self.tick_s)
            if item is not None:
                self._record_event(item, counts, entry)
                self._drain(counts, entry)

    def _drain(self, counts: dict[str, int], entry: TraceEntry) -> None:
        while True:
            try:
                item = self._events.get_nowait()
            except queue.Empty:
                return
            self._record_event(item, counts, entry)

    def _record_event(self, item: tuple[str, str], counts: dict[str, int], entry: TraceEntry) -> None:
        name, source = item
        counts[name] = counts.get(name, 0) + 1
        entry.events.append({"name": name, "source": source, "at": self.clock.now()})
