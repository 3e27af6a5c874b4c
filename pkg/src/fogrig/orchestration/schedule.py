"""Orchestration schedule: states, per-state actions, transitions.

Each state performs up to four actions in a fixed order: update the
infrastructure, issue application commands, broadcast the phase change, and
monitor its transition conditions. States without transitions are terminal.
A schedule may name a ``failure_state``; unrecoverable action errors route
there instead of killing the run.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from fogrig import units
from fogrig.apps.config import ApplicationConfig
from fogrig.infra.model import InfrastructureModel
from fogrig.infra.overlay import InfraUpdate, LinkOverride, MachineOverride
from fogrig.orchestration.conditions import Condition, condition_to_json, parse_condition


class ScheduleError(ValueError):
    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


@dataclass(frozen=True)
class CommandAction:
    target: str  # container name or machine id
    payload: dict


@dataclass(frozen=True)
class Transition:
    condition: Condition
    to: str


@dataclass(frozen=True)
class ScheduleState:
    name: str
    infra_update: InfraUpdate | None = None
    commands: tuple[CommandAction, ...] = ()
    broadcast: dict | None = None
    transitions: tuple[Transition, ...] = ()

    @property
    def terminal(self) -> bool:
        return not self.transitions


@dataclass(frozen=True)
class OrchestrationSchedule:
    initial: str
    states: dict[str, ScheduleState]
    failure_state: str | None = None

    def state(self, name: str) -> ScheduleState:
        return self.states[name]


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def parse_infra_update(raw: dict, context: str, problems: list[str]) -> InfraUpdate:
    """Parse one infrastructure-update object (shared with ``network modify``)."""
    machines = []
    for index, override in enumerate(raw.get("machines", [])):
        machine = override.get("id")
        if not isinstance(machine, str):
            problems.append(f"{context}.machines[{index}]: missing machine id")
            continue
        memory_mb = override.get("memory_mb")
        machines.append(MachineOverride(
            machine=machine,
            cpu_cores=override.get("cpu_cores"),
            memory_bytes=units.mb_to_bytes(memory_mb) if memory_mb is not None else None,
            memory_scale=override.get("memory_scale"),
        ))
    links = []
    for index, override in enumerate(raw.get("links", [])):
        endpoint_a, endpoint_b = override.get("from"), override.get("to")
        if not (isinstance(endpoint_a, str) and isinstance(endpoint_b, str)):
            problems.append(f"{context}.links[{index}]: needs 'from' and 'to'")
            continue
        rate_mbit = override.get("rate_mbit")
        links.append(LinkOverride(
            endpoint_a=endpoint_a,
            endpoint_b=endpoint_b,
            down=bool(override.get("down", False)),
            rate_bps=units.mbit_to_bps(rate_mbit) if rate_mbit is not None else None,
            delay_ms=override.get("delay_ms_oneway"),
            dispersion_ms=override.get("dispersion_ms"),
            loss=_pct(override.get("loss_pct")),
            corruption=_pct(override.get("corruption_pct")),
            reorder=_pct(override.get("reorder_pct")),
            duplicate=_pct(override.get("duplicate_pct")),
        ))
    partitions = []
    for index, partition in enumerate(raw.get("partitions", [])):
        if isinstance(partition, str):
            partitions.append(partition)
        elif isinstance(partition, list) and len(partition) == 2:
            partitions.append(tuple(sorted(partition)))
        else:
            problems.append(f"{context}.partitions[{index}]: must be a machine id or a pair")
    return InfraUpdate(reset=bool(raw.get("reset", False)), machines=tuple(machines),
                       links=tuple(links), partitions=tuple(partitions))


def _pct(value: float | None) -> float | None:
    return None if value is None else units.pct_to_probability(value)


def parse_schedule(document: str | dict) -> OrchestrationSchedule:
    """Parse the schedule document, raising with every violation found."""
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ScheduleError([f"document is not valid JSON: {exc}"]) from exc

    problems: list[str] = []
    states: dict[str, ScheduleState] = {}
    raw_states = document.get("states")
    if not isinstance(raw_states, dict) or not raw_states:
        raise ScheduleError(["schedule needs a non-empty 'states' object"])

    for name, raw in raw_states.items():
        context = f"states[{name!r}]"
        infra_update = None
        if "infra_update" in raw:
            infra_update = parse_infra_update(raw["infra_update"], f"{context}.infra_update", problems)
        commands = []
        for index, command in enumerate(raw.get("commands", [])):
            target = command.get("target")
            if not isinstance(target, str) or not target:
                problems.append(f"{context}.commands[{index}]: missing target")
                continue
            commands.append(CommandAction(target=target, payload=command.get("payload", {})))
        broadcast = None
        if raw.get("broadcast") is not None and raw.get("broadcast") is not False:
            broadcast = raw["broadcast"] if isinstance(raw["broadcast"], dict) else {}
        transitions = []
        for index, transition in enumerate(raw.get("transitions", [])):
            condition = parse_condition(transition.get("when"),
                                        f"{context}.transitions[{index}].when", problems)
            to = transition.get("to")
            if not isinstance(to, str) or not to:
                problems.append(f"{context}.transitions[{index}]: missing 'to' state")
                continue
            if condition is not None:
                transitions.append(Transition(condition=condition, to=to))
        states[name] = ScheduleState(name=name, infra_update=infra_update,
                                     commands=tuple(commands), broadcast=broadcast,
                                     transitions=tuple(transitions))

    initial = document.get("initial")
    if not isinstance(initial, str) or initial not in states:
        problems.append(f"initial state {initial!r} is not a declared state")
        initial = next(iter(states))
    failure_state = document.get("failure_state")
    if failure_state is not None and failure_state not in states:
        problems.append(f"failure_state {failure_state!r} is not a declared state")
        failure_state = None

    schedule = OrchestrationSchedule(initial=initial, states=states, failure_state=failure_state)
    problems.extend(_structural_violations(schedule))
    if problems:
        raise ScheduleError(problems)
    return schedule


def _structural_violations(schedule: OrchestrationSchedule) -> list[str]:
    problems = []
    for state in schedule.states.values():
        for transition in state.transitions:
            if transition.to not in schedule.states:
                problems.append(f"state {state.name!r}: transition to undeclared state {transition.to!r}")
    return problems


def validate_schedule(schedule: OrchestrationSchedule,
                      model: InfrastructureModel | None = None,
                      app: ApplicationConfig | None = None) -> ValidationReport:
    """Structural and cross-document checks beyond parsing.

    Violations break the run (undeclared targets); unreachable states or
    states with no path to a terminal state are reported as warnings.
    """
    report = ValidationReport()
    report.violations.extend(_structural_violations(schedule))

    reachable = {schedule.initial}
    frontier = [schedule.initial]
    while frontier:
        state = schedule.states[frontier.pop()]
        for transition in state.transitions:
            if transition.to in schedule.states and transition.to not in reachable:
                reachable.add(transition.to)
                frontier.append(transition.to)
    report.warnings.extend(
        f"state {name!r} is unreachable from the initial state"
        for name in schedule.states if name not in reachable and name != schedule.failure_state)

    terminals = {name for name, state in schedule.states.items() if state.terminal}
    can_finish = set(terminals)
    changed = True
    while changed:
        changed = False
        for name, state in schedule.states.items():
            if name not in can_finish and any(t.to in can_finish for t in state.transitions):
                can_finish.add(name)
                changed = True
    report.warnings.extend(f"state {name!r} has no path to a terminal state"
                           for name in schedule.states if name not in can_finish)

    if model is not None:
        for state in schedule.states.values():
            if state.infra_update is None:
                continue
            for override in state.infra_update.machines:
                if override.machine not in model.by_id:
                    report.violations.append(
                        f"state {state.name!r}: infra update names unknown machine {override.machine!r}")
            for override in state.infra_update.links:
                if model.connection_between(override.endpoint_a, override.endpoint_b) is None:
                    report.violations.append(
                        f"state {state.name!r}: infra update names unknown connection "
                        f"{override.endpoint_a!r}-{override.endpoint_b!r}")
            for partition in state.infra_update.partitions:
                names = (partition,) if isinstance(partition, str) else partition
                report.violations.extend(
                    f"state {state.name!r}: partition names unknown machine {machine!r}"
                    for machine in names if machine not in model.by_id)

    if app is not None:
        known_targets = {c.name for c in app.containers}
        if model is not None:
            known_targets |= set(model.machine_ids)
        for state in schedule.states.values():
            for command in state.commands:
                if command.target not in known_targets:
                    report.violations.append(
                        f"state {state.name!r}: command target {command.target!r} is neither "
                        "a container nor a machine")
    return report


def load_schedule(path: str | Path) -> OrchestrationSchedule:
    return parse_schedule(Path(path).read_text(encoding="utf-8"))


def transition_snapshot(transition: Transition) -> dict:
    return {"to": transition.to, "when": condition_to_json(transition.condition)}
