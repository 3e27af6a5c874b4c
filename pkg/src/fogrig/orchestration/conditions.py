"""Boolean transition-condition trees.

Leaves are either time thresholds against the state's experiment timer or
required counts of named events; inner nodes are all/any/not combinators.
Evaluation is a pure function of (tree, elapsed, counts).

JSON forms: ``{"time": "5m"}``, ``{"event": "memory error", "count": 1}``,
``{"all": [...]}``, ``{"any": [...]}``, ``{"not": {...}}``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Union

from fogrig.units import parse_duration


@dataclass(frozen=True)
class TimeCondition:
    threshold_s: float


@dataclass(frozen=True)
class EventCondition:
    event: str
    count: int = 1


@dataclass(frozen=True)
class AllOf:
    children: tuple["Condition", ...]


@dataclass(frozen=True)
class AnyOf:
    children: tuple["Condition", ...]


@dataclass(frozen=True)
class Negation:
    child: "Condition"


Condition = Union[TimeCondition, EventCondition, AllOf, AnyOf, Negation]


def evaluate_condition(condition: Condition, elapsed_s: float,
                       counts: Mapping[str, int]) -> bool:
    """True when the tree is satisfied for the given timer and event tallies."""
    if isinstance(condition, TimeCondition):
        return elapsed_s >= condition.threshold_s
    if isinstance(condition, EventCondition):
        return counts.get(condition.event, 0) >= condition.count
    if isinstance(condition, AllOf):
        return all(evaluate_condition(c, elapsed_s, counts) for c in condition.children)
    if isinstance(condition, AnyOf):
        return any(evaluate_condition(c, elapsed_s, counts) for c in condition.children)
    if isinstance(condition, Negation):
        return not evaluate_condition(condition.child, elapsed_s, counts)
    raise TypeError(f"not a condition: {condition!r}")


def is_time_sensitive(condition: Condition) -> bool:
    """Whether passing time alone can still change this tree's value."""
    if isinstance(condition, TimeCondition):
        return True
    if isinstance(condition, (AllOf, AnyOf)):
        return any(is_time_sensitive(c) for c in condition.children)
    if isinstance(condition, Negation):
        return is_time_sensitive(condition.child)
    return False


def referenced_events(condition: Condition) -> set[str]:
    if isinstance(condition, EventCondition):
        return {condition.event}
    if isinstance(condition, (AllOf, AnyOf)):
        return set().union(*(referenced_events(c) for c in condition.children)) if condition.children else set()
    if isinstance(condition, Negation):
        return referenced_events(condition.child)
    return set()


def parse_condition(raw: object, context: str, problems: list[str]) -> Condition | None:
    """Parse one tree node, appending any violations found below it."""
    if not isinstance(raw, dict) or not raw:
        problems.append(f"{context}: condition must be an object with one operator, got {raw!r}")
        return None
    extra = set(raw) - ({"event", "count"} if "event" in raw else {next(iter(raw))})
    if extra:
        problems.append(f"{context}: unexpected fields {sorted(extra)} in condition {raw!r}")
        return None
    if "time" in raw:
        try:
            threshold = parse_duration(raw["time"])
        except (ValueError, TypeError):
            problems.append(f"{context}: invalid duration {raw['time']!r}")
            return None
        if threshold <= 0:
            problems.append(f"{context}: time threshold must be > 0, got {raw['time']!r}")
            return None
        return TimeCondition(threshold)
    if "event" in raw:
        count = raw.get("count", 1)
        if not isinstance(raw["event"], str) or not raw["event"]:
            problems.append(f"{context}: event name must be a non-empty string")
            return None
        if not isinstance(count, int) or count < 1:
            problems.append(f"{context}: event count must be an integer >= 1, got {count!r}")
            return None
        return EventCondition(raw["event"], count)
    if "all" in raw or "any" in raw:
        key = "all" if "all" in raw else "any"
        children_raw = raw[key]
        if not isinstance(children_raw, list) or len(children_raw) < 2:
            problems.append(f"{context}: {key!r} needs at least two children")
            return None
        children = tuple(parse_condition(c, f"{context}.{key}[{i}]", problems)
                         for i, c in enumerate(children_raw))
        if any(c is None for c in children):
            return None
        return AllOf(children) if key == "all" else AnyOf(children)  # type: ignore[arg-type]
    if "not" in raw:
        child = parse_condition(raw["not"], f"{context}.not", problems)
        return Negation(child) if child is not None else None
    problems.append(f"{context}: unknown condition operator in {sorted(raw)}")
    return None


def condition_to_json(condition: Condition) -> dict:
    if isinstance(condition, TimeCondition):
        return {"time": condition.threshold_s}
    if isinstance(condition, EventCondition):
        return {"event": condition.event, "count": condition.count}
    if isinstance(condition, AllOf):
        return {"all": [condition_to_json(c) for c in condition.children]}
    if isinstance(condition, AnyOf):
        return {"any": [condition_to_json(c) for c in condition.children]}
    if isinstance(condition, Negation):
        return {"not": condition_to_json(condition.child)}
    raise TypeError(f"not a condition: {condition!r}")
