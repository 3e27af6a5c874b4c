"""Experiment orchestration: schedule state machine with timed/evented transitions."""

from fogrig.orchestration.clock import Clock, SimulatedClock, WallClock
from fogrig.orchestration.conditions import (
    AllOf,
    AnyOf,
    Condition,
    EventCondition,
    Negation,
    TimeCondition,
    evaluate_condition,
)
from fogrig.orchestration.runner import (
    ApplicationChannel,
    DeadlockError,
    ExperimentTrace,
    InfrastructureChannel,
    OrchestrationAborted,
    ScheduleRunner,
)
from fogrig.orchestration.schedule import (
    OrchestrationSchedule,
    ScheduleError,
    ScheduleState,
    Transition,
    parse_schedule,
    validate_schedule,
)

__all__ = [
    "AllOf",
    "AnyOf",
    "ApplicationChannel",
    "Clock",
    "Condition",
    "DeadlockError",
    "EventCondition",
    "ExperimentTrace",
    "InfrastructureChannel",
    "Negation",
    "OrchestrationAborted",
    "OrchestrationSchedule",
    "ScheduleError",
    "ScheduleRunner",
    "ScheduleState",
    "SimulatedClock",
    "TimeCondition",
    "Transition",
    "WallClock",
    "evaluate_condition",
    "parse_schedule",
    "validate_schedule",
]
