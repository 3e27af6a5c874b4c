"""Per-agent impairment planning and shaper-script rendering."""

from fogrig.netplan.plan import (
    AgentNetworkConfig,
    BaselineMeasurement,
    ImpairmentSpec,
    PlanResult,
    build_agent_configs,
    compensate_delay,
    config_from_wire,
    config_to_wire,
)
from fogrig.netplan.render import render_impairment_table, render_shaper_script

__all__ = [
    "AgentNetworkConfig",
    "BaselineMeasurement",
    "ImpairmentSpec",
    "PlanResult",
    "build_agent_configs",
    "compensate_delay",
    "config_from_wire",
    "config_to_wire",
    "render_impairment_table",
    "render_shaper_script",
]
