"""The per-machine daemon: REST control surface and traffic shaping."""

from fogrig.agent.core import AgentCore, StaleRevisionError
from fogrig.agent.shaping import ImpairmentPipe, PipeCounters, ShapedDelivery

__all__ = ["AgentCore", "ImpairmentPipe", "PipeCounters", "ShapedDelivery", "StaleRevisionError"]
