"""Infrastructure graph: machines, routers, connections, and path math."""

from fogrig.infra.catalog import MachineCatalogEntry, NoMatchingTypeError, TypeAssignment, select_machine_type
from fogrig.infra.document import parse_infrastructure, serialize_infrastructure
from fogrig.infra.model import (
    Connection,
    ConnectionProperties,
    InfrastructureModel,
    InfrastructureError,
    MachineSpec,
)
from fogrig.infra.overlay import InfraUpdate, LinkOverride, MachineOverride, ModelOverlay
from fogrig.infra.paths import EffectivePathProperties, aggregate_links, effective_properties

__all__ = [
    "Connection",
    "ConnectionProperties",
    "EffectivePathProperties",
    "InfraUpdate",
    "InfrastructureError",
    "InfrastructureModel",
    "LinkOverride",
    "MachineCatalogEntry",
    "MachineOverride",
    "MachineSpec",
    "ModelOverlay",
    "NoMatchingTypeError",
    "TypeAssignment",
    "aggregate_links",
    "effective_properties",
    "parse_infrastructure",
    "select_machine_type",
    "serialize_infrastructure",
]
