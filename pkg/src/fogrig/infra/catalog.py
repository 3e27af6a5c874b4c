"""Machine-type catalogs and spec-to-type mapping.

Providers that only offer fixed machine sizes expose a catalog; each machine
spec is mapped to the cheapest entry that satisfies it. The surplus of the
chosen type over the spec is recorded so container limits can hide it later.
"""

from __future__ import annotations

from dataclasses import dataclass

from fogrig.infra.model import MachineSpec

_DIMENSIONS = ("cpu_cores", "memory_bytes", "storage_bytes")


class NoMatchingTypeError(LookupError):
    def __init__(self, spec_id: str, binding: list[str]):
        self.binding_dimensions = binding
        detail = ", ".join(binding) if binding else "combined requirements"
        super().__init__(f"no catalog entry satisfies machine {spec_id!r} (binding: {detail})")


@dataclass(frozen=True, order=True)
class MachineCatalogEntry:
    cost_rank: int
    type_name: str
    cpu_cores: float
    memory_bytes: int
    storage_bytes: int

    def satisfies(self, spec: MachineSpec) -> bool:
        return (self.cpu_cores >= spec.cpu_cores
                and self.memory_bytes >= spec.memory_bytes
                and self.storage_bytes >= spec.storage_bytes)


@dataclass(frozen=True)
class TypeAssignment:
    """A chosen catalog entry plus the surplus to hide at runtime."""

    spec_id: str
    entry: MachineCatalogEntry
    surplus_cpu_cores: float
    surplus_memory_bytes: int
    surplus_storage_bytes: int

    @property
    def exact(self) -> bool:
        return (self.surplus_cpu_cores == 0
                and self.surplus_memory_bytes == 0
                and self.surplus_storage_bytes == 0)


def validate_catalog(catalog: list[MachineCatalogEntry]) -> None:
    if not catalog:
        raise ValueError("machine catalog must not be empty")
    ranks = [entry.cost_rank for entry in catalog]
    if len(set(ranks)) != len(ranks):
        raise ValueError("catalog cost_rank values must strictly order the entries")


def select_machine_type(spec: MachineSpec, catalog: list[MachineCatalogEntry]) -> TypeAssignment:
    """Pick the lowest-cost_rank entry that covers the spec in every dimension."""
    validate_catalog(catalog)
    for entry in sorted(catalog):
        if entry.satisfies(spec):
            return TypeAssignment(
                spec_id=spec.id,
                entry=entry,
                surplus_cpu_cores=entry.cpu_cores - spec.cpu_cores,
                surplus_memory_bytes=entry.memory_bytes - spec.memory_bytes,
                surplus_storage_bytes=entry.storage_bytes - spec.storage_bytes,
            )
    binding = [dim for dim in _DIMENSIONS
               if all(getattr(entry, dim) < getattr(spec, dim) for entry in catalog)]
    raise NoMatchingTypeError(spec.id, binding)
