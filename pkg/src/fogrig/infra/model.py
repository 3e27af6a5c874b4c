"""Immutable infrastructure graph types and whole-model validation.

All types here are frozen; a model is safe to share across threads. Runtime
changes are expressed by building a new model (see :mod:`fogrig.infra.overlay`),
never by mutation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Literal

NodeKind = Literal["machine", "router"]

_PROBABILITY_FIELDS = ("loss", "corruption", "reorder", "duplicate")


class InfrastructureError(ValueError):
    """Raised when a model violates its invariants.

    Validation is total: ``violations`` lists every problem found, not just
    the first one.
    """

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


@dataclass(frozen=True)
class MachineSpec:
    """A vertex of the infrastructure graph.

    Routers only forward traffic; their compute fields are ignored and they
    may never appear in a deployment mapping.
    """

    id: str
    kind: NodeKind = "machine"
    cpu_cores: float = 0.0
    memory_bytes: int = 0
    storage_bytes: int = 0

    @property
    def is_machine(self) -> bool:
        return self.kind == "machine"

    def violations(self) -> list[str]:
        problems = []
        if not self.id or not isinstance(self.id, str):
            problems.append(f"node id must be a non-empty string, got {self.id!r}")
        if self.kind not in ("machine", "router"):
            problems.append(f"node {self.id!r}: unknown kind {self.kind!r}")
        if self.kind == "machine":
            if self.cpu_cores <= 0:
                problems.append(f"machine {self.id!r}: cpu_cores must be > 0, got {self.cpu_cores}")
            if self.memory_bytes <= 0:
                problems.append(f"machine {self.id!r}: memory must be > 0, got {self.memory_bytes}")
            if self.storage_bytes < 0:
                problems.append(f"machine {self.id!r}: storage must be >= 0, got {self.storage_bytes}")
        return problems


@dataclass(frozen=True)
class ConnectionProperties:
    """Per-link network characteristics.

    ``delay_ms`` is one-way latency; figures quoted as round trips must be
    halved on ingestion. ``dispersion_ms`` is the +/- spread around the mean
    delay. The four probabilities are in [0, 1].
    """

    rate_bps: float
    delay_ms: float
    dispersion_ms: float = 0.0
    loss: float = 0.0
    corruption: float = 0.0
    reorder: float = 0.0
    duplicate: float = 0.0

    def violations(self, context: str = "connection") -> list[str]:
        problems = []
        if not (self.rate_bps > 0 and math.isfinite(self.rate_bps)):
            problems.append(f"{context}: rate must be finite and > 0, got {self.rate_bps}")
        if self.delay_ms < 0:
            problems.append(f"{context}: delay must be >= 0, got {self.delay_ms}")
        if self.dispersion_ms < 0:
            problems.append(f"{context}: dispersion must be >= 0, got {self.dispersion_ms}")
        for name in _PROBABILITY_FIELDS:
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                problems.append(f"{context}: {name} must be within [0, 1], got {value}")
        return problems


@dataclass(frozen=True)
class Connection:
    """An undirected link with symmetric properties.

    Endpoints are stored in sorted order so a pair has one canonical form.
    """

    endpoint_a: str
    endpoint_b: str
    properties: ConnectionProperties

    def __post_init__(self) -> None:
        if self.endpoint_b < self.endpoint_a:
            a, b = self.endpoint_a, self.endpoint_b
            object.__setattr__(self, "endpoint_a", b)
            object.__setattr__(self, "endpoint_b", a)

    @property
    def pair(self) -> tuple[str, str]:
        return (self.endpoint_a, self.endpoint_b)

    def other(self, node_id: str) -> str:
        return self.endpoint_b if node_id == self.endpoint_a else self.endpoint_a


@dataclass(frozen=True)
class InfrastructureModel:
    """The validated infrastructure graph."""

    nodes: tuple[MachineSpec, ...]
    connections: tuple[Connection, ...] = field(default=())

    @classmethod
    def build(cls, nodes: Iterable[MachineSpec], connections: Iterable[Connection]) -> "InfrastructureModel":
        """Construct and validate a model, reporting every violation at once."""
        model = cls(tuple(nodes), tuple(connections))
        violations = model.violations()
        if violations:
            raise InfrastructureError(violations)
        return model

    @cached_property
    def by_id(self) -> dict[str, MachineSpec]:
        return {node.id: node for node in self.nodes}

    @cached_property
    def machine_ids(self) -> tuple[str, ...]:
        return tuple(sorted(node.id for node in self.nodes if node.is_machine))

    @cached_property
    def adjacency(self) -> dict[str, tuple[Connection, ...]]:
        adjacency: dict[str, list[Connection]] = {node.id: [] for node in self.nodes}
        for connection in self.connections:
            if connection.endpoint_a in adjacency and connection.endpoint_b in adjacency:
                adjacency[connection.endpoint_a].append(connection)
                adjacency[connection.endpoint_b].append(connection)
        return {node: tuple(links) for node, links in adjacency.items()}

    def machine(self, node_id: str) -> MachineSpec:
        spec = self.by_id.get(node_id)
        if spec is None or not spec.is_machine:
            raise KeyError(f"no machine named {node_id!r} in the model")
        return spec

    def connection_between(self, a: str, b: str) -> Connection | None:
        lo, hi = sorted((a, b))
        for connection in self.connections:
            if connection.pair == (lo, hi):
                return connection
        return None

    def violations(self) -> list[str]:
        problems: list[str] = []
        seen: set[str] = set()
        for node in self.nodes:
            problems.extend(node.violations())
            if node.id in seen:
                problems.append(f"duplicate node id {node.id!r}")
            seen.add(node.id)

        pairs: set[tuple[str, str]] = set()
        for connection in self.connections:
            label = f"connection {connection.endpoint_a!r}-{connection.endpoint_b!r}"
            for endpoint in connection.pair:
                if endpoint not in seen:
                    problems.append(f"{label}: unknown endpoint {endpoint!r}")
            if connection.endpoint_a == connection.endpoint_b:
                problems.append(f"{label}: self-loops are not allowed")
            if connection.pair in pairs:
                problems.append(f"{label}: duplicate connection for this pair")
            pairs.add(connection.pair)
            problems.extend(connection.properties.violations(label))

        if not problems:
            problems.extend(self._connectivity_violations())
        return problems

    def _connectivity_violations(self) -> list[str]:
        # Every pair of machines must be joined by some path; routers may sit
        # in between. A singleton machine is trivially connected.
        machines = [node.id for node in self.nodes if node.is_machine]
        if len(machines) <= 1:
            return []
        reached = {machines[0]}
        frontier = [machines[0]]
        while frontier:
            current = frontier.pop()
            for connection in self.adjacency.get(current, ()):
                neighbor = connection.other(current)
                if neighbor not in reached:
                    reached.add(neighbor)
                    frontier.append(neighbor)
        stranded = sorted(m for m in machines if m not in reached)
        return [f"machine {m!r} is disconnected from the rest of the graph" for m in stranded]
