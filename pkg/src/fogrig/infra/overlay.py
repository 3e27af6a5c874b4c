"""Runtime changes layered over a pristine infrastructure model.

States of an experiment schedule accumulate changes (link property
overrides, downed links, machine capacity caps, partitions) in a
:class:`ModelOverlay`. Applying the overlay yields a new model; a reset
simply drops the overlay, restoring exactly what was initially defined.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable

from fogrig.infra.model import Connection, InfrastructureError, InfrastructureModel, MachineSpec

Partition = str | tuple[str, str]


@dataclass(frozen=True)
class MachineOverride:
    """Capacity cap for one machine; ``memory_scale`` is relative to pristine."""

    machine: str
    cpu_cores: float | None = None
    memory_bytes: int | None = None
    memory_scale: float | None = None


@dataclass(frozen=True)
class LinkOverride:
    """Property overrides for one connection; ``None`` keeps the pristine value."""

    endpoint_a: str
    endpoint_b: str
    down: bool = False
    rate_bps: float | None = None
    delay_ms: float | None = None
    dispersion_ms: float | None = None
    loss: float | None = None
    corruption: float | None = None
    reorder: float | None = None
    duplicate: float | None = None

    @property
    def pair(self) -> tuple[str, str]:
        return tuple(sorted((self.endpoint_a, self.endpoint_b)))  # type: ignore[return-value]


@dataclass(frozen=True)
class InfraUpdate:
    """One state's infrastructure action: optional reset plus new overrides."""

    reset: bool = False
    machines: tuple[MachineOverride, ...] = ()
    links: tuple[LinkOverride, ...] = ()
    partitions: tuple[Partition, ...] = ()

    @property
    def empty(self) -> bool:
        return not (self.reset or self.machines or self.links or self.partitions)


def normalize_partition(value: Partition) -> Partition:
    if isinstance(value, str):
        return value
    pair = tuple(sorted(value))
    if len(pair) != 2 or pair[0] == pair[1]:
        raise ValueError(f"a partition pair needs two distinct machines, got {value!r}")
    return pair  # type: ignore[return-value]


@dataclass(frozen=True)
class ModelOverlay:
    """Accumulated runtime changes; immutable, merged copy-on-write."""

    machine_overrides: tuple[MachineOverride, ...] = ()
    link_overrides: tuple[LinkOverride, ...] = ()
    partitions: frozenset[Partition] = field(default_factory=frozenset)

    @property
    def empty(self) -> bool:
        return not (self.machine_overrides or self.link_overrides or self.partitions)

    def merge(self, update: InfraUpdate) -> "ModelOverlay":
        """Layer one update on top; ``reset`` starts from the pristine model."""
        base = EMPTY_OVERLAY if update.reset else self
        machine_overrides = {o.machine: o for o in base.machine_overrides}
        for override in update.machines:
            machine_overrides[override.machine] = _merge_machine(
                machine_overrides.get(override.machine), override)
        link_overrides = {o.pair: o for o in base.link_overrides}
        for override in update.links:
            link_overrides[override.pair] = _merge_link(link_overrides.get(override.pair), override)
        partitions = set(base.partitions)
        partitions.update(normalize_partition(p) for p in update.partitions)
        return ModelOverlay(
            machine_overrides=tuple(machine_overrides[k] for k in sorted(machine_overrides)),
            link_overrides=tuple(link_overrides[k] for k in sorted(link_overrides)),
            partitions=frozenset(partitions),
        )

    def apply(self, model: InfrastructureModel) -> InfrastructureModel:
        """Produce the effective model. Raises on overrides naming unknown nodes."""
        problems = [f"override names unknown machine {o.machine!r}"
                    for o in self.machine_overrides if o.machine not in model.by_id]
        known_pairs = {c.pair for c in model.connections}
        problems.extend(f"override names unknown connection {o.pair!r}"
                        for o in self.link_overrides if o.pair not in known_pairs)
        for partition in self.partitions:
            names = (partition,) if isinstance(partition, str) else partition
            problems.extend(f"partition names unknown machine {name!r}"
                            for name in names if name not in model.by_id)
        if problems:
            raise InfrastructureError(problems)

        nodes = tuple(self._adjusted_machine(node) for node in model.nodes)
        links = {o.pair: o for o in self.link_overrides}
        connections = []
        for connection in model.connections:
            override = links.get(connection.pair)
            if override is None:
                connections.append(connection)
            elif not override.down:
                connections.append(Connection(*connection.pair, _adjusted_properties(connection, override)))
        return InfrastructureModel(nodes, tuple(connections))

    def _adjusted_machine(self, node: MachineSpec) -> MachineSpec:
        override = next((o for o in self.machine_overrides if o.machine == node.id), None)
        if override is None or not node.is_machine:
            return node
        memory = node.memory_bytes
        if override.memory_scale is not None:
            memory = int(round(memory * override.memory_scale))
        if override.memory_bytes is not None:
            memory = override.memory_bytes
        return replace(
            node,
            cpu_cores=override.cpu_cores if override.cpu_cores is not None else node.cpu_cores,
            memory_bytes=memory,
        )

    def partitioned_peers(self, machine: str, others: Iterable[str]) -> set[str]:
        """Peers of ``machine`` that must be rendered unreachable."""
        cut: set[str] = set()
        singletons = {p for p in self.partitions if isinstance(p, str)}
        pairs = {p for p in self.partitions if not isinstance(p, str)}
        for other in others:
            if machine in singletons or other in singletons:
                cut.add(other)
            elif tuple(sorted((machine, other))) in pairs:
                cut.add(other)
        return cut


def _merge_machine(base: MachineOverride | None, update: MachineOverride) -> MachineOverride:
    if base is None:
        return update
    return MachineOverride(
        machine=update.machine,
        cpu_cores=update.cpu_cores if update.cpu_cores is not None else base.cpu_cores,
        memory_bytes=update.memory_bytes if update.memory_bytes is not None else base.memory_bytes,
        memory_scale=update.memory_scale if update.memory_scale is not None else base.memory_scale,
    )


def _merge_link(base: LinkOverride | None, update: LinkOverride) -> LinkOverride:
    if base is None:
        return update
    merged = {}
    for name in ("rate_bps", "delay_ms", "dispersion_ms", "loss", "corruption", "reorder", "duplicate"):
        value = getattr(update, name)
        merged[name] = value if value is not None else getattr(base, name)
    return LinkOverride(update.endpoint_a, update.endpoint_b, down=update.down or base.down, **merged)


def _adjusted_properties(connection: Connection, override: LinkOverride):
    props = connection.properties
    values = {}
    for name in ("rate_bps", "delay_ms", "dispersion_ms", "loss", "corruption", "reorder", "duplicate"):
        value = getattr(override, name)
        values[name] = value if value is not None else getattr(props, name)
    return replace(props, **values)


EMPTY_OVERLAY = ModelOverlay()
