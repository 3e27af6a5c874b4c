"""End-to-end path properties between machines.

Routing picks the delay-weighted shortest path (routers may appear as
interior nodes). The remaining characteristics are aggregated along that
path, not optimized independently:

* delay and dispersion: sum of the link values
* rate: minimum link rate
* each probability: ``p = 1 - prod(1 - p_i)`` over the links

Ties between equal-delay paths are broken by the lexicographically smallest
node-id sequence. To keep results symmetric, the search always runs in the
canonical direction (smaller endpoint id first); the reported path is
reversed for the caller when needed, so ``effective_properties(a, b)`` and
``effective_properties(b, a)`` agree in every aggregate and traverse the
same nodes.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, replace
from typing import Iterable

from fogrig.infra.model import ConnectionProperties, InfrastructureModel


@dataclass(frozen=True)
class EffectivePathProperties:
    """Aggregated characteristics of the chosen path between two machines.

    An unreachable pair (possible only after runtime changes take links down)
    is reported with an empty path, infinite delay, zero rate, and loss 1.0.
    """

    source: str
    target: str
    path: tuple[str, ...]
    delay_ms: float
    rate_bps: float
    dispersion_ms: float
    loss: float
    corruption: float
    reorder: float
    duplicate: float

    @property
    def reachable(self) -> bool:
        return bool(self.path)

    @classmethod
    def identity(cls, node: str) -> "EffectivePathProperties":
        return cls(node, node, (node,), 0.0, math.inf, 0.0, 0.0, 0.0, 0.0, 0.0)

    @classmethod
    def unreachable(cls, source: str, target: str) -> "EffectivePathProperties":
        return cls(source, target, (), math.inf, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0)


def combine_probabilities(values: Iterable[float]) -> float:
    """Probability that an independent per-link event hits at least once."""
    survival = 1.0
    for value in values:
        survival *= 1.0 - value
    return 1.0 - survival


def aggregate_links(source: str, target: str, path: tuple[str, ...],
                    links: Iterable[ConnectionProperties]) -> EffectivePathProperties:
    """Fold per-link properties into end-to-end path properties."""
    links = list(links)
    return EffectivePathProperties(
        source=source,
        target=target,
        path=path,
        delay_ms=sum(link.delay_ms for link in links),
        rate_bps=min((link.rate_bps for link in links), default=math.inf),
        dispersion_ms=sum(link.dispersion_ms for link in links),
        loss=combine_probabilities(link.loss for link in links),
        corruption=combine_probabilities(link.corruption for link in links),
        reorder=combine_probabilities(link.reorder for link in links),
        duplicate=combine_probabilities(link.duplicate for link in links),
    )


def shortest_path(model: InfrastructureModel, source: str, target: str) -> tuple[str, ...] | None:
    """Delay-weighted shortest path from ``source`` to ``target``.

    Dijkstra over (delay, node-sequence) labels: comparing the sequence as a
    secondary key yields the lexicographically smallest path among equal-delay
    candidates. Returns ``None`` when no path exists.
    """
    if source == target:
        return (source,)
    best: dict[str, tuple[float, tuple[str, ...]]] = {}
    frontier: list[tuple[float, tuple[str, ...], str]] = [(0.0, (source,), source)]
    settled: set[str] = set()
    while frontier:
        delay, path, node = heapq.heappop(frontier)
        if node in settled:
            continue
        settled.add(node)
        if node == target:
            return path
        for connection in model.adjacency.get(node, ()):
            neighbor = connection.other(node)
            if neighbor in settled:
                continue
            label = (delay + connection.properties.delay_ms, path + (neighbor,))
            if neighbor not in best or label < best[neighbor]:
                best[neighbor] = label
                heapq.heappush(frontier, (label[0], label[1], neighbor))
    return None


def effective_properties(model: InfrastructureModel, source: str, target: str) -> EffectivePathProperties:
    """End-to-end properties between two machines.

    Both endpoints must be machines; routers cannot terminate a path. The
    identity pair gets zero delay, unbounded rate, and zero probabilities.
    """
    model.machine(source)
    model.machine(target)
    if source == target:
        return EffectivePathProperties.identity(source)

    canonical_source, canonical_target = sorted((source, target))
    path = shortest_path(model, canonical_source, canonical_target)
    if path is None:
        return EffectivePathProperties.unreachable(source, target)

    links = []
    for a, b in zip(path, path[1:]):
        connection = model.connection_between(a, b)
        assert connection is not None
        links.append(connection.properties)
    result = aggregate_links(canonical_source, canonical_target, path, links)
    if source != canonical_source:
        result = replace(result, source=source, target=target, path=tuple(reversed(path)))
    return result


def all_pair_properties(model: InfrastructureModel) -> dict[tuple[str, str], EffectivePathProperties]:
    """Effective properties for every ordered machine pair."""
    results: dict[tuple[str, str], EffectivePathProperties] = {}
    machines = model.machine_ids
    for i, a in enumerate(machines):
        for b in machines[i + 1:]:
            forward = effective_properties(model, a, b)
            results[(a, b)] = forward
            results[(b, a)] = replace(forward, source=b, target=a, path=tuple(reversed(forward.path)))
    return results
