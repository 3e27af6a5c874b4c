"""Translate the effective model into per-agent adjacency configurations.

Each agent receives one entry per other machine describing how traffic
leaving the agent toward that machine must look. Impairments are applied on
egress and keyed by destination, so each direction of a pair is shaped
exactly once, by its sender. Partitioned peers are encoded as 100% loss,
which dominates every other property.

The injected delay compensates for latency the substrate already has: with a
target one-way delay of 10 ms and a measured baseline round trip of 1.4 ms,
the agent injects 9.3 ms. Baselines are measured as round trips (the only
thing observable without clock sync) and halved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

from fogrig.infra.model import InfrastructureModel
from fogrig.infra.overlay import Partition
from fogrig.infra.paths import effective_properties


@dataclass(frozen=True)
class ImpairmentSpec:
    """Egress shaping toward one destination machine.

    ``rate_bps`` of ``None`` means uncapped. ``loss`` of exactly 1.0 marks a
    partition; agents must not deliver anything to that target.
    """

    target: str
    target_address: str
    delay_ms: float = 0.0
    dispersion_ms: float = 0.0
    rate_bps: float | None = None
    loss: float = 0.0
    corruption: float = 0.0
    reorder: float = 0.0
    duplicate: float = 0.0

    @property
    def partitioned(self) -> bool:
        return self.loss >= 1.0


@dataclass(frozen=True)
class AgentNetworkConfig:
    """The adjacency list one agent applies; ``revision`` must strictly increase."""

    agent: str
    revision: int
    entries: tuple[ImpairmentSpec, ...] = ()

    def entry_for(self, target: str) -> ImpairmentSpec | None:
        for entry in self.entries:
            if entry.target == target:
                return entry
        return None


@dataclass(frozen=True)
class BaselineMeasurement:
    """Measured round-trip time between a machine pair, in milliseconds."""

    machine_a: str
    machine_b: str
    rtt_ms: float

    @property
    def pair(self) -> frozenset[str]:
        return frozenset((self.machine_a, self.machine_b))


@dataclass
class PlanResult:
    configs: dict[str, AgentNetworkConfig]
    warnings: list[str] = field(default_factory=list)


def compensate_delay(target_oneway_ms: float, baseline_oneway_ms: float) -> tuple[float, str | None]:
    """Delay to inject so injected + baseline equals the target one-way delay.

    Total function: a baseline above the target clamps to zero and returns a
    warning instead of failing the run.
    """
    if target_oneway_ms < 0 or baseline_oneway_ms < 0:
        raise ValueError("delays must be non-negative")
    injected = target_oneway_ms - baseline_oneway_ms
    if injected < 0:
        return 0.0, (f"baseline one-way delay {baseline_oneway_ms:g} ms already exceeds "
                     f"target {target_oneway_ms:g} ms; injecting 0 ms (target unreachable)")
    return injected, None


def build_agent_configs(
    model: InfrastructureModel,
    addresses: Mapping[str, str],
    baselines: Iterable[BaselineMeasurement] = (),
    partitions: Sequence[Partition] = (),
    revision: int = 1,
) -> PlanResult:
    """Build one adjacency config per machine from the effective model.

    ``model`` is the current (possibly overridden) model; pass the pristine
    model to express a full reset. Pairs left unreachable by downed links and
    pairs or machines named in ``partitions`` get loss 1.0 entries.
    """
    machines = model.machine_ids
    missing_addresses = [m for m in machines if m not in addresses]
    if missing_addresses:
        raise KeyError(f"no address known for machines: {missing_addresses}")

    warnings: list[str] = []
    singletons = {p for p in partitions if isinstance(p, str)}
    pairs = {tuple(sorted(p)) for p in partitions if not isinstance(p, str)}
    for name in sorted(singletons | {m for pair in pairs for m in pair}):
        if name not in model.by_id:
            raise KeyError(f"partition names unknown machine {name!r}")

    baseline_by_pair: dict[frozenset[str], float] = {}
    for measurement in baselines:
        baseline_by_pair[measurement.pair] = measurement.rtt_ms

    configs: dict[str, AgentNetworkConfig] = {}
    for agent in machines:
        entries = []
        for target in machines:
            if target == agent:
                continue
            entries.append(_entry(model, agent, target, addresses[target],
                                  baseline_by_pair, singletons, pairs, warnings))
        configs[agent] = AgentNetworkConfig(agent=agent, revision=revision, entries=tuple(entries))
    return PlanResult(configs=configs, warnings=warnings)


def _entry(model, agent, target, address, baselines, singletons, pairs, warnings) -> ImpairmentSpec:
    partitioned = (agent in singletons or target in singletons
                   or tuple(sorted((agent, target))) in pairs)
    if partitioned:
        return ImpairmentSpec(target=target, target_address=address, loss=1.0)

    path = effective_properties(model, agent, target)
    if not path.reachable:
        warnings.append(f"{agent} -> {target}: no path in the current model; treating as partitioned")
        return ImpairmentSpec(target=target, target_address=address, loss=1.0)

    pair = frozenset((agent, target))
    if pair in baselines:
        baseline_oneway = baselines[pair] / 2.0
    else:
        baseline_oneway = 0.0
        warnings.append(f"no baseline measurement for {min(pair)}<->{max(pair)}; assuming 0 ms")
    injected, warning = compensate_delay(path.delay_ms, baseline_oneway)
    if warning:
        warnings.append(f"{agent} -> {target}: {warning}")
    return ImpairmentSpec(
        target=target,
        target_address=address,
        delay_ms=injected,
        dispersion_ms=path.dispersion_ms,
        rate_bps=None if math.isinf(path.rate_bps) else path.rate_bps,
        loss=path.loss,
        corruption=path.corruption,
        reorder=path.reorder,
        duplicate=path.duplicate,
    )


def config_to_wire(config: AgentNetworkConfig) -> dict:
    """JSON-safe wire form; also the neutral impairment table the proxy consumes."""
    return {
        "agent": config.agent,
        "revision": config.revision,
        "entries": [
            {
                "target": entry.target,
                "target_address": entry.target_address,
                "delay_ms": entry.delay_ms,
                "dispersion_ms": entry.dispersion_ms,
                "rate_bps": entry.rate_bps,
                "loss": entry.loss,
                "corruption": entry.corruption,
                "reorder": entry.reorder,
                "duplicate": entry.duplicate,
            }
            for entry in sorted(config.entries, key=lambda e: e.target)
        ],
    }


def config_from_wire(payload: Mapping) -> AgentNetworkConfig:
    entries = tuple(
        ImpairmentSpec(
            target=raw["target"],
            target_address=raw["target_address"],
            delay_ms=float(raw.get("delay_ms", 0.0)),
            dispersion_ms=float(raw.get("dispersion_ms", 0.0)),
            rate_bps=None if raw.get("rate_bps") is None else float(raw["rate_bps"]),
            loss=float(raw.get("loss", 0.0)),
            corruption=float(raw.get("corruption", 0.0)),
            reorder=float(raw.get("reorder", 0.0)),
            duplicate=float(raw.get("duplicate", 0.0)),
        )
        for raw in payload.get("entries", [])
    )
    return AgentNetworkConfig(agent=payload["agent"], revision=int(payload["revision"]), entries=entries)


def replace_revision(config: AgentNetworkConfig, revision: int) -> AgentNetworkConfig:
    return replace(config, revision=revision)
