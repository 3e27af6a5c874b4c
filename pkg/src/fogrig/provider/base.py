"""Provider contract and persisted testbed state.

A provider turns the infrastructure model into reachable machines: one
machine per model node of kind ``machine`` (routers exist only in the path
math and are never provisioned), each with two distinct addresses -- the
application address that experiments impair, and the management address the
control plane talks to, which must always stay vanilla.

Contract for implementations (the conformance suite in the tests exercises
it against the local provider and is reusable):

* ``bootstrap`` allocates resources and returns one handle per machine; it
  is idempotent -- existing valid handles are kept, never duplicated.
* ``install_agents`` makes the agent reachable on every management address;
  dead agents are respawned with refreshed handles.
* ``destroy`` releases everything ``bootstrap`` created, deletes
  credentials, and is safe to call again (and from any lifecycle).

The CLI persists :class:`TestbedState` between invocations; a destroyed
state stays on disk for audit.
"""

from __future__ import annotations

import hashlib
import json
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path

from fogrig.infra.catalog import MachineCatalogEntry
from fogrig.infra.document import serialize_infrastructure
from fogrig.infra.model import InfrastructureModel
from fogrig.netplan.plan import BaselineMeasurement

LIFECYCLE_ORDER = ("new", "bootstrapped", "agents-installed", "deployed", "destroyed")


class ProvisioningError(RuntimeError):
    pass


@dataclass(frozen=True)
class ProviderDescriptor:
    name: str
    catalog: tuple[MachineCatalogEntry, ...]
    supports_real_shaping: bool = False


@dataclass
class MachineHandle:
    machine_id: str
    application_address: str
    management_address: str
    credentials_ref: str
    provider_type: str
    provider_data: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "machine_id": self.machine_id,
            "application_address": self.application_address,
            "management_address": self.management_address,
            "credentials_ref": self.credentials_ref,
            "provider_type": self.provider_type,
            "provider_data": self.provider_data,
        }

    @classmethod
    def from_json(cls, raw: dict) -> "MachineHandle":
        return cls(**raw)


@dataclass
class DestroyReport:
    released: list[str] = field(default_factory=list)
    problems: list[str] = field(default_factory=list)

    @property
    def clean(self) -> bool:
        return not self.problems


@dataclass
class TestbedState:
    provider: str
    model_hash: str
    lifecycle: str = "new"
    handles: dict[str, MachineHandle] = field(default_factory=dict)
    baselines: list[BaselineMeasurement] = field(default_factory=list)
    app_instances: dict[str, dict] = field(default_factory=dict)
    events_port: int | None = None

    def advance(self, lifecycle: str) -> None:
        """Move the lifecycle forward; only 'destroyed' may be reached from anywhere."""
        current = LIFECYCLE_ORDER.index(self.lifecycle)
        target = LIFECYCLE_ORDER.index(lifecycle)
        if lifecycle != "destroyed" and target < current:
            raise ProvisioningError(
                f"lifecycle may not go backward: {self.lifecycle} -> {lifecycle}")
        self.lifecycle = lifecycle

    def to_json(self) -> dict:
        return {
            "version": 1,
            "provider": self.provider,
            "model_hash": self.model_hash,
            "lifecycle": self.lifecycle,
            "handles": {mid: handle.to_json() for mid, handle in sorted(self.handles.items())},
            "baselines": [{"a": b.machine_a, "b": b.machine_b, "rtt_ms": b.rtt_ms}
                          for b in self.baselines],
            "app_instances": self.app_instances,
            "events_port": self.events_port,
        }

    @classmethod
    def from_json(cls, raw: dict) -> "TestbedState":
        return cls(
            provider=raw["provider"],
            model_hash=raw["model_hash"],
            lifecycle=raw["lifecycle"],
            handles={mid: MachineHandle.from_json(h) for mid, h in raw.get("handles", {}).items()},
            baselines=[BaselineMeasurement(b["a"], b["b"], b["rtt_ms"])
                       for b in raw.get("baselines", [])],
            app_instances=raw.get("app_instances", {}),
            events_port=raw.get("events_port"),
        )


def model_fingerprint(model: InfrastructureModel) -> str:
    canonical = json.dumps(serialize_infrastructure(model), sort_keys=True)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def save_state(state: TestbedState, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(state.to_json(), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_state(path: Path) -> TestbedState:
    return TestbedState.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


class Provider(ABC):
    """One emulated machine per model machine; see the module docstring."""

    name: str

    @abstractmethod
    def descriptor(self) -> ProviderDescriptor: ...

    @abstractmethod
    def bootstrap(self, model: InfrastructureModel,
                  existing: dict[str, MachineHandle] | None = None) -> dict[str, MachineHandle]: ...

    @abstractmethod
    def install_agents(self, model: InfrastructureModel,
                       handles: dict[str, MachineHandle]) -> dict[str, MachineHandle]: ...

    @abstractmethod
    def probe(self, handle: MachineHandle) -> bool:
        """Whether the agent answers on the handle's management address."""

    @abstractmethod
    def destroy(self, handles: dict[str, MachineHandle]) -> DestroyReport: ...
