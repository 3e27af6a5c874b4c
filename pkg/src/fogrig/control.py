"""Manager-side control plane glue.

Everything here talks over the management network: agent REST calls, the
per-state infrastructure controller (overlay merge, config fan-out, limit
updates, acknowledgment collection), and the application channel delivering
commands and phase broadcasts to container control endpoints.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping

import requests

from fogrig.apps.config import ApplicationConfig
from fogrig.infra.model import InfrastructureModel, MachineSpec
from fogrig.infra.overlay import EMPTY_OVERLAY, InfraUpdate, ModelOverlay
from fogrig.netplan.plan import AgentNetworkConfig, BaselineMeasurement, build_agent_configs, config_to_wire

log = logging.getLogger(__name__)


class AgentRequestError(RuntimeError):
    def __init__(self, machine: str, message: str):
        self.machine = machine
        super().__init__(f"agent {machine!r}: {message}")


class AgentClient:
    """Typed HTTP client for one agent's management endpoint."""

    def __init__(self, machine_id: str, management_address: str, timeout_s: float = 10.0):
        self.machine_id = machine_id
        self.base_url = f"http://{management_address}"
        self.timeout_s = timeout_s
        self._session = requests.Session()

    def _request(self, method: str, path: str, payload: dict | None = None,
                 timeout_s: float | None = None) -> dict:
        try:
            response = self._session.request(method, self.base_url + path, json=payload,
                                             timeout=timeout_s or self.timeout_s)
        except requests.RequestException as exc:
            raise AgentRequestError(self.machine_id, f"{method} {path} failed: {exc}") from exc
        if response.status_code >= 400:
            raise AgentRequestError(
                self.machine_id, f"{method} {path} -> {response.status_code}: {response.text}")
        return response.json()

    def status(self) -> dict:
        return self._request("GET", "/status")

    def ping(self, targets: list[str], samples: int = 10, timeout_ms: float = 500.0) -> list[dict]:
        # Probing can take samples * timeout per dead target; stretch the HTTP timeout.
        http_timeout = max(self.timeout_s, samples * timeout_ms / 1000.0 * len(targets) + 5.0)
        body = {"targets": targets, "samples": samples, "timeout_ms": timeout_ms}
        return self._request("POST", "/ping", body, timeout_s=http_timeout)["reports"]

    def put_network(self, config: AgentNetworkConfig) -> dict:
        return self._request("PUT", "/network", config_to_wire(config))

    def get_network(self) -> dict:
        return self._request("GET", "/network")

    def put_limits(self, limits: list[dict]) -> dict:
        return self._request("PUT", "/limits", {"limits": limits})


@dataclass
class InfrastructureController:
    """Applies schedule infrastructure updates to the live testbed.

    Holds the pristine model and the accumulated overlay; every update
    recomputes all agent configs from the effective model and pushes them in
    parallel, returning only after every agent acknowledged. Machine capacity
    overrides translate into container limit updates on the affected agents.
    """

    model: InfrastructureModel
    clients: Mapping[str, AgentClient]
    addresses: Mapping[str, str]
    baselines: list[BaselineMeasurement] = field(default_factory=list)
    app: ApplicationConfig | None = None
    overlay: ModelOverlay = EMPTY_OVERLAY
    revision: int = 0

    def apply_update(self, update: InfraUpdate) -> list[str]:
        self.overlay = self.overlay.merge(update)
        effective = self.overlay.apply(self.model)
        self.revision += 1
        plan = build_agent_configs(effective, self.addresses, self.baselines,
                                   sorted(self.overlay.partitions, key=str),
                                   revision=self.revision)
        warnings = list(plan.warnings)
        self._push_configs(plan.configs)
        warnings.extend(self._push_limits(update, effective))
        return warnings

    def reset(self) -> list[str]:
        return self.apply_update(InfraUpdate(reset=True))

    def _push_configs(self, configs: Mapping[str, AgentNetworkConfig]) -> None:
        def push(machine: str) -> dict:
            return self.clients[machine].put_network(configs[machine])

        with ThreadPoolExecutor(max_workers=min(16, max(1, len(configs)))) as pool:
            futures = {machine: pool.submit(push, machine) for machine in sorted(configs)}
            failures = []
            for machine, future in futures.items():
                try:
                    future.result()
                except AgentRequestError as exc:
                    failures.append(str(exc))
            if failures:
                raise AgentRequestError("*", "unacknowledged infrastructure update: "
                                        + "; ".join(failures))

    def _push_limits(self, update: InfraUpdate, effective: InfrastructureModel) -> list[str]:
        """Propagate machine capacity changes as container resource limits."""
        if self.app is None:
            return []
        touched = {override.machine for override in update.machines}
        if update.reset:
            touched |= {machine for machine, _ in self.app.placements()}
        warnings = []
        for machine in sorted(touched):
            containers = self.app.containers_on(machine)
            if not containers or machine not in self.clients:
                continue
            spec = effective.by_id.get(machine)
            if spec is None:
                continue
            limits = [{"container": c.name, **_capped_limits(self.app, c.name, machine, spec)}
                      for c in containers]
            try:
                self.clients[machine].put_limits(limits)
            except AgentRequestError as exc:
                # Limits target containers; missing ones mean the app is not
                # deployed (yet), which must not fail a pure network update.
                warnings.append(str(exc))
        return warnings


def _capped_limits(app: ApplicationConfig, container: str, machine: str,
                   spec: MachineSpec) -> dict:
    declared = app.limits_for(container, machine)
    cpu = spec.cpu_cores
    memory = spec.memory_bytes
    if declared is not None:
        if declared.cpu_cores is not None:
            cpu = min(declared.cpu_cores, cpu)
        if declared.memory_bytes is not None:
            memory = min(declared.memory_bytes, memory)
    return {"cpu_cores": cpu, "memory_bytes": memory}


class AppControl:
    """Delivers commands and phase broadcasts to container control endpoints."""

    def __init__(self, app: ApplicationConfig, instances: Mapping[str, dict],
                 timeout_s: float = 5.0):
        self.app = app
        self.instances = dict(instances)  # "container@machine" -> {control_url, ...}
        self.timeout_s = timeout_s

    def _instances_for(self, target: str) -> list[tuple[str, str]]:
        """(instance key, control url) for a container name or machine id."""
        matches = []
        for key, info in sorted(self.instances.items()):
            container, _, machine = key.partition("@")
            if target in (container, machine) and info.get("control_url"):
                matches.append((key, info["control_url"]))
        return matches

    def send_command(self, target: str, payload: dict) -> None:
        instances = self._instances_for(target)
        if not instances:
            raise AgentRequestError(target, "no running instance matches this command target")
        for key, url in instances:
            response = requests.post(f"{url}/command", json=payload, timeout=self.timeout_s)
            if response.status_code >= 400:
                raise AgentRequestError(key, f"command rejected: {response.status_code}")

    def broadcast(self, state: str, payload: dict) -> list[str]:
        """Notify every subscribed container; failures are reported, not fatal."""
        warnings = []
        recipients = [(key, info["control_url"]) for key, info in sorted(self.instances.items())
                      if info.get("notify") and info.get("control_url")]
        for key, url in recipients:
            try:
                requests.post(f"{url}/notify", json={"state": state, "payload": payload},
                              timeout=self.timeout_s)
            except requests.RequestException as exc:
                warnings.append(f"broadcast to {key} failed: {exc}")
        return warnings


def measure_all_baselines(clients: Mapping[str, AgentClient],
                          addresses: Mapping[str, str],
                          samples: int = 3, timeout_ms: float = 400.0) -> list[BaselineMeasurement]:
    """Ping each unordered machine pair once (from the lower id's agent)."""
    machines = sorted(addresses)
    measurements = []
    for i, machine in enumerate(machines):
        peers = machines[i + 1:]
        if not peers:
            continue
        reports = clients[machine].ping([addresses[peer] for peer in peers],
                                        samples=samples, timeout_ms=timeout_ms)
        for peer, report in zip(peers, reports):
            rtt = report.get("rtt_avg_ms")
            if rtt is not None:
                measurements.append(BaselineMeasurement(machine, peer, rtt))
    return measurements
