"""Deployment-side lifecycle operations.

All operations aggregate per-machine results deterministically (sorted by
machine id) and keep going on per-machine failures where the contract allows
partial success; ``prepare`` aborts on pull failures because starting without
images cannot succeed.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from fogrig.apps.config import ApplicationConfig, ContainerConfig, DeploymentError, ResolverExpression
from fogrig.apps.runtime import (
    ContainerRuntime,
    ContainerRuntimeError,
    ImagePullError,
    StartedContainer,
    StartFailure,
)
from fogrig.infra.model import MachineSpec

log = logging.getLogger(__name__)


@dataclass
class MachineReport:
    machine: str
    ok: bool = True
    details: list[str] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)


@dataclass
class OperationReport:
    machines: dict[str, MachineReport] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(report.ok for report in self.machines.values())

    def machine(self, machine: str) -> MachineReport:
        if machine not in self.machines:
            self.machines[machine] = MachineReport(machine)
        return self.machines[machine]

    def sorted_reports(self) -> list[MachineReport]:
        return [self.machines[m] for m in sorted(self.machines)]


@dataclass
class StartReport(OperationReport):
    started: dict[str, StartedContainer] = field(default_factory=dict)  # "container@machine"


@dataclass
class CollectReport(OperationReport):
    destination: Path | None = None


def resolve_env(config: ContainerConfig, app: ApplicationConfig,
                addresses: Mapping[str, str]) -> dict[str, str]:
    """Resolve a container's env map to pure literals.

    ``ip_of`` yields one machine address; ``ips_of_container`` the
    comma-joined addresses of all machines hosting that container, sorted
    by machine id. Pure function of its inputs.
    """
    resolved = {}
    for name, value in config.env.items():
        if isinstance(value, str):
            resolved[name] = value
            continue
        assert isinstance(value, ResolverExpression)
        if value.function == "ip_of":
            if value.argument not in addresses:
                raise DeploymentError([f"env {name!r}: unknown machine {value.argument!r}"])
            resolved[name] = addresses[value.argument]
        elif value.function == "ips_of_container":
            machines = app.machines_for(value.argument)
            if not machines:
                reason = ("is deployed nowhere" if any(c.name == value.argument for c in app.containers)
                          else "does not exist")
                raise DeploymentError([f"env {name!r}: container {value.argument!r} {reason}"])
            missing = [m for m in machines if m not in addresses]
            if missing:
                raise DeploymentError([f"env {name!r}: no address for machines {missing}"])
            resolved[name] = ",".join(addresses[m] for m in machines)
        else:
            raise DeploymentError([f"env {name!r}: unknown resolver {value.function!r}"])
    return resolved


def build_upload_manifest(app: ApplicationConfig, base_dir: Path) -> dict[str, list[tuple[str, Path, str]]]:
    """Per-machine list of (container, local dir, remote dir) uploads."""
    manifest: dict[str, list[tuple[str, Path, str]]] = {}
    for machine, container_name in app.placements():
        items = manifest.setdefault(machine, [])
        for copy_dir in app.container(container_name).copy_dirs:
            items.append((container_name, base_dir / copy_dir.local, copy_dir.remote))
    return {machine: manifest[machine] for machine in sorted(manifest)}


def prepare_files(app: ApplicationConfig, runtime: ContainerRuntime, base_dir: Path) -> OperationReport:
    """Upload copy_dirs and pull images; aborts the run on any pull failure."""
    manifest = build_upload_manifest(app, base_dir)
    missing = sorted({str(local) for items in manifest.values()
                      for _, local, _ in items if not local.is_dir()})
    if missing:
        raise DeploymentError([f"local copy_dir does not exist: {path}" for path in missing])

    report = OperationReport()
    pull_failures = []
    for machine in sorted(manifest):
        machine_report = report.machine(machine)
        images = sorted({app.container(name).image for name, _, _ in manifest[machine]}
                        | {c.image for c in app.containers_on(machine)})
        for image in images:
            try:
                runtime.pull(machine, image)
                machine_report.details.append(f"pulled {image}")
            except ImagePullError as exc:
                machine_report.ok = False
                machine_report.errors.append(str(exc))
                pull_failures.append(f"{machine}: {exc}")
        for container_name, local, remote in manifest[machine]:
            runtime.upload(machine, container_name, local, remote)
            machine_report.details.append(f"uploaded {local} -> {container_name}:{remote}")
    if pull_failures:
        raise DeploymentError([f"image pull failed, aborting: {failure}" for failure in pull_failures])
    return report


def start_containers(app: ApplicationConfig, runtime: ContainerRuntime,
                     addresses: Mapping[str, str],
                     machine_specs: Mapping[str, MachineSpec],
                     extra_env: Mapping[str, str] | None = None) -> StartReport:
    """Start every mapped container with resolved env, args, and limits.

    Limits default to the machine's modeled capacity, hiding any surplus the
    provider's machine type has over the spec; explicit deployment limits
    narrow them further.
    """
    report = StartReport()
    for machine, container_name in app.placements():
        machine_report = report.machine(machine)
        config = app.container(container_name)
        env = resolve_env(config, app, addresses)
        if extra_env:
            env.update(extra_env)
        limits = _effective_limits(app, machine_specs, config.name, machine)
        try:
            started = runtime.start(machine, config, env, limits)
        except StartFailure as exc:
            machine_report.ok = False
            machine_report.errors.append(f"{exc} | output: {exc.output}")
            continue
        report.started[f"{container_name}@{machine}"] = started
        machine_report.details.append(f"started {container_name} ({started.handle})")
    return report


def _effective_limits(app: ApplicationConfig, machine_specs: Mapping[str, MachineSpec],
                      container: str, machine: str) -> tuple[float, int] | None:
    spec = machine_specs.get(machine)
    declared = app.limits_for(container, machine)
    if spec is None and declared is None:
        return None
    cpu = declared.cpu_cores if declared and declared.cpu_cores is not None else None
    memory = declared.memory_bytes if declared and declared.memory_bytes is not None else None
    if spec is not None:
        cpu = min(cpu, spec.cpu_cores) if cpu is not None else spec.cpu_cores
        memory = min(memory, spec.memory_bytes) if memory is not None else spec.memory_bytes
    return (float(cpu), int(memory))


def stop_containers(app: ApplicationConfig, runtime: ContainerRuntime) -> OperationReport:
    """Stop all mapped containers; stopping the already-stopped succeeds."""
    report = OperationReport()
    for machine, container_name in app.placements():
        machine_report = report.machine(machine)
        try:
            runtime.stop(machine, container_name)
            machine_report.details.append(f"stopped {container_name}")
        except ContainerRuntimeError as exc:
            machine_report.ok = False
            machine_report.errors.append(str(exc))
    return report


def collect_results(app: ApplicationConfig, runtime: ContainerRuntime,
                    destination: Path) -> CollectReport:
    """Fetch copy_dir contents and agent logs into results/<machine>/<container>/.

    Unreachable machines yield partial results plus an error entry; the rest
    of the collection proceeds.
    """
    report = CollectReport(destination=destination)
    for machine, container_name in app.placements():
        machine_report = report.machine(machine)
        container_dest = destination / machine / container_name
        container_dest.mkdir(parents=True, exist_ok=True)
        for copy_dir in app.container(container_name).copy_dirs:
            try:
                runtime.fetch_dir(machine, container_name, copy_dir.remote, container_dest)
                machine_report.details.append(f"collected {container_name}:{copy_dir.remote}")
            except ContainerRuntimeError as exc:
                machine_report.ok = False
                machine_report.errors.append(str(exc))
    for machine in sorted({machine for machine, _ in app.placements()}):
        if runtime.fetch_agent_log(machine, destination / machine / "agent.log"):
            report.machine(machine).details.append("collected agent.log")
    return report
