"""Container and deployment configuration.

The application document is JSON with two top-level lists:

``containers``: name, image, optional ``copy_dirs`` ([{local, remote}]),
``env`` (string literals or resolver expressions), ``args``, optional
``notify`` flag (receive phase broadcasts) and ``control_port``.

``deployment``: [{container, machines, limits?}] mapping containers onto
machines, optionally with per-entry cpu/memory limits.

Env values may be resolver expressions instead of literals:
``{"$ip_of": "machine-id"}`` resolves to that machine's address and
``{"$ips_of_container": "name"}`` to the comma-joined addresses of every
machine hosting that container (sorted by machine id). Resolution happens
on the deployment side; containers only ever see literal strings.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

from fogrig.infra.model import InfrastructureModel


class DeploymentError(ValueError):
    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


@dataclass(frozen=True)
class ResolverExpression:
    function: str  # "ip_of" | "ips_of_container"
    argument: str


EnvValue = Union[str, ResolverExpression]


@dataclass(frozen=True)
class CopyDir:
    local: str
    remote: str


@dataclass(frozen=True)
class ContainerConfig:
    name: str
    image: str
    copy_dirs: tuple[CopyDir, ...] = ()
    env: dict[str, EnvValue] = field(default_factory=dict)
    args: tuple[str, ...] = ()
    notify: bool = False
    control_port: int = 0


@dataclass(frozen=True)
class ContainerLimits:
    cpu_cores: float | None = None
    memory_bytes: int | None = None


@dataclass(frozen=True)
class DeploymentEntry:
    container: str
    machines: tuple[str, ...]
    limits: ContainerLimits | None = None


@dataclass(frozen=True)
class ApplicationConfig:
    containers: tuple[ContainerConfig, ...]
    deployment: tuple[DeploymentEntry, ...]

    def container(self, name: str) -> ContainerConfig:
        for config in self.containers:
            if config.name == name:
                return config
        raise KeyError(name)

    def machines_for(self, container: str) -> tuple[str, ...]:
        machines: list[str] = []
        for entry in self.deployment:
            if entry.container == container:
                machines.extend(entry.machines)
        return tuple(sorted(set(machines)))

    def containers_on(self, machine: str) -> tuple[ContainerConfig, ...]:
        # Declaration order of the containers list fixes the start order per machine.
        deployed = {entry.container for entry in self.deployment if machine in entry.machines}
        return tuple(c for c in self.containers if c.name in deployed)

    def limits_for(self, container: str, machine: str) -> ContainerLimits | None:
        for entry in self.deployment:
            if entry.container == container and machine in entry.machines:
                return entry.limits
        return None

    def placements(self) -> list[tuple[str, str]]:
        """(machine, container-name) pairs, machine-id sorted."""
        pairs = []
        for entry in self.deployment:
            for machine in entry.machines:
                pairs.append((machine, entry.container))
        return sorted(set(pairs))


def _parse_env_value(raw, context: str, problems: list[str]) -> EnvValue:
    if isinstance(raw, str):
        return raw
    if isinstance(raw, dict) and len(raw) == 1:
        key, argument = next(iter(raw.items()))
        if key in ("$ip_of", "$ips_of_container") and isinstance(argument, str) and argument:
            return ResolverExpression(function=key.lstrip("$"), argument=argument)
        problems.append(f"{context}: unknown resolver expression {raw!r}")
        return ""
    problems.append(f"{context}: env values must be strings or resolver objects, got {raw!r}")
    return ""


def parse_application(document: str | dict, model: InfrastructureModel | None = None) -> ApplicationConfig:
    """Parse and validate the application document; raises with all violations."""
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise DeploymentError([f"document is not valid JSON: {exc}"]) from exc

    problems: list[str] = []
    containers: list[ContainerConfig] = []
    for index, raw in enumerate(document.get("containers", [])):
        context = f"containers[{index}]"
        name = raw.get("name")
        image = raw.get("image")
        if not isinstance(name, str) or not name:
            problems.append(f"{context}: missing container name")
            continue
        if not isinstance(image, str) or not image:
            problems.append(f"{context}: container {name!r} missing image")
            continue
        copy_dirs = []
        for copy_raw in raw.get("copy_dirs", []):
            remote = copy_raw.get("remote", "")
            if not remote.startswith("/"):
                problems.append(f"{context}: remote path {remote!r} must be absolute")
            copy_dirs.append(CopyDir(local=copy_raw.get("local", ""), remote=remote))
        env = {key: _parse_env_value(value, f"{context}.env[{key}]", problems)
               for key, value in raw.get("env", {}).items()}
        containers.append(ContainerConfig(
            name=name,
            image=image,
            copy_dirs=tuple(copy_dirs),
            env=env,
            args=tuple(str(a) for a in raw.get("args", [])),
            notify=bool(raw.get("notify", False)),
            control_port=int(raw.get("control_port", 0)),
        ))

    names = [c.name for c in containers]
    problems.extend(f"duplicate container name {name!r}"
                    for name in sorted({n for n in names if names.count(n) > 1}))

    deployment: list[DeploymentEntry] = []
    for index, raw in enumerate(document.get("deployment", [])):
        context = f"deployment[{index}]"
        container = raw.get("container")
        machines = raw.get("machines", [])
        if container not in names:
            problems.append(f"{context}: unknown container {container!r}")
            continue
        if not machines:
            problems.append(f"{context}: container {container!r} is deployed to no machines")
        limits = None
        if "limits" in raw:
            raw_limits = raw["limits"]
            memory_mb = raw_limits.get("memory_mb")
            limits = ContainerLimits(
                cpu_cores=raw_limits.get("cpu_cores"),
                memory_bytes=int(memory_mb * 1024 * 1024) if memory_mb is not None else None,
            )
        deployment.append(DeploymentEntry(container=container, machines=tuple(machines), limits=limits))

    config = ApplicationConfig(containers=tuple(containers), deployment=tuple(deployment))
    if model is not None:
        problems.extend(validate_against_model(config, model))
    if problems:
        raise DeploymentError(problems)
    return config


def validate_against_model(config: ApplicationConfig, model: InfrastructureModel) -> list[str]:
    """Deployment closure: every referenced machine exists and is no router."""
    problems = []
    for entry in config.deployment:
        for machine in entry.machines:
            node = model.by_id.get(machine)
            if node is None:
                problems.append(f"deployment of {entry.container!r}: unknown machine {machine!r}")
            elif not node.is_machine:
                problems.append(f"deployment of {entry.container!r}: {machine!r} is a router; "
                                "routers cannot host containers")
            elif entry.limits is not None:
                if entry.limits.cpu_cores is not None and entry.limits.cpu_cores > node.cpu_cores:
                    problems.append(f"deployment of {entry.container!r} on {machine!r}: cpu limit "
                                    f"{entry.limits.cpu_cores} exceeds machine capacity {node.cpu_cores}")
                if entry.limits.memory_bytes is not None and entry.limits.memory_bytes > node.memory_bytes:
                    problems.append(f"deployment of {entry.container!r} on {machine!r}: memory limit "
                                    "exceeds machine capacity")
    for container in config.containers:
        for env_name, value in container.env.items():
            if isinstance(value, ResolverExpression) and value.function == "ip_of":
                node = model.by_id.get(value.argument)
                if node is None or not node.is_machine:
                    problems.append(f"container {container.name!r} env {env_name!r}: "
                                    f"no machine named {value.argument!r}")
    return problems


def load_application(path: str | Path, model: InfrastructureModel | None = None) -> ApplicationConfig:
    return parse_application(Path(path).read_text(encoding="utf-8"), model)
