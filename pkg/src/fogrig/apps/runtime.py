"""Container runtime implementations behind one narrow interface.

``ProcessRuntime`` embodies containers as local processes for the desk-scale
provider: an image reference ``process:<python.module>`` runs that module,
the container's filesystem is a per-(machine, container) directory, and
metadata lands in ``meta.json`` where the agent can see it. ``DockerCliRuntime``
drives a local container engine through its CLI. ``RecordingRuntime`` is the
test stub; it records every call and can inject failures.
"""

from __future__ import annotations

import json
import os
import shutil
import subprocess
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol, Sequence

import psutil

from fogrig.apps.config import ContainerConfig


class ContainerRuntimeError(RuntimeError):
    """Base for runtime failures; carries the machine for reporting."""

    def __init__(self, machine: str, message: str):
        self.machine = machine
        super().__init__(message)


class ImagePullError(ContainerRuntimeError):
    pass


class StartFailure(ContainerRuntimeError):
    def __init__(self, machine: str, container: str, message: str, output: str = ""):
        self.container = container
        self.output = output
        super().__init__(machine, message)


@dataclass
class StartedContainer:
    machine: str
    name: str
    handle: str  # pid or engine container id
    control_url: str | None = None


class ContainerRuntime(Protocol):
    def pull(self, machine: str, image: str) -> None: ...

    def upload(self, machine: str, container: str, local: Path, remote: str) -> None: ...

    def start(self, machine: str, config: ContainerConfig, env: dict[str, str],
              limits: tuple[float, int] | None) -> StartedContainer: ...

    def stop(self, machine: str, name: str) -> None: ...

    def update_limits(self, machine: str, name: str, cpu_cores: float, memory_bytes: int) -> None: ...

    def fetch_dir(self, machine: str, container: str, remote: str, destination: Path) -> None: ...

    def fetch_agent_log(self, machine: str, destination: Path) -> bool: ...

    def status(self, machine: str, name: str) -> str: ...


def _free_port() -> int:
    import socket

    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


class ProcessRuntime:
    """Containers as supervised local processes under a machine directory."""

    IMAGE_PREFIX = "process:"
    START_GRACE_S = 0.35

    def __init__(self, machines_root: Path):
        self.machines_root = Path(machines_root)

    # -- directory layout ---------------------------------------------------

    def machine_dir(self, machine: str) -> Path:
        return self.machines_root / machine

    def container_dir(self, machine: str, name: str) -> Path:
        return self.machine_dir(machine) / "containers" / name

    def fs_root(self, machine: str, name: str) -> Path:
        return self.container_dir(machine, name) / "fs"

    def _remote_to_local(self, machine: str, name: str, remote: str) -> Path:
        return self.fs_root(machine, name) / remote.lstrip("/")

    # -- runtime interface ----------------------------------------------------

    def pull(self, machine: str, image: str) -> None:
        if not image.startswith(self.IMAGE_PREFIX):
            raise ImagePullError(machine, f"process runtime cannot run image {image!r}; "
                                          f"expected '{self.IMAGE_PREFIX}<module>'")
        module = image[len(self.IMAGE_PREFIX):]
        import importlib.util

        try:
            spec = importlib.util.find_spec(module)
        except (ImportError, ValueError):
            spec = None
        if spec is None:
            raise ImagePullError(machine, f"module {module!r} for image {image!r} not importable")

    def upload(self, machine: str, container: str, local: Path, remote: str) -> None:
        destination = self._remote_to_local(machine, container, remote)
        destination.mkdir(parents=True, exist_ok=True)
        shutil.copytree(local, destination, dirs_exist_ok=True)

    def start(self, machine: str, config: ContainerConfig, env: dict[str, str],
              limits: tuple[float, int] | None) -> StartedContainer:
        module = config.image[len(self.IMAGE_PREFIX):]
        container_dir = self.container_dir(machine, config.name)
        fs_root = self.fs_root(machine, config.name)
        fs_root.mkdir(parents=True, exist_ok=True)

        control_port = config.control_port or _free_port()
        process_env = dict(os.environ)
        process_env.update(env)
        process_env.update({
            "FOGRIG_MACHINE": machine,
            "FOGRIG_CONTAINER": config.name,
            "FOGRIG_CONTROL_PORT": str(control_port),
            "FOGRIG_FS_ROOT": str(fs_root),
        })

        stdout = open(container_dir / "stdout.log", "ab")
        stderr = open(container_dir / "stderr.log", "ab")
        command = [sys.executable, "-m", module, *config.args]
        process = subprocess.Popen(command, cwd=fs_root, env=process_env,
                                   stdout=stdout, stderr=stderr)
        stdout.close()
        stderr.close()

        time.sleep(self.START_GRACE_S)
        if process.poll() is not None:
            tail = (container_dir / "stderr.log").read_text(encoding="utf-8", errors="replace")[-2000:]
            raise StartFailure(machine, config.name,
                               f"container {config.name!r} exited immediately "
                               f"with code {process.returncode}", output=tail)

        meta = {
            "name": config.name,
            "machine": machine,
            "image": config.image,
            "args": list(config.args),
            "pid": process.pid,
            "control_port": control_port,
            "started_at": time.time(),
        }
        (container_dir / "meta.json").write_text(json.dumps(meta, indent=2), encoding="utf-8")
        if limits is not None:
            self.update_limits(machine, config.name, limits[0], limits[1])
        return StartedContainer(machine=machine, name=config.name, handle=str(process.pid),
                                control_url=f"http://127.0.0.1:{control_port}")

    def stop(self, machine: str, name: str) -> None:
        meta_path = self.container_dir(machine, name) / "meta.json"
        if not meta_path.is_file():
            return
        pid = json.loads(meta_path.read_text(encoding="utf-8")).get("pid")
        if pid is None:
            return
        try:
            process = psutil.Process(pid)
        except psutil.NoSuchProcess:
            return
        process.terminate()
        try:
            process.wait(timeout=2.0)
        except psutil.TimeoutExpired:
            process.kill()

    def update_limits(self, machine: str, name: str, cpu_cores: float, memory_bytes: int) -> None:
        # Limits are recorded, not enforced: plain processes have no cgroup here.
        container_dir = self.container_dir(machine, name)
        if not (container_dir / "meta.json").is_file() and not container_dir.is_dir():
            raise ContainerRuntimeError(machine, f"unknown container {name!r}")
        container_dir.mkdir(parents=True, exist_ok=True)
        (container_dir / "limits.json").write_text(json.dumps({
            "cpu_cores": cpu_cores, "memory_bytes": memory_bytes, "updated_at": time.time(),
        }, indent=2), encoding="utf-8")

    def fetch_dir(self, machine: str, container: str, remote: str, destination: Path) -> None:
        source = self._remote_to_local(machine, container, remote)
        destination.mkdir(parents=True, exist_ok=True)
        if not source.is_dir():
            raise ContainerRuntimeError(machine, f"remote directory {remote!r} missing for "
                                         f"{container!r} on {machine!r}")
        shutil.copytree(source, destination, dirs_exist_ok=True)

    def fetch_agent_log(self, machine: str, destination: Path) -> bool:
        log_path = self.machine_dir(machine) / "agent.log"
        if not log_path.is_file():
            return False
        destination.parent.mkdir(parents=True, exist_ok=True)
        shutil.copy2(log_path, destination)
        return True

    def status(self, machine: str, name: str) -> str:
        meta_path = self.container_dir(machine, name) / "meta.json"
        if not meta_path.is_file():
            return "unknown"
        pid = json.loads(meta_path.read_text(encoding="utf-8")).get("pid")
        return "running" if pid is not None and psutil.pid_exists(pid) else "exited"

    def running_pids(self) -> list[int]:
        """Every container pid still alive under this root (teardown audit)."""
        pids = []
        for meta_path in self.machines_root.glob("*/containers/*/meta.json"):
            pid = json.loads(meta_path.read_text(encoding="utf-8")).get("pid")
            if pid is not None and psutil.pid_exists(pid):
                pids.append(pid)
        return pids


class DockerCliRuntime:
    """Thin wrapper over a local container engine CLI.

    Command construction is unit-tested through an injected runner; actually
    using it requires a running engine.
    """

    def __init__(self, runner: Callable[[Sequence[str]], subprocess.CompletedProcess] | None = None,
                 binary: str = "docker", name_prefix: str = "fogrig"):
        self._runner = runner or (lambda cmd: subprocess.run(cmd, capture_output=True, text=True))
        self.binary = binary
        self.name_prefix = name_prefix
        self._staging: dict[tuple[str, str, str], Path] = {}

    def _name(self, machine: str, container: str) -> str:
        return f"{self.name_prefix}-{machine}-{container}"

    def _run(self, machine: str, *command: str, tolerate_failure: bool = False) -> subprocess.CompletedProcess:
        result = self._runner([self.binary, *command])
        if result.returncode != 0 and not tolerate_failure:
            raise ContainerRuntimeError(machine, f"{self.binary} {' '.join(command)} failed: {result.stderr}")
        return result

    def pull(self, machine: str, image: str) -> None:
        result = self._run(machine, "pull", image, tolerate_failure=True)
        if result.returncode != 0:
            raise ImagePullError(machine, f"image pull failed for {image!r}: {result.stderr}")

    def upload(self, machine: str, container: str, local: Path, remote: str) -> None:
        self._staging[(machine, container, remote)] = Path(local)

    def start(self, machine: str, config: ContainerConfig, env: dict[str, str],
              limits: tuple[float, int] | None) -> StartedContainer:
        command = ["run", "-d", "--name", self._name(machine, config.name)]
        if limits is not None:
            command += ["--cpus", str(limits[0]), "--memory", str(limits[1])]
        for key in sorted(env):
            command += ["-e", f"{key}={env[key]}"]
        for (staged_machine, staged_container, remote), local in sorted(self._staging.items()):
            if (staged_machine, staged_container) == (machine, config.name):
                command += ["-v", f"{local.resolve()}:{remote}"]
        command += [config.image, *config.args]
        result = self._run(machine, *command)
        return StartedContainer(machine=machine, name=config.name,
                                handle=result.stdout.strip(), control_url=None)

    def stop(self, machine: str, name: str) -> None:
        self._run(machine, "rm", "-f", self._name(machine, name), tolerate_failure=True)

    def update_limits(self, machine: str, name: str, cpu_cores: float, memory_bytes: int) -> None:
        self._run(machine, "update", "--cpus", str(cpu_cores),
                  "--memory", str(memory_bytes), self._name(machine, name))

    def fetch_dir(self, machine: str, container: str, remote: str, destination: Path) -> None:
        destination.mkdir(parents=True, exist_ok=True)
        self._run(machine, "cp", f"{self._name(machine, container)}:{remote}/.", str(destination))

    def fetch_agent_log(self, machine: str, destination: Path) -> bool:
        return False

    def status(self, machine: str, name: str) -> str:
        result = self._run(machine, "inspect", "-f", "{{.State.Status}}",
                           self._name(machine, name), tolerate_failure=True)
        return result.stdout.strip() or "unknown"


@dataclass
class RecordingRuntime:
    """Records calls; optionally injects failures per machine or container."""

    calls: list[tuple] = field(default_factory=list)
    fail_pull: set[str] = field(default_factory=set)          # machine ids
    fail_start: set[str] = field(default_factory=set)         # container names
    fail_fetch: set[str] = field(default_factory=set)         # machine ids
    running: dict[tuple[str, str], StartedContainer] = field(default_factory=dict)
    _pid: int = 41000

    def pull(self, machine: str, image: str) -> None:
        self.calls.append(("pull", machine, image))
        if machine in self.fail_pull:
            raise ImagePullError(machine, f"injected pull failure on {machine}")

    def upload(self, machine: str, container: str, local: Path, remote: str) -> None:
        self.calls.append(("upload", machine, container, str(local), remote))

    def start(self, machine: str, config: ContainerConfig, env: dict[str, str],
              limits: tuple[float, int] | None) -> StartedContainer:
        self.calls.append(("start", machine, config.name, dict(env), limits))
        if config.name in self.fail_start:
            raise StartFailure(machine, config.name, "injected start failure", output="boom")
        self._pid += 1
        started = StartedContainer(machine=machine, name=config.name, handle=str(self._pid),
                                   control_url=f"http://127.0.0.1:{20000 + self._pid % 1000}")
        self.running[(machine, config.name)] = started
        return started

    def stop(self, machine: str, name: str) -> None:
        self.calls.append(("stop", machine, name))
        self.running.pop((machine, name), None)

    def update_limits(self, machine: str, name: str, cpu_cores: float, memory_bytes: int) -> None:
        self.calls.append(("update_limits", machine, name, cpu_cores, memory_bytes))

    def fetch_dir(self, machine: str, container: str, remote: str, destination: Path) -> None:
        self.calls.append(("fetch_dir", machine, container, remote, str(destination)))
        if machine in self.fail_fetch:
            raise ContainerRuntimeError(machine, f"injected fetch failure on {machine}")
        destination.mkdir(parents=True, exist_ok=True)

    def fetch_agent_log(self, machine: str, destination: Path) -> bool:
        self.calls.append(("fetch_agent_log", machine, str(destination)))
        return False

    def status(self, machine: str, name: str) -> str:
        return "running" if (machine, name) in self.running else "unknown"
