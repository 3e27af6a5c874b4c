"""The agent's view of the container runtime on its machine.

With the local provider, containers are processes managed by the deployment
side; the shared ground truth is the machine's working directory, where each
container has a metadata file. Limit updates are written next to it, which
keeps the effective limits queryable from either side.
"""

from __future__ import annotations

import json
import time
from pathlib import Path
from typing import Protocol


class UnknownContainerError(KeyError):
    pass


class AgentRuntime(Protocol):
    def container_names(self) -> list[str]: ...

    def update_limits(self, name: str, cpu_cores: float, memory_bytes: int) -> None: ...

    def limits(self) -> dict[str, dict]: ...


class DirAgentRuntime:
    """Reads the machine directory maintained by the process runtime."""

    def __init__(self, containers_dir: Path):
        self.containers_dir = Path(containers_dir)

    def container_names(self) -> list[str]:
        if not self.containers_dir.is_dir():
            return []
        return sorted(entry.name for entry in self.containers_dir.iterdir()
                      if (entry / "meta.json").is_file())

    def update_limits(self, name: str, cpu_cores: float, memory_bytes: int) -> None:
        if name not in self.container_names():
            raise UnknownContainerError(name)
        limits_path = self.containers_dir / name / "limits.json"
        limits_path.write_text(json.dumps({
            "cpu_cores": cpu_cores,
            "memory_bytes": memory_bytes,
            "updated_at": time.time(),
        }, indent=2), encoding="utf-8")

    def limits(self) -> dict[str, dict]:
        current = {}
        for name in self.container_names():
            limits_path = self.containers_dir / name / "limits.json"
            if limits_path.is_file():
                current[name] = json.loads(limits_path.read_text(encoding="utf-8"))
        return current


class RecordingAgentRuntime:
    """In-memory stand-in for tests."""

    def __init__(self, names: list[str] | None = None):
        self._names = list(names or [])
        self.calls: list[tuple[str, float, int]] = []
        self._limits: dict[str, dict] = {}

    def container_names(self) -> list[str]:
        return sorted(self._names)

    def update_limits(self, name: str, cpu_cores: float, memory_bytes: int) -> None:
        if name not in self._names:
            raise UnknownContainerError(name)
        self.calls.append((name, cpu_cores, memory_bytes))
        self._limits[name] = {"cpu_cores": cpu_cores, "memory_bytes": memory_bytes}

    def limits(self) -> dict[str, dict]:
        return dict(self._limits)
