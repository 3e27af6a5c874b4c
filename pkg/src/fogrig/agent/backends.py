"""Shaper backends the agent can drive.

``proxy`` shapes traffic in-process (portable, used by the local provider
and CI), ``command-script`` executes rendered traffic-control commands
(Linux, requires privileges), and ``noop`` only records what it would run.
Each apply is reset-then-apply: the previous rules are fully replaced.
"""

from __future__ import annotations

import logging
import subprocess
from typing import Callable, Protocol, Sequence

from fogrig.agent.appnet import AppPlane
from fogrig.netplan.plan import AgentNetworkConfig

log = logging.getLogger(__name__)


class BackendError(RuntimeError):
    """A backend failed to apply a config; the agent rolls back."""


class ShaperBackend(Protocol):
    name: str

    def apply(self, config: AgentNetworkConfig, script: Sequence[str]) -> None: ...

    def reset(self) -> None: ...


class ProxyBackend:
    name = "proxy"

    def __init__(self, plane: AppPlane):
        self.plane = plane

    def apply(self, config: AgentNetworkConfig, script: Sequence[str]) -> None:
        self.plane.apply_entries(config.entries)

    def reset(self) -> None:
        self.plane.clear()


class CommandScriptBackend:
    """Runs the rendered script through the system traffic-control utility."""

    name = "command-script"

    def __init__(self, runner: Callable[[Sequence[str]], subprocess.CompletedProcess] | None = None):
        self._runner = runner or self._default_runner

    @staticmethod
    def _default_runner(command: Sequence[str]) -> subprocess.CompletedProcess:
        return subprocess.run(command, capture_output=True, text=True)

    def apply(self, config: AgentNetworkConfig, script: Sequence[str]) -> None:
        for index, line in enumerate(script):
            result = self._runner(line.split())
            # The teardown preamble may fail when no qdisc exists yet.
            if result.returncode != 0 and index > 0:
                raise BackendError(
                    f"command failed ({result.returncode}): {line}\n{result.stderr}")

    def reset(self) -> None:
        log.debug("command-script reset is expressed through the next script's preamble")


class NoopBackend:
    """Dry run: accepts everything, applies nothing."""

    name = "noop"

    def __init__(self):
        self.applied_scripts: list[list[str]] = []

    def apply(self, config: AgentNetworkConfig, script: Sequence[str]) -> None:
        self.applied_scripts.append(list(script))

    def reset(self) -> None:
        self.applied_scripts.append([])
