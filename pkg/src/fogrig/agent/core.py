"""Agent state: applied network configs, revisions, warnings, limits.

Apply and limit operations are serialized through one lock; status and reads
are snapshots. A failing backend apply rolls back to the previous revision's
rules, never leaving the machine half-configured.
"""

from __future__ import annotations

import logging
import threading
import time
from pathlib import Path
from typing import Iterable

from fogrig.agent.backends import BackendError, ShaperBackend
from fogrig.agent.runtime import AgentRuntime, UnknownContainerError
from fogrig.netplan.plan import AgentNetworkConfig
from fogrig.netplan.render import render_impairment_table, render_shaper_script

log = logging.getLogger(__name__)


class StaleRevisionError(ValueError):
    def __init__(self, offered: int, applied: int):
        self.offered = offered
        self.applied = applied
        super().__init__(f"revision {offered} is not newer than applied revision {applied}")


class AgentCore:
    def __init__(self, agent_id: str, backend: ShaperBackend, runtime: AgentRuntime,
                 script_dir: Path | None = None, device: str = "eth0",
                 management_addresses: Iterable[str] = ()):
        self.agent_id = agent_id
        self.backend = backend
        self.runtime = runtime
        self.device = device
        self.management_addresses = tuple(management_addresses)
        self.script_dir = Path(script_dir) if script_dir else None
        self.started_at = time.monotonic()
        self.warnings: list[str] = []
        self._lock = threading.Lock()
        self._applied = AgentNetworkConfig(agent=agent_id, revision=0, entries=())
        self._applied_script: list[str] = []

    # -- status ------------------------------------------------------------

    @property
    def applied_revision(self) -> int:
        return self._applied.revision

    def status(self) -> dict:
        return {
            "agent": self.agent_id,
            "uptime_s": time.monotonic() - self.started_at,
            "applied_revision": self.applied_revision,
            "shaper_backend": self.backend.name,
            "warnings": list(self.warnings),
        }

    # -- network configuration ----------------------------------------------

    def apply_network_config(self, config: AgentNetworkConfig) -> dict:
        """Replace the active rules with ``config`` (reset-then-apply).

        Stale revisions are rejected so manager retries can never reorder
        configuration. The acknowledgment is returned only once the backend
        has activated the new rules.
        """
        with self._lock:
            if config.revision <= self._applied.revision:
                raise StaleRevisionError(config.revision, self._applied.revision)
            script = render_shaper_script(config, device=self.device,
                                          management_addresses=self.management_addresses)
            warnings: list[str] = []
            try:
                self.backend.apply(config, script)
            except BackendError as exc:
                self._rollback(exc)
                raise
            self._applied = config
            self._applied_script = script
            self._persist(config, script)
            return {"revision": config.revision, "warnings": warnings}

    def _rollback(self, cause: BackendError) -> None:
        warning = f"apply of revision failed, rolled back to {self._applied.revision}: {cause}"
        log.warning(warning)
        self.warnings.append(warning)
        try:
            if self._applied.revision == 0:
                self.backend.reset()
            else:
                self.backend.apply(self._applied, self._applied_script)
        except BackendError:
            log.exception("rollback itself failed; machine may be unshaped")
            self.warnings.append("rollback failed; rules may be missing until the next apply")

    def _persist(self, config: AgentNetworkConfig, script: list[str]) -> None:
        if self.script_dir is None:
            return
        self.script_dir.mkdir(parents=True, exist_ok=True)
        stem = f"rev-{config.revision:04d}"
        (self.script_dir / f"{stem}.tc").write_text("\n".join(script) + "\n", encoding="utf-8")
        (self.script_dir / f"{stem}.json").write_text(render_impairment_table(config), encoding="utf-8")

    def network_config(self) -> AgentNetworkConfig:
        return self._applied

    # -- container limits ----------------------------------------------------

    def set_container_limits(self, limits: list[dict]) -> dict:
        with self._lock:
            known = set(self.runtime.container_names())
            unknown = sorted({entry["container"] for entry in limits} - known)
            if unknown:
                raise UnknownContainerError(", ".join(unknown))
            for entry in limits:
                self.runtime.update_limits(entry["container"], float(entry["cpu_cores"]),
                                           int(entry["memory_bytes"]))
            return {"updated": [entry["container"] for entry in limits]}

    def current_limits(self) -> dict[str, dict]:
        return self.runtime.limits()
