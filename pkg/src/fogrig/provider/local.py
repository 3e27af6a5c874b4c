"""Local-process provider: every machine is an agent process on loopback.

Desk-scale substitute for a cloud integration. Bootstrap reserves distinct
management (TCP) and application (UDP) ports per machine, creates the
machine working directory and a credentials token, and maps the machine spec
onto the provider's catalog. Agent installation spawns one
``python -m fogrig.agent`` process per machine with the proxy shaper
backend; a crashed agent is respawned with fresh ports and a refreshed
handle. Destroy terminates agents and any container processes recorded
under the machine directories, then deletes the credentials.
"""

from __future__ import annotations

import json
import logging
import socket
import subprocess
import sys
import time
import uuid
from pathlib import Path

import psutil
import requests

from fogrig import units
from fogrig.infra.catalog import MachineCatalogEntry, select_machine_type
from fogrig.infra.model import InfrastructureModel
from fogrig.provider.base import (
    DestroyReport,
    MachineHandle,
    Provider,
    ProviderDescriptor,
    ProvisioningError,
)

log = logging.getLogger(__name__)

LOCAL_CATALOG = (
    MachineCatalogEntry(10, "local-nano", 0.5, units.mb_to_bytes(512), units.mb_to_bytes(4096)),
    MachineCatalogEntry(20, "local-small", 1, units.mb_to_bytes(2048), units.mb_to_bytes(16384)),
    MachineCatalogEntry(30, "local-medium", 2, units.mb_to_bytes(4096), units.mb_to_bytes(32768)),
    MachineCatalogEntry(40, "local-large", 4, units.mb_to_bytes(8192), units.mb_to_bytes(65536)),
    MachineCatalogEntry(50, "local-xlarge", 16, units.mb_to_bytes(32768), units.mb_to_bytes(262144)),
)

_HOST = "127.0.0.1"


def _reserve_port(kind: int) -> int:
    with socket.socket(socket.AF_INET, kind) as sock:
        sock.bind((_HOST, 0))
        return sock.getsockname()[1]


class LocalProcessProvider(Provider):
    name = "local"

    def __init__(self, root: Path, agent_boot_timeout_s: float = 15.0):
        self.root = Path(root)
        self.machines_dir = self.root / "machines"
        self.agent_boot_timeout_s = agent_boot_timeout_s

    def descriptor(self) -> ProviderDescriptor:
        return ProviderDescriptor(name=self.name, catalog=LOCAL_CATALOG, supports_real_shaping=False)

    # -- bootstrap -----------------------------------------------------------

    def bootstrap(self, model: InfrastructureModel,
                  existing: dict[str, MachineHandle] | None = None) -> dict[str, MachineHandle]:
        if not model.machine_ids:
            raise ProvisioningError("the model declares no machines to provision")
        handles = dict(existing or {})
        for machine_id in model.machine_ids:
            if machine_id in handles:
                continue
            assignment = select_machine_type(model.machine(machine_id), list(LOCAL_CATALOG))
            workdir = self.machines_dir / machine_id
            workdir.mkdir(parents=True, exist_ok=True)
            credentials = workdir / "credentials"
            credentials.write_text(uuid.uuid4().hex + "\n", encoding="utf-8")
            mgmt_port = _reserve_port(socket.SOCK_STREAM)
            app_port = _reserve_port(socket.SOCK_DGRAM)
            handles[machine_id] = MachineHandle(
                machine_id=machine_id,
                application_address=f"{_HOST}:{app_port}",
                management_address=f"{_HOST}:{mgmt_port}",
                credentials_ref=str(credentials),
                provider_type=assignment.entry.type_name,
                provider_data={
                    "workdir": str(workdir),
                    "surplus_cpu_cores": assignment.surplus_cpu_cores,
                    "surplus_memory_bytes": assignment.surplus_memory_bytes,
                },
            )
        # Drop handles for machines no longer in the model (model changed on disk).
        for stale in set(handles) - set(model.machine_ids):
            del handles[stale]
        return handles

    # -- agents ---------------------------------------------------------------

    def install_agents(self, model: InfrastructureModel,
                       handles: dict[str, MachineHandle]) -> dict[str, MachineHandle]:
        failures = []
        for machine_id in sorted(handles):
            handle = handles[machine_id]
            if self.probe(handle):
                continue
            try:
                handles[machine_id] = self._spawn(handle)
            except ProvisioningError as exc:
                failures.append(f"{machine_id}: {exc}")
        if failures:
            raise ProvisioningError("agent installation failed on: " + "; ".join(failures))
        return handles

    def _spawn(self, handle: MachineHandle) -> MachineHandle:
        workdir = Path(handle.provider_data["workdir"])
        workdir.mkdir(parents=True, exist_ok=True)
        # A dead agent's ports may linger; refresh the handle with new ones.
        mgmt_port = _reserve_port(socket.SOCK_STREAM)
        app_port = _reserve_port(socket.SOCK_DGRAM)
        ready_file = workdir / "agent-ready.json"
        ready_file.unlink(missing_ok=True)

        console = open(workdir / "agent-console.log", "ab")
        command = [
            sys.executable, "-m", "fogrig.agent",
            "--id", handle.machine_id,
            "--host", _HOST,
            "--port", str(mgmt_port),
            "--app-port", str(app_port),
            "--backend", "proxy",
            "--workdir", str(workdir),
            "--ready-file", str(ready_file),
        ]
        process = subprocess.Popen(command, stdout=console, stderr=console)
        console.close()

        deadline = time.monotonic() + self.agent_boot_timeout_s
        management_address = f"{_HOST}:{mgmt_port}"
        while time.monotonic() < deadline:
            if process.poll() is not None:
                raise ProvisioningError(
                    f"agent for {handle.machine_id!r} exited with {process.returncode} "
                    f"(see {workdir / 'agent-console.log'})")
            if ready_file.is_file() and self._status_ok(management_address):
                handle.provider_data["pid"] = process.pid
                handle.application_address = f"{_HOST}:{app_port}"
                handle.management_address = management_address
                return handle
            time.sleep(0.05)
        process.terminate()
        raise ProvisioningError(f"agent for {handle.machine_id!r} did not become ready in time")

    @staticmethod
    def _status_ok(management_address: str) -> bool:
        try:
            response = requests.get(f"http://{management_address}/status", timeout=1.0)
            return response.status_code == 200
        except requests.RequestException:
            return False

    def probe(self, handle: MachineHandle) -> bool:
        pid = handle.provider_data.get("pid")
        if pid is None or not psutil.pid_exists(pid):
            return False
        return self._status_ok(handle.management_address)

    # -- teardown ---------------------------------------------------------------

    def destroy(self, handles: dict[str, MachineHandle]) -> DestroyReport:
        report = DestroyReport()
        for machine_id in sorted(handles):
            handle = handles[machine_id]
            pid = handle.provider_data.get("pid")
            if pid is not None:
                self._terminate(pid, report, f"agent {machine_id}")
            workdir = Path(handle.provider_data.get("workdir", self.machines_dir / machine_id))
            for meta_path in workdir.glob("containers/*/meta.json"):
                try:
                    container_pid = json.loads(meta_path.read_text(encoding="utf-8")).get("pid")
                except (OSError, ValueError):
                    continue
                if container_pid:
                    self._terminate(container_pid, report, f"container {meta_path.parent.name}")
            credentials = Path(handle.credentials_ref)
            if credentials.is_file():
                credentials.unlink()
                report.released.append(f"credentials {machine_id}")
        return report

    @staticmethod
    def _terminate(pid: int, report: DestroyReport, label: str) -> None:
        try:
            process = psutil.Process(pid)
        except psutil.NoSuchProcess:
            return
        try:
            process.terminate()
            process.wait(timeout=3.0)
        except psutil.TimeoutExpired:
            process.kill()
            try:
                process.wait(timeout=2.0)
            except psutil.TimeoutExpired:
                report.problems.append(f"{label} (pid {pid}) survived SIGKILL")
                return
        except psutil.NoSuchProcess:
            pass
        report.released.append(label)
