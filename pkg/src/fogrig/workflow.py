"""End-to-end testbed workflows shared by the CLI and integration tests.

A testbed lives in one root directory: the state file, per-machine working
directories, and collected results. Every function here loads or persists
:class:`~fogrig.provider.base.TestbedState` so separate invocations compose.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

from fogrig.apps.config import ApplicationConfig
from fogrig.apps.manager import (
    CollectReport,
    OperationReport,
    StartReport,
    collect_results,
    prepare_files,
    start_containers,
    stop_containers,
)
from fogrig.apps.runtime import ProcessRuntime
from fogrig.control import AgentClient, AppControl, InfrastructureController, measure_all_baselines
from fogrig.infra.model import InfrastructureModel
from fogrig.infra.overlay import InfraUpdate
from fogrig.orchestration.clock import Clock, WallClock
from fogrig.orchestration.events import DEFAULT_EVENTS_PORT, EventSink
from fogrig.orchestration.runner import ExperimentTrace, ScheduleRunner
from fogrig.orchestration.schedule import OrchestrationSchedule
from fogrig.provider.base import (
    Provider,
    ProvisioningError,
    TestbedState,
    load_state,
    model_fingerprint,
    save_state,
)
from fogrig.provider.local import LocalProcessProvider

log = logging.getLogger(__name__)


@dataclass
class Workspace:
    """Paths of one testbed instance."""

    state_path: Path

    @property
    def root(self) -> Path:
        return self.state_path.parent

    @property
    def machines_dir(self) -> Path:
        return self.root / "machines"

    @property
    def results_dir(self) -> Path:
        return self.root / "results"

    def load(self) -> TestbedState:
        if not self.state_path.is_file():
            raise ProvisioningError(f"no testbed state at {self.state_path}; run bootstrap first")
        return load_state(self.state_path)

    def save(self, state: TestbedState) -> None:
        save_state(state, self.state_path)

    def provider(self, name: str = "local") -> Provider:
        if name != "local":
            raise ProvisioningError(
                f"provider {name!r} is not built in; only 'local' ships with this package")
        return LocalProcessProvider(self.root)

    def runtime(self) -> ProcessRuntime:
        return ProcessRuntime(self.machines_dir)


def bootstrap(workspace: Workspace, model: InfrastructureModel, provider: Provider) -> TestbedState:
    """Allocate machines (idempotent) and persist the resulting state."""
    existing = None
    if workspace.state_path.is_file():
        previous = load_state(workspace.state_path)
        if previous.lifecycle != "destroyed":
            existing = previous.handles
    handles = provider.bootstrap(model, existing=existing)
    state = TestbedState(provider=provider.name, model_hash=model_fingerprint(model),
                         handles=handles)
    state.advance("bootstrapped")
    workspace.save(state)
    return state


def install_agents(workspace: Workspace, model: InfrastructureModel, provider: Provider,
                   measure_baselines: bool = True) -> TestbedState:
    state = workspace.load()
    _check_model(state, model)
    state.handles = provider.install_agents(model, state.handles)
    state.advance("agents-installed")
    if measure_baselines:
        clients = agent_clients(state)
        addresses = application_addresses(state)
        state.baselines = measure_all_baselines(clients, addresses)
    workspace.save(state)
    return state


def destroy(workspace: Workspace, provider: Provider):
    state = workspace.load()
    report = provider.destroy(state.handles)
    state.advance("destroyed")
    workspace.save(state)
    return report


def agent_clients(state: TestbedState) -> dict[str, AgentClient]:
    return {machine_id: AgentClient(machine_id, handle.management_address)
            for machine_id, handle in state.handles.items()}


def application_addresses(state: TestbedState) -> dict[str, str]:
    return {machine_id: handle.application_address
            for machine_id, handle in state.handles.items()}


def infrastructure_controller(state: TestbedState, model: InfrastructureModel,
                              app: ApplicationConfig | None = None) -> InfrastructureController:
    return InfrastructureController(
        model=model,
        clients=agent_clients(state),
        addresses=application_addresses(state),
        baselines=state.baselines,
        app=app,
    )


def modify_network(workspace: Workspace, model: InfrastructureModel,
                   update: InfraUpdate, app: ApplicationConfig | None = None) -> list[str]:
    state = workspace.load()
    _check_model(state, model)
    controller = infrastructure_controller(state, model, app)
    # Continue from where previous modifications left the agents.
    controller.revision = max((client.status()["applied_revision"]
                               for client in controller.clients.values()), default=0)
    return controller.apply_update(update)


def app_prepare(workspace: Workspace, app: ApplicationConfig, app_dir: Path) -> OperationReport:
    workspace.load()  # asserts a bootstrapped testbed exists
    return prepare_files(app, workspace.runtime(), app_dir)


def app_start(workspace: Workspace, model: InfrastructureModel, app: ApplicationConfig,
              events_port: int = DEFAULT_EVENTS_PORT) -> StartReport:
    state = workspace.load()
    _check_model(state, model)
    report = start_containers(
        app, workspace.runtime(), application_addresses(state),
        {machine_id: model.machine(machine_id) for machine_id in model.machine_ids},
        extra_env={"FOGRIG_MANAGER_URL": f"http://127.0.0.1:{events_port}/events"},
    )
    state.events_port = events_port
    for key, started in report.started.items():
        config = app.container(started.name)
        state.app_instances[key] = {
            "machine": started.machine,
            "container": started.name,
            "handle": started.handle,
            "control_url": started.control_url,
            "notify": config.notify,
        }
    state.advance("deployed")
    workspace.save(state)
    return report


def app_stop(workspace: Workspace, app: ApplicationConfig) -> OperationReport:
    state = workspace.load()
    report = stop_containers(app, workspace.runtime())
    state.app_instances = {}
    workspace.save(state)
    return report


def app_collect(workspace: Workspace, app: ApplicationConfig,
                destination: Path | None = None) -> CollectReport:
    workspace.load()
    return collect_results(app, workspace.runtime(), destination or workspace.results_dir)


def orchestrate(workspace: Workspace, model: InfrastructureModel, app: ApplicationConfig,
                schedule: OrchestrationSchedule, trace_path: Path | None = None,
                events_port: int | None = None, clock: Clock | None = None,
                tick_s: float = 0.1) -> ExperimentTrace:
    """Run the schedule against the live testbed.

    Starts the event sink, wires agents and container control endpoints into
    the runner, executes to a terminal state, and writes the trace.
    """
    state = workspace.load()
    _check_model(state, model)
    clients = agent_clients(state)
    unreachable = sorted(machine for machine, client in clients.items()
                         if not _reachable(client))
    if unreachable:
        raise ProvisioningError(f"agents unreachable: {unreachable}; run 'agents install'")

    controller = infrastructure_controller(state, model, app)
    controller.revision = max((client.status()["applied_revision"]
                               for client in clients.values()), default=0)
    apps_channel = AppControl(app, state.app_instances)
    runner = ScheduleRunner(schedule, controller, apps_channel,
                            clock or WallClock(), tick_s=tick_s)
    sink = EventSink(runner.submit_event,
                     port=events_port if events_port is not None
                     else (state.events_port or DEFAULT_EVENTS_PORT)).start()
    try:
        trace = runner.run()
    finally:
        sink.stop()
    trace.write(trace_path or workspace.results_dir / "trace.jsonl")
    return trace


def _reachable(client: AgentClient) -> bool:
    try:
        client.status()
        return True
    except Exception:
        return False


def _check_model(state: TestbedState, model: InfrastructureModel) -> None:
    if state.model_hash != model_fingerprint(model):
        log.warning("infrastructure document differs from the one this testbed was "
                    "bootstrapped with; path math will follow the new document")
