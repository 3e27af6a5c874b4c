"""Command-line workflow.

Verbs map 1:1 onto the package operations::

    fogrig bootstrap --infra infra.json
    fogrig agents install
    fogrig network modify --update changes.json | --reset
    fogrig paths show M2 M6 --infra infra.json
    fogrig app prepare|start|stop|collect --app app.json
    fogrig schedule validate --schedule schedule.json
    fogrig orchestrate run --infra ... --app ... --schedule ...
    fogrig destroy

Exit codes: 0 on full success, 1 on runtime failure, 2 on usage errors.
``--json`` switches any command to machine-readable output.
"""

from __future__ import annotations

import json
import logging
import math
import sys
from pathlib import Path

import click

from fogrig import workflow
from fogrig.apps.config import DeploymentError, load_application
from fogrig.infra.document import load_infrastructure
from fogrig.infra.model import InfrastructureError
from fogrig.infra.paths import effective_properties
from fogrig.orchestration.events import DEFAULT_EVENTS_PORT
from fogrig.orchestration.runner import DeadlockError, OrchestrationAborted
from fogrig.orchestration.schedule import ScheduleError, load_schedule, validate_schedule
from fogrig.provider.base import ProvisioningError
from fogrig.workflow import Workspace

DEFAULT_STATE = Path(".fogrig") / "state.json"

_COLLECTED_ERRORS = (InfrastructureError, DeploymentError, ScheduleError)


def _fail(message: str) -> "click.ClickException":
    return click.ClickException(message)


def _emit(as_json: bool, payload: dict, human: str) -> None:
    if as_json:
        click.echo(json.dumps(payload, indent=2, sort_keys=True))
    else:
        click.echo(human)


def _load_model(path: str):
    try:
        return load_infrastructure(path)
    except InfrastructureError as exc:
        raise _fail("invalid infrastructure document:\n  " + "\n  ".join(exc.violations))


state_option = click.option("--state", "state_path", type=click.Path(path_type=Path),
                            default=DEFAULT_STATE, show_default=True,
                            help="testbed state file; its directory holds all testbed data")
json_option = click.option("--json", "as_json", is_flag=True, help="machine-readable output")
infra_option = click.option("--infra", "infra_path", required=True,
                            type=click.Path(exists=True, dir_okay=False),
                            help="infrastructure document")
app_option = click.option("--app", "app_path", required=True,
                          type=click.Path(exists=True, dir_okay=False),
                          help="application document")


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="debug logging")
def main(verbose: bool) -> None:
    """Emulated fog testbed: model, provision, impair, deploy, orchestrate."""
    logging.basicConfig(level=logging.DEBUG if verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")


# -- infrastructure ---------------------------------------------------------


@main.command()
@infra_option
@click.option("--provider", default="local", show_default=True)
@state_option
@json_option
def bootstrap(infra_path: str, provider: str, state_path: Path, as_json: bool) -> None:
    """Provision one emulated machine per modeled machine."""
    model = _load_model(infra_path)
    workspace = Workspace(state_path)
    try:
        state = workflow.bootstrap(workspace, model, workspace.provider(provider))
    except ProvisioningError as exc:
        raise _fail(str(exc))
    handles = {m: {"application": h.application_address, "management": h.management_address,
                   "type": h.provider_type} for m, h in sorted(state.handles.items())}
    _emit(as_json, {"lifecycle": state.lifecycle, "machines": handles},
          f"bootstrapped {len(handles)} machines "
          f"({', '.join(sorted(handles))}); state in {state_path}")


@main.group()
def agents() -> None:
    """Node agent management."""


@agents.command("install")
@infra_option
@click.option("--provider", default="local", show_default=True)
@click.option("--measure-baselines/--no-measure-baselines", default=True, show_default=True,
              help="ping all machine pairs after install for delay compensation")
@state_option
@json_option
def agents_install(infra_path: str, provider: str, measure_baselines: bool,
                   state_path: Path, as_json: bool) -> None:
    """(Re-)install the agent on every machine and wait until reachable."""
    model = _load_model(infra_path)
    workspace = Workspace(state_path)
    try:
        state = workflow.install_agents(workspace, model, workspace.provider(provider),
                                        measure_baselines=measure_baselines)
    except ProvisioningError as exc:
        raise _fail(str(exc))
    _emit(as_json,
          {"lifecycle": state.lifecycle,
           "agents": {m: h.management_address for m, h in sorted(state.handles.items())},
           "baselines": len(state.baselines)},
          f"{len(state.handles)} agents reachable; {len(state.baselines)} baseline pairs measured")


@main.group()
def network() -> None:
    """Runtime network manipulation."""


@network.command("modify")
@infra_option
@click.option("--update", "update_path", type=click.Path(exists=True, dir_okay=False),
              help="JSON file with machines/links/partitions overrides")
@click.option("--reset", "do_reset", is_flag=True, help="restore the pristine model")
@state_option
@json_option
def network_modify(infra_path: str, update_path: str | None, do_reset: bool,
                   state_path: Path, as_json: bool) -> None:
    """Push new impairment configurations derived from the (modified) model."""
    if not update_path and not do_reset:
        raise click.UsageError("pass --update FILE and/or --reset")
    model = _load_model(infra_path)
    from fogrig.orchestration.schedule import parse_infra_update

    raw = json.loads(Path(update_path).read_text(encoding="utf-8")) if update_path else {}
    if do_reset:
        raw["reset"] = True
    problems: list[str] = []
    update = parse_infra_update(raw, "update", problems)
    if problems:
        raise _fail("invalid update document:\n  " + "\n  ".join(problems))
    try:
        warnings = workflow.modify_network(Workspace(state_path), model, update)
    except Exception as exc:
        raise _fail(f"network modification failed: {exc}")
    _emit(as_json, {"applied": True, "warnings": warnings},
          "network configuration applied" + (f" ({len(warnings)} warnings)" if warnings else ""))


@main.command()
@click.option("--provider", default="local", show_default=True)
@state_option
@json_option
def destroy(provider: str, state_path: Path, as_json: bool) -> None:
    """Tear down every provisioned resource; safe to repeat."""
    workspace = Workspace(state_path)
    if not state_path.is_file():
        _emit(as_json, {"destroyed": True, "released": []}, "nothing to destroy")
        return
    report = workflow.destroy(workspace, workspace.provider(provider))
    payload = {"destroyed": report.clean, "released": report.released, "problems": report.problems}
    _emit(as_json, payload,
          f"released {len(report.released)} resources"
          + (f"; problems: {report.problems}" if report.problems else ""))
    if not report.clean:
        sys.exit(1)


# -- path math ----------------------------------------------------------------


@main.group()
def paths() -> None:
    """Effective end-to-end path properties."""


@paths.command("show")
@click.argument("source")
@click.argument("target")
@infra_option
@json_option
def paths_show(source: str, target: str, infra_path: str, as_json: bool) -> None:
    """Print delay, rate, dispersion, and probabilities between two machines."""
    model = _load_model(infra_path)
    try:
        result = effective_properties(model, source, target)
    except KeyError as exc:
        raise _fail(str(exc.args[0]))
    payload = {
        "source": result.source,
        "target": result.target,
        "path": list(result.path),
        "reachable": result.reachable,
        "delay_ms": None if math.isinf(result.delay_ms) else result.delay_ms,
        "rate_bps": None if math.isinf(result.rate_bps) else result.rate_bps,
        "dispersion_ms": result.dispersion_ms,
        "loss": result.loss,
        "corruption": result.corruption,
        "reorder": result.reorder,
        "duplicate": result.duplicate,
    }
    if not result.reachable:
        _emit(as_json, payload, f"{source} -> {target}: unreachable")
        sys.exit(1)
    rate = "unbounded" if payload["rate_bps"] is None else f"{result.rate_bps / 1e6:g} mbit/s"
    _emit(as_json, payload,
          f"{source} -> {target} via {' > '.join(result.path)}\n"
          f"  delay      {result.delay_ms:g} ms\n"
          f"  rate       {rate}\n"
          f"  dispersion {result.dispersion_ms:g} ms\n"
          f"  loss       {result.loss:.6g}\n"
          f"  corruption {result.corruption:.6g}\n"
          f"  reorder    {result.reorder:.6g}\n"
          f"  duplicate  {result.duplicate:.6g}")


# -- application --------------------------------------------------------------


@main.group()
def app() -> None:
    """Container deployment lifecycle."""


def _load_app(app_path: str, model=None):
    try:
        return load_application(app_path, model)
    except DeploymentError as exc:
        raise _fail("invalid application document:\n  " + "\n  ".join(exc.violations))


def _report_payload(report) -> dict:
    return {
        "ok": report.ok,
        "machines": {r.machine: {"ok": r.ok, "details": r.details, "errors": r.errors}
                     for r in report.sorted_reports()},
    }


def _finish_report(report, as_json: bool, verb: str) -> None:
    _emit(as_json, _report_payload(report),
          f"{verb} {'succeeded' if report.ok else 'FAILED'} on "
          f"{sum(r.ok for r in report.sorted_reports())}/{len(report.machines)} machines")
    if not report.ok:
        sys.exit(1)


@app.command("prepare")
@app_option
@state_option
@json_option
def app_prepare(app_path: str, state_path: Path, as_json: bool) -> None:
    """Upload application directories and pull images."""
    config = _load_app(app_path)
    try:
        report = workflow.app_prepare(Workspace(state_path), config, Path(app_path).parent)
    except (DeploymentError, ProvisioningError) as exc:
        raise _fail(str(exc))
    _finish_report(report, as_json, "prepare")


@app.command("start")
@app_option
@infra_option
@click.option("--events-port", type=int, default=DEFAULT_EVENTS_PORT, show_default=True,
              help="orchestrator event endpoint the application will report to")
@state_option
@json_option
def app_start(app_path: str, infra_path: str, events_port: int,
              state_path: Path, as_json: bool) -> None:
    """Start all mapped containers with resolved env and limits."""
    model = _load_model(infra_path)
    config = _load_app(app_path, model)
    try:
        report = workflow.app_start(Workspace(state_path), model, config, events_port=events_port)
    except (DeploymentError, ProvisioningError) as exc:
        raise _fail(str(exc))
    _finish_report(report, as_json, "start")


@app.command("stop")
@app_option
@state_option
@json_option
def app_stop(app_path: str, state_path: Path, as_json: bool) -> None:
    """Stop all mapped containers (idempotent)."""
    config = _load_app(app_path)
    report = workflow.app_stop(Workspace(state_path), config)
    _finish_report(report, as_json, "stop")


@app.command("collect")
@app_option
@click.option("--out", "out_dir", type=click.Path(path_type=Path), default=None,
              help="destination directory (default: <testbed>/results)")
@state_option
@json_option
def app_collect(app_path: str, out_dir: Path | None, state_path: Path, as_json: bool) -> None:
    """Download application directories and agent logs."""
    config = _load_app(app_path)
    report = workflow.app_collect(Workspace(state_path), config, out_dir)
    _finish_report(report, as_json, "collect")


# -- orchestration ---------------------------------------------------------------


@main.group()
def schedule() -> None:
    """Orchestration schedules."""


@schedule.command("validate")
@click.option("--schedule", "schedule_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--infra", "infra_path", type=click.Path(exists=True, dir_okay=False),
              help="also check infra updates against this model")
@click.option("--app", "app_path", type=click.Path(exists=True, dir_okay=False),
              help="also check command targets against this application")
@json_option
def schedule_validate(schedule_path: str, infra_path: str | None, app_path: str | None,
                      as_json: bool) -> None:
    """Check a schedule document; exit 0 only when it is valid."""
    try:
        parsed = load_schedule(schedule_path)
    except ScheduleError as exc:
        _emit(as_json, {"valid": False, "violations": exc.violations},
              "invalid schedule:\n  " + "\n  ".join(exc.violations))
        sys.exit(1)
    model = _load_model(infra_path) if infra_path else None
    config = _load_app(app_path, model) if app_path else None
    report = validate_schedule(parsed, model, config)
    payload = {"valid": report.ok, "states": len(parsed.states),
               "violations": report.violations, "warnings": report.warnings}
    lines = [f"schedule is {'valid' if report.ok else 'INVALID'} ({len(parsed.states)} states)"]
    lines.extend(f"  violation: {v}" for v in report.violations)
    lines.extend(f"  warning: {w}" for w in report.warnings)
    _emit(as_json, payload, "\n".join(lines))
    if not report.ok:
        sys.exit(1)


@main.group()
def orchestrate() -> None:
    """Experiment execution."""


@orchestrate.command("run")
@infra_option
@app_option
@click.option("--schedule", "schedule_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--events-port", type=int, default=None,
              help="event endpoint port (default: the port announced at app start)")
@click.option("--trace", "trace_path", type=click.Path(path_type=Path), default=None,
              help="trace output (default: <testbed>/results/trace.jsonl)")
@click.option("--tick", "tick_s", type=float, default=0.1, show_default=True,
              help="condition evaluation tick in seconds")
@state_option
@json_option
def orchestrate_run(infra_path: str, app_path: str, schedule_path: str,
                    events_port: int | None, trace_path: Path | None, tick_s: float,
                    state_path: Path, as_json: bool) -> None:
    """Drive the schedule to a terminal state against the live testbed."""
    model = _load_model(infra_path)
    config = _load_app(app_path, model)
    try:
        parsed = load_schedule(schedule_path)
    except ScheduleError as exc:
        raise _fail("invalid schedule:\n  " + "\n  ".join(exc.violations))
    report = validate_schedule(parsed, model, config)
    if not report.ok:
        raise _fail("schedule failed validation:\n  " + "\n  ".join(report.violations))
    workspace = Workspace(state_path)
    try:
        trace = workflow.orchestrate(workspace, model, config, parsed,
                                     trace_path=trace_path, events_port=events_port,
                                     tick_s=tick_s)
    except (OrchestrationAborted, DeadlockError, ProvisioningError) as exc:
        raise _fail(f"orchestration failed: {exc}")
    final = trace.visited[-1] if trace.visited else None
    _emit(as_json, {"visited": trace.visited, "final": final},
          "visited: " + " -> ".join(trace.visited))


if __name__ == "__main__":
    main()
