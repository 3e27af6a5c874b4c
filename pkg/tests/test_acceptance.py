"""Acceptance suite: one test per criterion, at its stated tolerance.

Run with ``pytest tests/test_acceptance.py -v``; a per-criterion PASS/FAIL
summary is printed at the end of the session (see conftest).
"""

from __future__ import annotations

import json
import random
import socket
import statistics
import struct
import time
from pathlib import Path

import numpy
import psutil
import pytest
import requests
from click.testing import CliRunner

from conftest import enumerate_best_path, random_model
from fogrig.agent.appnet import AppPlane, encode_send
from fogrig.cli import main as cli_main
from fogrig.control import AgentClient, InfrastructureController
from fogrig.infra.overlay import EMPTY_OVERLAY, InfraUpdate, LinkOverride
from fogrig.infra.paths import effective_properties
from fogrig.netplan.plan import build_agent_configs, compensate_delay
from fogrig.orchestration.clock import SimulatedClock
from fogrig.orchestration.runner import ScheduleRunner
from fogrig.orchestration.schedule import load_schedule
from fogrig.provider.base import load_state
from fogrig.provider.local import LocalProcessProvider
from provider_conformance import small_model

DATA = Path(__file__).parent / "data"
DEMO = Path(__file__).parent.parent / "demo"


def _free_tcp_port() -> int:
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


# -- criterion 1 -----------------------------------------------------------


def test_criterion_01_routed_path_math_via_cli():
    """`paths show M2 M6` reports exactly 10 ms and aggregates per the rules."""
    started = time.monotonic()
    result = CliRunner().invoke(cli_main, [
        "paths", "show", "M2", "M6", "--infra", str(DATA / "routed_six.json"), "--json",
    ])
    elapsed = time.monotonic() - started
    assert result.exit_code == 0, result.output
    payload = json.loads(result.output)
    assert payload["delay_ms"] == 10.0                         # 5 + 4 + 1, exact
    assert payload["rate_bps"] == 50e6                         # min link rate on the path
    assert payload["dispersion_ms"] == 4.0                     # 1 + 2 + 1
    assert payload["loss"] == 1.0 - (1 - 0.01) * (1 - 0.02)    # 1 - prod(1 - p_i)
    assert payload["corruption"] == 0.0
    assert elapsed < 1.0


# -- criteria 2 and 3 (same random graphs) -----------------------------------


@pytest.fixture(scope="module")
def random_graphs():
    rng = random.Random(20240117)
    return [random_model(rng) for _ in range(50)]


def test_criterion_02_loss_vs_monte_carlo_oracle(random_graphs):
    """Aggregated loss matches a 1e5-trial per-link Bernoulli simulation within 1 point."""
    started = time.monotonic()
    generator = numpy.random.default_rng(7)
    trials = 100_000
    checked = 0
    for model in random_graphs:
        machines = model.machine_ids
        for i, a in enumerate(machines):
            for b in machines[i + 1:]:
                path = effective_properties(model, a, b)
                losses = [model.connection_between(x, y).properties.loss
                          for x, y in zip(path.path, path.path[1:])]
                survived = (generator.random((trials, len(losses))) >= losses).all(axis=1)
                empirical = 1.0 - survived.mean()
                assert abs(empirical - path.loss) < 0.01, (a, b, empirical, path.loss)
                checked += 1
    assert checked > 100
    assert time.monotonic() - started < 60.0


def test_criterion_03_shortest_path_equals_enumeration(random_graphs):
    """Delay and path agree exactly with exhaustive simple-path enumeration."""
    started = time.monotonic()
    for model in random_graphs:
        machines = model.machine_ids
        for i, a in enumerate(machines):
            for b in machines[i + 1:]:
                expected_delay, expected_path = enumerate_best_path(model, a, b)
                actual = effective_properties(model, a, b)
                assert actual.delay_ms == expected_delay
                assert actual.path == expected_path
    assert time.monotonic() - started < 10.0


# -- criterion 4 --------------------------------------------------------------


def test_criterion_04_delay_compensation_exact():
    """Target 10 ms with measured 1.4 ms RTT injects exactly 9.3 ms."""
    injected, warning = compensate_delay(10.0, 1.4 / 2)
    assert injected == 9.3
    assert warning is None


# -- criterion 5 --------------------------------------------------------------


class _SilentInfra:
    def apply_update(self, update):
        return []


class _SilentApps:
    def send_command(self, target, payload):
        pass

    def broadcast(self, state, payload):
        return []


def _replay(inject_events: bool) -> str:
    schedule = load_schedule(DATA / "memory_phase_schedule.json")
    clock = SimulatedClock()
    runner = ScheduleRunner(schedule, _SilentInfra(), _SilentApps(), clock)
    if inject_events:
        clock.schedule(1450.0, lambda: runner.submit_event("memory error", "app"))
        clock.schedule(1455.0, lambda: runner.submit_event("application started", "app"))
    return runner.run().to_jsonl()


def test_criterion_05_simulated_replay_is_deterministic():
    """Timeout walk dwells 20 simulated minutes per state; replays are byte-identical."""
    started = time.monotonic()

    plain = _replay(inject_events=False)
    entries = [json.loads(line) for line in plain.strip().split("\n")]
    assert [e["state"] for e in entries] == ["INIT", "MEMORY -20%", "HIGH LATENCY", "FINAL"]
    for entry in entries[:-1]:
        dwell = entry["exit"]["at"] - entry["monitor_started"]
        assert dwell == pytest.approx(1200.0, abs=0.2)

    detour = _replay(inject_events=True)
    detour_entries = [json.loads(line) for line in detour.strip().split("\n")]
    assert [e["state"] for e in detour_entries] == [
        "INIT", "MEMORY -20%", "MEMORY RESET", "HIGH LATENCY", "FINAL"]
    reset_entry = detour_entries[2]
    assert reset_entry["exit"]["elapsed"] >= 60.0

    assert len({_replay(inject_events=False) for _ in range(5)}) == 1
    assert len({_replay(inject_events=True) for _ in range(5)}) == 1
    assert time.monotonic() - started < 5.0


# -- criterion 6 --------------------------------------------------------------


@pytest.mark.slow
def test_criterion_06_desk_scale_schedule_end_to_end(tmp_path):
    """Full 9-state schedule over real agents and the mock app; failure path too."""
    started = time.monotonic()
    runner = CliRunner()
    state_path = str(tmp_path / "testbed" / "state.json")
    events_port = _free_tcp_port()
    base = ["--state", state_path]
    infra = ["--infra", str(DEMO / "infrastructure.json")]
    app = ["--app", str(DEMO / "application.json")]

    def invoke(args):
        result = runner.invoke(cli_main, args)
        assert result.exit_code == 0, f"{args}: {result.output}"
        return result

    try:
        invoke(["bootstrap", *infra, *base])
        invoke(["agents", "install", *infra, *base])
        invoke(["app", "prepare", *app, *base])
        invoke(["app", "start", *app, *infra, "--events-port", str(events_port), *base])

        happy = invoke(["orchestrate", "run", *infra, *app,
                        "--schedule", str(DEMO / "schedule.json"), *base, "--json"])
        payload = json.loads(happy.output)
        assert payload["final"] == "FINAL"
        assert payload["visited"] == ["INIT", "A", "B", "C", "D", "E", "F", "FINAL"]

        # Withhold events: the emitter stops, so state A can only time out.
        state = load_state(Path(state_path))
        control_url = state.app_instances["generate-dashboard@cloud"]["control_url"]
        requests.post(f"{control_url}/command", json={"emit": False}, timeout=5)
        failed = invoke(["orchestrate", "run", *infra, *app,
                         "--schedule", str(DEMO / "schedule.json"), *base, "--json"])
        assert json.loads(failed.output)["visited"][-1] == "EXPERIMENT FAILED"

        invoke(["app", "stop", *app, *base])
        collect = invoke(["app", "collect", *app, *base, "--json"])
        assert json.loads(collect.output)["ok"]
        results_root = Path(state_path).parent / "results"
        assert (results_root / "cloud" / "generate-dashboard" / "events.log").is_file()
        assert (results_root / "camera" / "camera" / "sequence.txt").is_file()
        assert (results_root / "cloud" / "agent.log").is_file()
        assert (results_root / "trace.jsonl").is_file()
    finally:
        runner.invoke(cli_main, ["destroy", *base])
    assert time.monotonic() - started < 180.0


# -- criterion 7 --------------------------------------------------------------


def test_criterion_07_latency_override_reroutes_exactly(factory_model):
    """Raising the direct link to 50 ms one-way reroutes to 18 ms via the office."""
    baseline = effective_properties(factory_model, "factory-server", "cloud")
    assert baseline.delay_ms == 12.0
    assert baseline.path == ("factory-server", "cloud")

    overlay = EMPTY_OVERLAY.merge(InfraUpdate(links=(
        LinkOverride("factory-server", "cloud", delay_ms=50.0),
    )))
    modified = overlay.apply(factory_model)
    rerouted = effective_properties(modified, "factory-server", "cloud")
    assert rerouted.delay_ms == 18.0
    assert rerouted.path == ("factory-server", "central-office", "cloud")


# -- criterion 8 --------------------------------------------------------------


@pytest.mark.slow
def test_criterion_08_partition_dominates_and_blocks(factory_model, factory_addresses, tmp_path):
    """Partition encodes as loss 1.0 everywhere; live proxy delivers zero messages."""
    plan = build_agent_configs(factory_model, factory_addresses, partitions=["factory-server"])
    for entry in plan.configs["factory-server"].entries:
        assert entry.loss == 1.0
    for agent, config in plan.configs.items():
        if agent != "factory-server":
            assert config.entry_for("factory-server").loss == 1.0

    provider = LocalProcessProvider(tmp_path)
    model = small_model()
    handles = provider.install_agents(model, provider.bootstrap(model))
    try:
        clients = {m: AgentClient(m, h.management_address) for m, h in handles.items()}
        controller = InfrastructureController(
            model=model, clients=clients,
            addresses={m: h.application_address for m, h in handles.items()})
        controller.apply_update(InfraUpdate(partitions=("beta",)))

        receiver = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        receiver.bind(("127.0.0.1", 0))
        receiver.settimeout(0.3)
        recv_host, recv_port = receiver.getsockname()[:2]

        sender = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        alpha_app = handles["alpha"].application_address
        alpha_host, alpha_port = alpha_app.rsplit(":", 1)[0], int(alpha_app.rsplit(":", 1)[1])
        for index in range(1000):
            sender.sendto(encode_send("alpha", "beta", recv_host, recv_port, b"m%d" % index),
                          (alpha_host, alpha_port))
        delivered = 0
        try:
            while True:
                receiver.recv(65536)
                delivered += 1
        except socket.timeout:
            pass
        assert delivered == 0
        sender.close()
        receiver.close()
    finally:
        provider.destroy(handles)


# -- criterion 9 --------------------------------------------------------------


@pytest.mark.slow
def test_criterion_09_proxy_statistical_shaping():
    """50 ms / 10% loss over 1e4 messages: mean within 5 ms, loss within 2 points."""
    started = time.monotonic()
    from fogrig.netplan.plan import ImpairmentSpec

    sender_sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    sender_sock.bind(("127.0.0.1", 0))
    plane = AppPlane("m1", sender_sock, seed=13)
    plane.start()

    receiver = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    receiver.setsockopt(socket.SOL_SOCKET, socket.SO_RCVBUF, 1 << 23)
    receiver.bind(("127.0.0.1", 0))
    receiver.settimeout(0.5)
    destination = "%s:%d" % receiver.getsockname()[:2]

    total = 10_000
    try:
        plane.apply_entries((ImpairmentSpec(target="m2", target_address=destination,
                                            delay_ms=50.0, loss=0.10),))
        for index in range(total):
            plane.send("m2", destination, struct.pack("!Id", index, time.monotonic()))
            if index % 400 == 399:
                time.sleep(0.01)  # stay well inside socket buffers

        delays_ms = []
        deadline = time.monotonic() + 10.0
        while time.monotonic() < deadline:
            try:
                payload = receiver.recv(65536)
            except socket.timeout:
                break
            _, sent_at = struct.unpack("!Id", payload)
            delays_ms.append((time.monotonic() - sent_at) * 1000.0)
    finally:
        plane.stop()
        receiver.close()

    loss = 1.0 - len(delays_ms) / total
    mean_delay = statistics.fmean(delays_ms)
    assert abs(loss - 0.10) < 0.02, f"empirical loss {loss:.4f}"
    assert abs(mean_delay - 50.0) < 5.0, f"empirical mean delay {mean_delay:.2f} ms"
    assert time.monotonic() - started < 120.0


# -- criterion 10 -------------------------------------------------------------


@pytest.mark.slow
def test_criterion_10_management_isolation(tmp_path):
    """Agent /status round trips shift by < 2 ms under a 100 ms data-plane delay."""
    provider = LocalProcessProvider(tmp_path)
    model = small_model()
    handles = provider.install_agents(model, provider.bootstrap(model))
    try:
        from fogrig.control import AgentClient

        client = AgentClient("alpha", handles["alpha"].management_address)

        def median_status_rtt_ms(samples: int = 40) -> float:
            rtts = []
            for _ in range(samples):
                began = time.monotonic()
                client.status()
                rtts.append((time.monotonic() - began) * 1000.0)
            return statistics.median(rtts)

        before = median_status_rtt_ms()
        clients = {m: AgentClient(m, h.management_address) for m, h in handles.items()}
        controller = InfrastructureController(
            model=model, clients=clients,
            addresses={m: h.application_address for m, h in handles.items()})
        controller.apply_update(InfraUpdate(links=(
            LinkOverride("alpha", "beta", delay_ms=100.0),
            LinkOverride("beta", "gamma", delay_ms=100.0),
        )))
        after = median_status_rtt_ms()
        assert abs(after - before) < 2.0, f"management RTT moved {before:.3f} -> {after:.3f} ms"
    finally:
        provider.destroy(handles)


# -- criterion 11 -------------------------------------------------------------


@pytest.mark.slow
def test_criterion_11_bootstrap_destroy_leaves_nothing(tmp_path):
    """Process and port audit after bootstrap -> install -> destroy."""
    provider = LocalProcessProvider(tmp_path)
    model = small_model()
    handles = provider.install_agents(model, provider.bootstrap(model))
    pids = [h.provider_data["pid"] for h in handles.values()]
    tcp_ports = [int(h.management_address.rsplit(":", 1)[1]) for h in handles.values()]
    udp_ports = [int(h.application_address.rsplit(":", 1)[1]) for h in handles.values()]
    assert all(psutil.pid_exists(pid) for pid in pids)

    report = provider.destroy(handles)
    assert report.clean

    assert not any(psutil.pid_exists(pid) for pid in pids)
    listening = {c.laddr.port for c in psutil.net_connections(kind="tcp") if c.status == "LISTEN"}
    assert not (set(tcp_ports) & listening)
    bound_udp = {c.laddr.port for c in psutil.net_connections(kind="udp")}
    assert not (set(udp_ports) & bound_udp)
    for handle in handles.values():
        assert not Path(handle.credentials_ref).exists()
