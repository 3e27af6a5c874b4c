from __future__ import annotations

import json
import random
from pathlib import Path

import pytest

from fogrig.infra.document import parse_infrastructure
from fogrig.infra.model import Connection, ConnectionProperties, InfrastructureModel, MachineSpec

DATA_DIR = Path(__file__).parent / "data"
DEMO_DIR = Path(__file__).parent.parent / "demo"


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA_DIR


@pytest.fixture(scope="session")
def demo_dir() -> Path:
    return DEMO_DIR


@pytest.fixture(scope="session")
def routed_model() -> InfrastructureModel:
    """Six machines joined through two routers; M2-M6 crosses both routers."""
    return parse_infrastructure((DATA_DIR / "routed_six.json").read_text())


@pytest.fixture(scope="session")
def factory_model() -> InfrastructureModel:
    """The 8-machine demo infrastructure (edge devices, gateway, servers, cloud)."""
    return parse_infrastructure((DEMO_DIR / "infrastructure.json").read_text())


@pytest.fixture(scope="session")
def factory_addresses(factory_model) -> dict[str, str]:
    return {machine: f"10.0.0.{index + 1}" for index, machine in enumerate(factory_model.machine_ids)}


def random_model(rng: random.Random, max_nodes: int = 8) -> InfrastructureModel:
    """Random connected graph with integer delays (ties are common on purpose)."""
    machine_count = rng.randint(2, max(2, max_nodes - 2))
    router_count = rng.randint(0, max_nodes - machine_count)
    nodes = [MachineSpec(id=f"M{i}", cpu_cores=1, memory_bytes=1 << 30, storage_bytes=1 << 30)
             for i in range(1, machine_count + 1)]
    nodes += [MachineSpec(id=f"R{i}", kind="router") for i in range(1, router_count + 1)]
    ids = [node.id for node in nodes]
    rng.shuffle(ids)

    def link_properties() -> ConnectionProperties:
        return ConnectionProperties(
            rate_bps=rng.choice([1e6, 1e7, 1e8, 1e9]),
            delay_ms=float(rng.randint(1, 8)),
            dispersion_ms=round(rng.uniform(0.0, 3.0), 3),
            loss=round(rng.uniform(0.0, 0.3), 4),
            corruption=round(rng.uniform(0.0, 0.2), 4),
            reorder=round(rng.uniform(0.0, 0.2), 4),
            duplicate=round(rng.uniform(0.0, 0.2), 4),
        )

    connections: dict[tuple[str, str], Connection] = {}
    for index in range(1, len(ids)):
        other = ids[rng.randrange(index)]
        connection = Connection(ids[index], other, link_properties())
        connections[connection.pair] = connection
    for _ in range(rng.randint(0, 4)):
        a, b = rng.sample(ids, 2)
        pair = tuple(sorted((a, b)))
        if pair not in connections:
            connection = Connection(a, b, link_properties())
            connections[connection.pair] = connection
    return InfrastructureModel.build(nodes, connections.values())


def enumerate_best_path(model: InfrastructureModel, source: str,
                        target: str) -> tuple[float, tuple[str, ...]] | None:
    """Exhaustive simple-path oracle: minimum (total delay, node sequence)."""
    best: tuple[float, tuple[str, ...]] | None = None

    def dfs(node: str, visited: set[str], path: list[str], delay: float) -> None:
        nonlocal best
        if node == target:
            candidate = (delay, tuple(path))
            if best is None or candidate < best:
                best = candidate
            return
        for connection in model.adjacency[node]:
            neighbor = connection.other(node)
            if neighbor not in visited:
                visited.add(neighbor)
                path.append(neighbor)
                dfs(neighbor, visited, path, delay + connection.properties.delay_ms)
                path.pop()
                visited.remove(neighbor)

    dfs(source, {source}, [source], 0.0)
    return best


def load_json(path: Path) -> dict:
    return json.loads(path.read_text(encoding="utf-8"))


# -- acceptance summary ------------------------------------------------------

_ACCEPTANCE_OUTCOMES: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py::test_criterion_" in report.nodeid and report.when == "call":
        name = report.nodeid.split("::test_criterion_")[1]
        _ACCEPTANCE_OUTCOMES[name] = report.outcome.upper()
    elif ("test_acceptance.py::test_criterion_" in report.nodeid
          and report.when == "setup" and report.outcome != "passed"):
        name = report.nodeid.split("::test_criterion_")[1]
        _ACCEPTANCE_OUTCOMES[name] = report.outcome.upper()


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE_OUTCOMES):
        number, _, label = name.partition("_")
        outcome = _ACCEPTANCE_OUTCOMES[name]
        verdict = "PASS" if outcome == "PASSED" else "FAIL"
        terminalreporter.write_line(f"criterion {int(number):2d} [{verdict}] {label.replace('_', ' ')}")
