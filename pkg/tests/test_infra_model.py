import json

import pytest

from fogrig.infra.document import parse_infrastructure, serialize_infrastructure
from fogrig.infra.model import InfrastructureError


def test_routed_fixture_parses(routed_model):
    assert len(routed_model.machine_ids) == 6
    assert len(routed_model.nodes) == 8
    assert routed_model.machine("M2").cpu_cores == 1
    with pytest.raises(KeyError):
        routed_model.machine("R1")  # routers are not machines


def test_demo_fixture_shape(factory_model):
    # 7 leaf/server machines plus the gateway; one-way link delays span 1..12 ms.
    assert len(factory_model.machine_ids) == 8
    delays = sorted(c.properties.delay_ms for c in factory_model.connections)
    assert delays[0] == 1.0
    assert delays[-1] == 12.0


def test_single_machine_no_connections_is_valid():
    model = parse_infrastructure({"machines": [{"id": "solo", "cpu_cores": 1, "memory_mb": 64}]})
    assert model.machine_ids == ("solo",)


def test_unknown_endpoint_is_reported_by_name():
    document = {
        "machines": [{"id": "M1", "cpu_cores": 1, "memory_mb": 64}],
        "connections": [{"from": "M1", "to": "M9", "rate_mbit": 10, "delay_ms_oneway": 1}],
    }
    with pytest.raises(InfrastructureError) as excinfo:
        parse_infrastructure(document)
    assert any("M9" in violation for violation in excinfo.value.violations)


def test_validation_reports_all_violations_in_one_pass():
    document = {
        "machines": [
            {"id": "M1", "cpu_cores": 0, "memory_mb": 64},         # bad cpu
            {"id": "M1", "cpu_cores": 1, "memory_mb": 64},         # duplicate id
            {"id": "M2", "cpu_cores": 1, "memory_mb": 64},
        ],
        "connections": [
            {"from": "M1", "to": "M1", "rate_mbit": 10, "delay_ms_oneway": 1},   # self loop
            {"from": "M2", "to": "M9", "rate_mbit": 10, "delay_ms_oneway": -4},  # unknown + bad delay
            {"from": "M1", "to": "M2", "rate_mbit": 10, "delay_ms_oneway": 1, "loss_pct": 140},
        ],
    }
    with pytest.raises(InfrastructureError) as excinfo:
        parse_infrastructure(document)
    text = "\n".join(excinfo.value.violations)
    assert len(excinfo.value.violations) >= 5
    for fragment in ("cpu_cores", "duplicate", "self-loop", "M9", "delay", "loss"):
        assert fragment in text


def test_disconnected_machine_is_a_violation():
    document = {
        "machines": [
            {"id": "M1", "cpu_cores": 1, "memory_mb": 64},
            {"id": "M2", "cpu_cores": 1, "memory_mb": 64},
            {"id": "M3", "cpu_cores": 1, "memory_mb": 64},
        ],
        "connections": [{"from": "M1", "to": "M2", "rate_mbit": 10, "delay_ms_oneway": 1}],
    }
    with pytest.raises(InfrastructureError) as excinfo:
        parse_infrastructure(document)
    assert any("M3" in v and "disconnected" in v for v in excinfo.value.violations)


def test_duplicate_connection_pair_rejected():
    document = {
        "machines": [
            {"id": "M1", "cpu_cores": 1, "memory_mb": 64},
            {"id": "M2", "cpu_cores": 1, "memory_mb": 64},
        ],
        "connections": [
            {"from": "M1", "to": "M2", "rate_mbit": 10, "delay_ms_oneway": 1},
            {"from": "M2", "to": "M1", "rate_mbit": 99, "delay_ms_oneway": 9},
        ],
    }
    with pytest.raises(InfrastructureError) as excinfo:
        parse_infrastructure(document)
    assert any("duplicate connection" in v for v in excinfo.value.violations)


def test_serialize_parse_round_trip(routed_model, factory_model):
    for model in (routed_model, factory_model):
        document = serialize_infrastructure(model)
        reparsed = parse_infrastructure(json.dumps(document))
        assert reparsed == model


def test_malformed_json_reports_cleanly():
    with pytest.raises(InfrastructureError) as excinfo:
        parse_infrastructure("{not json")
    assert "not valid JSON" in excinfo.value.violations[0]
