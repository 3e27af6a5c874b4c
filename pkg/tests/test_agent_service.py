import json
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from fogrig.agent.backends import BackendError, NoopBackend
from fogrig.agent.core import AgentCore
from fogrig.agent.runtime import RecordingAgentRuntime
from fogrig.agent.service import create_app

DOCS = Path(__file__).parent.parent / "docs"


class FlakyBackend(NoopBackend):
    name = "noop"

    def __init__(self):
        super().__init__()
        self.fail_next = False

    def apply(self, config, script):
        if self.fail_next:
            self.fail_next = False
            raise BackendError("injected backend failure")
        super().apply(config, script)


@pytest.fixture()
def agent(tmp_path):
    backend = FlakyBackend()
    runtime = RecordingAgentRuntime(["camera", "aggregate"])
    core = AgentCore("m1", backend, runtime, script_dir=tmp_path / "scripts")
    client = TestClient(create_app(core))
    client.backend = backend
    client.runtime = runtime
    client.core = core
    return client


def _config(revision, entries=()):
    return {"agent": "m1", "revision": revision, "entries": list(entries)}


def _entry(target, **kwargs):
    return {"target": target, "target_address": f"10.0.0.{target[-1]}", **kwargs}


def test_fresh_agent_status(agent):
    status = agent.get("/status").json()
    assert status["applied_revision"] == 0
    assert status["shaper_backend"] == "noop"
    assert status["warnings"] == []
    assert status["uptime_s"] >= 0


def test_apply_and_read_round_trip(agent):
    body = _config(1, [_entry("m2", delay_ms=9.3), _entry("m3", loss=1.0)])
    response = agent.put("/network", json=body)
    assert response.status_code == 200
    assert response.json() == {"revision": 1, "warnings": []}
    assert agent.get("/status").json()["applied_revision"] == 1

    echoed = agent.get("/network").json()
    assert echoed["revision"] == 1
    assert {e["target"]: e for e in echoed["entries"]}["m2"]["delay_ms"] == 9.3
    assert {e["target"]: e for e in echoed["entries"]}["m3"]["loss"] == 1.0


def test_stale_revision_rejected(agent):
    assert agent.put("/network", json=_config(1)).status_code == 200
    response = agent.put("/network", json=_config(1))
    assert response.status_code == 409
    assert agent.get("/status").json()["applied_revision"] == 1


def test_failed_apply_rolls_back(agent):
    agent.put("/network", json=_config(3, [_entry("m2", delay_ms=5.0)]))
    agent.backend.fail_next = True
    response = agent.put("/network", json=_config(4, [_entry("m2", delay_ms=99.0)]))
    assert response.status_code == 500

    status = agent.get("/status").json()
    assert status["applied_revision"] == 3
    assert any("rolled back" in warning for warning in status["warnings"])
    echoed = agent.get("/network").json()
    assert echoed["entries"][0]["delay_ms"] == 5.0  # previous config still live

    # The next good apply proceeds normally.
    assert agent.put("/network", json=_config(4)).status_code == 200


def test_revisions_never_decrease_under_mixed_outcomes(agent):
    observed = [agent.get("/status").json()["applied_revision"]]
    for revision, fail in ((1, False), (1, False), (2, True), (3, False), (2, False)):
        agent.backend.fail_next = fail
        agent.put("/network", json=_config(revision))
        observed.append(agent.get("/status").json()["applied_revision"])
    assert observed == sorted(observed)


def test_limits_applied_through_runtime(agent):
    body = {"limits": [{"container": "camera", "cpu_cores": 0.5, "memory_bytes": 256 << 20}]}
    response = agent.put("/limits", json=body)
    assert response.status_code == 200
    assert response.json() == {"updated": ["camera"]}
    assert agent.runtime.calls == [("camera", 0.5, 256 << 20)]
    assert agent.get("/limits").json()["camera"]["cpu_cores"] == 0.5


def test_unknown_container_is_404(agent):
    body = {"limits": [{"container": "ghost", "cpu_cores": 1.0, "memory_bytes": 1}]}
    response = agent.put("/limits", json=body)
    assert response.status_code == 404
    assert "ghost" in response.json()["detail"]


def test_identical_limit_is_idempotent(agent):
    body = {"limits": [{"container": "camera", "cpu_cores": 1.0, "memory_bytes": 1 << 30}]}
    assert agent.put("/limits", json=body).status_code == 200
    assert agent.put("/limits", json=body).status_code == 200
    assert agent.get("/limits").json()["camera"]["cpu_cores"] == 1.0


def test_scripts_persisted_for_audit(agent, tmp_path):
    agent.put("/network", json=_config(1, [_entry("m2", delay_ms=1.0)]))
    scripts = sorted(path.name for path in (tmp_path / "scripts").iterdir())
    assert scripts == ["rev-0001.json", "rev-0001.tc"]


def test_ping_without_app_plane_is_501(agent):
    response = agent.post("/ping", json={"targets": ["127.0.0.1:9"]})
    assert response.status_code == 501


def test_openapi_document_matches_committed_copy(agent):
    committed = json.loads((DOCS / "agent-openapi.json").read_text())
    assert agent.app.openapi() == committed
