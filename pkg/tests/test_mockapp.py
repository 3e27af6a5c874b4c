"""The mock application as a child process: control endpoint and emission."""

import json
import os
import subprocess
import sys
import time
from pathlib import Path

import pytest
import requests

from fogrig.orchestration.events import EventSink


def _free_port() -> int:
    import socket

    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


@pytest.fixture()
def sink():
    events = []
    sink = EventSink(lambda name, source: events.append((name, source)), port=0).start()
    sink.events = events
    yield sink
    sink.stop()


def _spawn(tmp_path: Path, sink, *args: str) -> tuple[subprocess.Popen, int]:
    port = _free_port()
    env = dict(os.environ)
    env.update({
        "FOGRIG_CONTROL_PORT": str(port),
        "FOGRIG_MANAGER_URL": sink.url,
        "FOGRIG_CONTAINER": "test-component",
        "FOGRIG_MACHINE": "m1",
    })
    process = subprocess.Popen([sys.executable, "-m", "fogrig.mockapp", *args],
                               cwd=tmp_path, env=env)
    deadline = time.monotonic() + 5.0
    while time.monotonic() < deadline:
        try:
            requests.post(f"http://127.0.0.1:{port}/notify", json={"state": "probe"}, timeout=0.3)
            break
        except requests.RequestException:
            time.sleep(0.05)
    return process, port


def test_emitter_posts_events_and_honors_commands(tmp_path, sink):
    process, port = _spawn(tmp_path, sink, "--role", "emitter",
                           "--event", "dashboard generated", "--interval", "0.1")
    try:
        deadline = time.monotonic() + 5.0
        while time.monotonic() < deadline and len(sink.events) < 3:
            time.sleep(0.05)
        assert len(sink.events) >= 3
        assert sink.events[0] == ("dashboard generated", "test-component")

        requests.post(f"http://127.0.0.1:{port}/command", json={"emit": False}, timeout=2)
        time.sleep(0.3)
        seen = len(sink.events)
        time.sleep(0.4)
        assert len(sink.events) == seen  # emission stopped
    finally:
        process.terminate()
        process.wait(timeout=5)

    log_lines = [json.loads(line) for line in (tmp_path / "data" / "events.log").read_text().splitlines()]
    kinds = {record["kind"] for record in log_lines}
    assert {"started", "emitted", "command", "phase"} <= kinds


def test_worker_stays_silent(tmp_path, sink):
    process, _ = _spawn(tmp_path, sink, "--role", "worker", "--interval", "0.1")
    try:
        time.sleep(0.6)
        assert sink.events == []
    finally:
        process.terminate()
        process.wait(timeout=5)
