"""Minimal test application for desk-scale experiments.

Runs as a ``process:`` container. Roles:

* ``emitter``: posts a named event to the orchestrator's event endpoint at a
  fixed interval (``--interval 0`` disables emission until commanded on).
* ``worker``: only logs heartbeats and reacts to control messages.

Every instance serves a tiny control endpoint (port from
``FOGRIG_CONTROL_PORT``): ``POST /command`` accepts ``{"emit": bool}``,
``{"interval": seconds}``, ``{"sequence": "restart"}`` or arbitrary payloads
(logged); ``POST /notify`` records phase changes. Activity is appended to
``<out>/events.log`` so result collection has something to fetch.
"""

from __future__ import annotations

import argparse
import json
import os
import signal
import sys
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import requests


class MockComponent:
    def __init__(self, args: argparse.Namespace):
        self.name = os.environ.get("FOGRIG_CONTAINER", args.role)
        self.machine = os.environ.get("FOGRIG_MACHINE", "?")
        self.manager_url = args.manager or os.environ.get("FOGRIG_MANAGER_URL", "")
        self.event_name = args.event
        self.interval_s = args.interval
        self.emitting = args.role == "emitter" and args.interval > 0
        self.sequence = 0
        self.out_dir = Path(args.out)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self._log_lock = threading.Lock()
        self._stop = threading.Event()

    def log(self, kind: str, **payload) -> None:
        record = {"at": time.time(), "component": self.name, "kind": kind, **payload}
        with self._log_lock:
            with open(self.out_dir / "events.log", "a", encoding="utf-8") as handle:
                handle.write(json.dumps(record) + "\n")

    # -- control endpoint ---------------------------------------------------

    def handle_command(self, payload: dict) -> None:
        if "emit" in payload:
            self.emitting = bool(payload["emit"])
        if "interval" in payload:
            self.interval_s = float(payload["interval"])
            self.emitting = self.emitting and self.interval_s > 0
        if payload.get("sequence") == "restart":
            self.sequence = 0
        self.log("command", payload=payload)

    def handle_notify(self, payload: dict) -> None:
        self.log("phase", state=payload.get("state"), payload=payload.get("payload"))

    # -- emission -------------------------------------------------------------

    def emit_loop(self) -> None:
        while not self._stop.wait(self.interval_s if self.interval_s > 0 else 0.5):
            if not self.emitting or not self.manager_url:
                continue
            self.sequence += 1
            try:
                requests.post(self.manager_url,
                              json={"name": self.event_name, "source": self.name},
                              timeout=2.0)
                self.log("emitted", event=self.event_name, sequence=self.sequence)
            except requests.RequestException as exc:
                self.log("emit-failed", error=str(exc))

    def run(self, control_port: int) -> None:
        component = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self) -> None:  # noqa: N802
                length = int(self.headers.get("Content-Length", 0))
                try:
                    payload = json.loads(self.rfile.read(length) or b"{}")
                except ValueError:
                    self.send_error(400)
                    return
                if self.path == "/command":
                    component.handle_command(payload)
                elif self.path == "/notify":
                    component.handle_notify(payload)
                else:
                    self.send_error(404)
                    return
                self.send_response(200)
                self.end_headers()
                self.wfile.write(b"{}")

            def log_message(self, *args) -> None:
                pass

        server = ThreadingHTTPServer(("127.0.0.1", control_port), Handler)
        threading.Thread(target=server.serve_forever, daemon=True).start()
        self.log("started", machine=self.machine, control_port=server.server_address[1])

        signal.signal(signal.SIGTERM, lambda *_: self._stop.set())
        emitter = threading.Thread(target=self.emit_loop, daemon=True)
        emitter.start()
        try:
            while not self._stop.wait(0.2):
                pass
        except KeyboardInterrupt:
            pass
        server.shutdown()
        self.log("stopped")


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="fogrig-mockapp")
    parser.add_argument("--role", choices=("emitter", "worker"), default="worker")
    parser.add_argument("--event", default="tick", help="event name emitters post")
    parser.add_argument("--interval", type=float, default=1.0, help="seconds between events")
    parser.add_argument("--manager", default=None, help="event endpoint URL override")
    parser.add_argument("--out", default="data", help="directory for the activity log")
    args = parser.parse_args(argv)

    component = MockComponent(args)
    control_port = int(os.environ.get("FOGRIG_CONTROL_PORT", 0))
    component.run(control_port)
    return 0


if __name__ == "__main__":
    sys.exit(main())
