"""HTTP event sink on the orchestrating host.

Application components report events with ``POST /events {"name", "source"}``
(default port 3200). This is control-plane traffic: it rides the management
side and is never shaped.
"""

from __future__ import annotations

import json
import logging
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Callable

log = logging.getLogger(__name__)

DEFAULT_EVENTS_PORT = 3200


class EventSink:
    def __init__(self, submit: Callable[[str, str], None], host: str = "127.0.0.1",
                 port: int = DEFAULT_EVENTS_PORT):
        sink = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self) -> None:  # noqa: N802 (http.server API)
                if self.path != "/events":
                    self.send_error(404)
                    return
                length = int(self.headers.get("Content-Length", 0))
                try:
                    body = json.loads(self.rfile.read(length) or b"{}")
                    name = body["name"]
                except (ValueError, KeyError):
                    self.send_error(400, "body must be JSON with a 'name' field")
                    return
                submit(str(name), str(body.get("source", "")))
                sink.received += 1
                self.send_response(202)
                self.send_header("Content-Type", "application/json")
                self.end_headers()
                self.wfile.write(b'{"accepted": true}')

            def log_message(self, format: str, *args) -> None:  # noqa: A002
                log.debug("event sink: " + format, *args)

        self.received = 0
        self._server = ThreadingHTTPServer((host, port), Handler)
        self._thread = threading.Thread(target=self._server.serve_forever,
                                        name="fogrig-event-sink", daemon=True)

    @property
    def port(self) -> int:
        return self._server.server_address[1]

    @property
    def url(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}/events"

    def start(self) -> "EventSink":
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()
