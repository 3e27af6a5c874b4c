"""The agent's application-network plane (proxy shaper backend).

Every machine owns one UDP socket on its application address. Local senders
hand the agent an envelope naming the destination machine and the final
(host, port) of the receiving process; the agent shapes the raw payload per
its adjacency entry for that machine and forwards it. Delivery goes straight
to the destination socket, so receivers see pure application bytes. Shaping
is egress-only: each direction of a pair is shaped once, by its sender.

Envelopes are single JSON datagrams:

* ``{"k": "s", "m": <sender machine>, "t": <target machine>,
    "h": <host>, "p": <port>, "d": <base64 payload>}`` -- send
* ``{"k": "p", "id": ..., "m": <sender machine>, "h": ..., "p": ...}`` -- ping
* ``{"k": "o", "id": ...}`` -- pong

Ping requests and replies travel through the same egress shaping as
application traffic, so measurements capture the application-visible
baseline (and, once a config is applied, the shaped path).

The management REST endpoint lives on a separate socket and never passes
through here, which keeps the management network untouched by design.
"""

from __future__ import annotations

import base64
import json
import logging
import random
import socket
import statistics
import threading
import time
import uuid

from fogrig.agent.scheduler import DeliveryScheduler
from fogrig.agent.shaping import ImpairmentPipe
from fogrig.netplan.plan import ImpairmentSpec

log = logging.getLogger(__name__)

_BUFFER = 65536


def split_hostport(address: str, default_port: int = 0) -> tuple[str, int]:
    host, sep, port = address.rpartition(":")
    if not sep:
        return address, default_port
    return host, int(port)


class PingProbe:
    def __init__(self, samples: int):
        self.event = threading.Event()
        self.rtts_ms: list[float] = []
        self.expected = samples


class AppPlane:
    """Reader + shaper + scheduler around one application UDP socket."""

    def __init__(self, agent_id: str, sock: socket.socket, seed: int | None = None):
        self.agent_id = agent_id
        self._sock = sock
        self._rng = random.Random(seed)
        self._entries: dict[str, ImpairmentSpec] = {}
        self._pipes: dict[str, ImpairmentPipe] = {}
        self._address_to_machine: dict[str, str] = {}
        self._lock = threading.Lock()
        self._scheduler = DeliveryScheduler()
        self._probes: dict[str, PingProbe] = {}
        self._reader = threading.Thread(target=self._read_loop, name=f"appnet-{agent_id}", daemon=True)
        self._running = False

    @property
    def address(self) -> str:
        host, port = self._sock.getsockname()[:2]
        return f"{host}:{port}"

    def start(self) -> None:
        self._running = True
        self._scheduler.start()
        self._reader.start()

    def stop(self) -> None:
        self._running = False
        self._scheduler.stop()
        try:
            self._sock.close()
        except OSError:
            pass

    # -- configuration ----------------------------------------------------

    def apply_entries(self, entries: tuple[ImpairmentSpec, ...]) -> None:
        """Replace the whole shaping table (reset-then-apply)."""
        with self._lock:
            self._entries = {entry.target: entry for entry in entries}
            self._pipes = {target: ImpairmentPipe(entry, rng=self._rng)
                           for target, entry in self._entries.items()}
            self._address_to_machine = {entry.target_address: entry.target
                                        for entry in entries}

    def clear(self) -> None:
        self.apply_entries(())

    # -- egress ------------------------------------------------------------

    def send(self, target_machine: str | None, destination: str, payload: bytes) -> None:
        """Shape and forward one payload toward a machine's (host, port)."""
        self._shape_and_schedule(target_machine, destination, payload)

    def _shape_and_schedule(self, target_machine: str | None, destination: str, raw: bytes) -> None:
        now = time.monotonic()
        with self._lock:
            pipe = self._pipes.get(target_machine) if target_machine else None
        if pipe is None:
            # No entry: vanilla network (fresh testbed or unknown peer).
            self._deliver(destination, raw)
            return
        deliveries = pipe.offer(raw, now)
        deadline = pipe.hold_deadline()
        if deadline is not None:
            self._scheduler.schedule(deadline, lambda: self._flush_pipe(pipe, destination))
        for delivery in deliveries:
            self._schedule_delivery(destination, delivery)

    def _flush_pipe(self, pipe: ImpairmentPipe, destination: str) -> None:
        for delivery in pipe.flush(time.monotonic()):
            self._schedule_delivery(destination, delivery)

    def _schedule_delivery(self, destination: str, delivery) -> None:
        self._scheduler.schedule(delivery.due, lambda: self._deliver(destination, delivery.payload))

    def _deliver(self, destination: str, payload: bytes) -> None:
        host, port = split_hostport(destination)
        try:
            self._sock.sendto(payload, (host, port))
        except OSError as exc:
            log.debug("delivery to %s failed: %s", destination, exc)

    def _machine_for_address(self, address: str) -> str | None:
        with self._lock:
            return self._address_to_machine.get(address)

    # -- ping --------------------------------------------------------------

    def measure_ping(self, targets: list[str], samples: int = 10,
                     timeout_s: float = 0.5) -> list[dict]:
        """Round-trip measurements over the application network.

        Each sample is an enveloped ping through this agent's egress shaping;
        the peer agent answers through its own. A target that never answers
        reports loss 1.0 and no round-trip statistics.
        """
        reports = []
        threads = []
        results: dict[str, dict] = {}

        def probe_target(target: str) -> None:
            results[target] = self._probe(target, samples, timeout_s)

        for target in targets:
            thread = threading.Thread(target=probe_target, args=(target,), daemon=True)
            thread.start()
            threads.append(thread)
        for thread in threads:
            thread.join()
        for target in targets:
            reports.append(results[target])
        return reports

    def _probe(self, target: str, samples: int, timeout_s: float) -> dict:
        rtts: list[float] = []
        host, port = self._sock.getsockname()[:2]
        target_machine = self._machine_for_address(target)
        for _ in range(samples):
            probe_id = uuid.uuid4().hex
            probe = PingProbe(1)
            self._probes[probe_id] = probe
            envelope = _encode({"k": "p", "id": probe_id, "m": self.agent_id, "h": host, "p": port})
            started = time.monotonic()
            self._shape_and_schedule(target_machine, target, envelope)
            if probe.event.wait(timeout_s):
                rtts.append((time.monotonic() - started) * 1000.0)
            self._probes.pop(probe_id, None)
        report = {
            "target": target,
            "samples": samples,
            "loss_fraction": 1.0 - len(rtts) / samples,
            "rtt_avg_ms": statistics.fmean(rtts) if rtts else None,
            "rtt_stddev_ms": statistics.stdev(rtts) if len(rtts) > 1 else (0.0 if rtts else None),
        }
        return report

    # -- inbound -----------------------------------------------------------

    def _read_loop(self) -> None:
        while self._running:
            try:
                data, source = self._sock.recvfrom(_BUFFER)
            except OSError:
                return
            try:
                self._handle(data, source)
            except Exception:
                log.exception("failed to handle datagram from %s", source)

    def _handle(self, data: bytes, source) -> None:
        try:
            message = json.loads(data.decode("utf-8"))
            kind = message.get("k")
        except (UnicodeDecodeError, ValueError):
            return  # not an envelope; ignore
        if kind == "s":
            payload = base64.b64decode(message["d"])
            destination = f"{message['h']}:{message['p']}"
            self._shape_and_schedule(message.get("t"), destination, payload)
        elif kind == "p":
            reply_to = f"{message['h']}:{message['p']}"
            sender = message.get("m")
            pong = _encode({"k": "o", "id": message["id"]})
            target_machine = sender if sender in self._entries else self._machine_for_address(reply_to)
            self._shape_and_schedule(target_machine, reply_to, pong)
        elif kind == "o":
            probe = self._probes.get(message.get("id", ""))
            if probe is not None:
                probe.event.set()


def _encode(message: dict) -> bytes:
    return json.dumps(message, separators=(",", ":")).encode("utf-8")


def encode_send(sender: str, target_machine: str, host: str, port: int, payload: bytes) -> bytes:
    """Build a send envelope; exported for senders (containers, tests)."""
    return _encode({
        "k": "s", "m": sender, "t": target_machine,
        "h": host, "p": port, "d": base64.b64encode(payload).decode("ascii"),
    })
