"""Agent daemon entry point: ``python -m fogrig.agent``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import socket
import sys
from pathlib import Path

from fogrig.agent.appnet import AppPlane
from fogrig.agent.backends import CommandScriptBackend, NoopBackend, ProxyBackend
from fogrig.agent.core import AgentCore
from fogrig.agent.runtime import DirAgentRuntime
from fogrig.agent.service import create_app

DEFAULT_PORT = 3100
DEFAULT_APP_PORT = 3110


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fogrig-agent", description="fogrig per-machine agent")
    parser.add_argument("--id", required=True, help="machine id this agent embodies")
    parser.add_argument("--port", type=int,
                        default=int(os.environ.get("FOGRIG_AGENT_PORT", DEFAULT_PORT)),
                        help="management REST port (0 picks a free port)")
    parser.add_argument("--app-port", type=int,
                        default=int(os.environ.get("FOGRIG_AGENT_APP_PORT", DEFAULT_APP_PORT)),
                        help="application network UDP port (0 picks a free port)")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--backend", choices=("proxy", "command-script", "noop"), default="proxy")
    parser.add_argument("--device", default="eth0", help="interface for command-script rules")
    parser.add_argument("--management-addresses", default="",
                        help="comma-separated addresses shielded from all shaping rules")
    parser.add_argument("--workdir", default=None, help="agent working directory")
    parser.add_argument("--ready-file", default=None,
                        help="write bound ports here once the agent is serving")
    parser.add_argument("--seed", type=int, default=None, help="RNG seed for the proxy shaper")
    parser.add_argument("--log-level", default="INFO")
    parser.add_argument("--print-openapi", action="store_true",
                        help="print the OpenAPI document and exit")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)

    if args.print_openapi:
        core = AgentCore(args.id, NoopBackend(), DirAgentRuntime(Path("containers")))
        print(json.dumps(create_app(core).openapi(), indent=2, sort_keys=True))
        return 0

    workdir = Path(args.workdir or f"agent-{args.id}")
    workdir.mkdir(parents=True, exist_ok=True)
    logging.basicConfig(
        level=getattr(logging, args.log_level.upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        handlers=[logging.FileHandler(workdir / "agent.log"), logging.StreamHandler(sys.stderr)],
    )
    log = logging.getLogger("fogrig.agent")

    app_sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    app_sock.bind((args.host, args.app_port))
    plane = AppPlane(args.id, app_sock, seed=args.seed)

    mgmt_sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    mgmt_sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    mgmt_sock.bind((args.host, args.port))
    mgmt_sock.listen(128)

    management = [a for a in args.management_addresses.split(",") if a]
    if args.backend == "proxy":
        backend = ProxyBackend(plane)
    elif args.backend == "command-script":
        backend = CommandScriptBackend()
    else:
        backend = NoopBackend()

    core = AgentCore(args.id, backend, DirAgentRuntime(workdir / "containers"),
                     script_dir=workdir / "scripts", device=args.device,
                     management_addresses=management)
    app = create_app(core, plane)
    plane.start()

    mgmt_port = mgmt_sock.getsockname()[1]
    app_port = app_sock.getsockname()[1]
    if args.ready_file:
        ready = {
            "agent": args.id,
            "pid": os.getpid(),
            "management_port": mgmt_port,
            "application_port": app_port,
        }
        Path(args.ready_file).write_text(json.dumps(ready), encoding="utf-8")
    log.info("agent %s serving: management %s:%s, application %s:%s (backend=%s)",
             args.id, args.host, mgmt_port, args.host, app_port, args.backend)

    import uvicorn

    config = uvicorn.Config(app, log_level="warning")
    server = uvicorn.Server(config)
    try:
        server.run(sockets=[mgmt_sock])
    finally:
        plane.stop()
    return 0


if __name__ == "__main__":
    sys.exit(main())
