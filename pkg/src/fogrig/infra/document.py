"""JSON document format for infrastructure models.

Top-level keys: ``machines`` (id, cpu_cores, memory_mb, storage_mb),
``routers`` (id), and ``connections`` (from, to, rate_mbit, delay_ms_oneway,
dispersion_ms, loss_pct, corruption_pct, reorder_pct, duplicate_pct). All
impairment fields are optional and default to zero. Delay is one-way: halve
round-trip figures before writing them down.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

from fogrig import units
from fogrig.infra.model import (
    Connection,
    ConnectionProperties,
    InfrastructureError,
    InfrastructureModel,
    MachineSpec,
)

_CONNECTION_KEYS = {
    "from", "to", "rate_mbit", "delay_ms_oneway", "dispersion_ms",
    "loss_pct", "corruption_pct", "reorder_pct", "duplicate_pct",
}


def _number(raw: dict, key: str, context: str, problems: list[str],
            default: float | None = None) -> float | None:
    if key not in raw:
        if default is None:
            problems.append(f"{context}: missing required field {key!r}")
        return default
    value = raw[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        problems.append(f"{context}: field {key!r} must be a number, got {value!r}")
        return default
    return float(value)


def parse_infrastructure(document: str | dict) -> InfrastructureModel:
    """Parse and validate an infrastructure document.

    Accepts raw JSON text or an already-decoded mapping. Raises
    :class:`InfrastructureError` carrying every violation found.
    """
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise InfrastructureError([f"document is not valid JSON: {exc}"]) from exc
    if not isinstance(document, dict):
        raise InfrastructureError([f"document root must be an object, got {type(document).__name__}"])

    problems: list[str] = []
    nodes: list[MachineSpec] = []
    for index, raw in enumerate(document.get("machines", [])):
        context = f"machines[{index}]"
        if not isinstance(raw, dict):
            problems.append(f"{context}: must be an object")
            continue
        machine_id = raw.get("id")
        if not isinstance(machine_id, str) or not machine_id:
            problems.append(f"{context}: missing or invalid id")
            continue
        cpu = _number(raw, "cpu_cores", context, problems)
        memory = _number(raw, "memory_mb", context, problems)
        storage = _number(raw, "storage_mb", context, problems, default=0.0)
        nodes.append(MachineSpec(
            id=machine_id,
            kind="machine",
            cpu_cores=cpu if cpu is not None else 0.0,
            memory_bytes=units.mb_to_bytes(memory) if memory is not None else 0,
            storage_bytes=units.mb_to_bytes(storage) if storage is not None else 0,
        ))
    for index, raw in enumerate(document.get("routers", [])):
        context = f"routers[{index}]"
        if isinstance(raw, str):
            raw = {"id": raw}
        if not isinstance(raw, dict) or not isinstance(raw.get("id"), str) or not raw.get("id"):
            problems.append(f"{context}: missing or invalid id")
            continue
        nodes.append(MachineSpec(id=raw["id"], kind="router"))

    connections: list[Connection] = []
    for index, raw in enumerate(document.get("connections", [])):
        context = f"connections[{index}]"
        if not isinstance(raw, dict):
            problems.append(f"{context}: must be an object")
            continue
        unknown = set(raw) - _CONNECTION_KEYS
        if unknown:
            problems.append(f"{context}: unknown fields {sorted(unknown)}")
        endpoint_a = raw.get("from")
        endpoint_b = raw.get("to")
        if not isinstance(endpoint_a, str) or not isinstance(endpoint_b, str):
            problems.append(f"{context}: 'from' and 'to' must be node ids")
            continue
        rate = _number(raw, "rate_mbit", context, problems)
        delay = _number(raw, "delay_ms_oneway", context, problems)
        if rate is None or delay is None:
            continue
        connections.append(Connection(endpoint_a, endpoint_b, ConnectionProperties(
            rate_bps=units.mbit_to_bps(rate),
            delay_ms=delay,
            dispersion_ms=_number(raw, "dispersion_ms", context, problems, 0.0) or 0.0,
            loss=units.pct_to_probability(_number(raw, "loss_pct", context, problems, 0.0) or 0.0),
            corruption=units.pct_to_probability(_number(raw, "corruption_pct", context, problems, 0.0) or 0.0),
            reorder=units.pct_to_probability(_number(raw, "reorder_pct", context, problems, 0.0) or 0.0),
            duplicate=units.pct_to_probability(_number(raw, "duplicate_pct", context, problems, 0.0) or 0.0),
        )))

    model = InfrastructureModel(tuple(nodes), tuple(connections))
    problems.extend(model.violations())
    if problems:
        raise InfrastructureError(problems)
    return model


def load_infrastructure(path: str | Path) -> InfrastructureModel:
    return parse_infrastructure(Path(path).read_text(encoding="utf-8"))


def serialize_infrastructure(model: InfrastructureModel) -> dict[str, Any]:
    """Inverse of :func:`parse_infrastructure`; the result parses to an equal model."""
    machines = []
    routers = []
    for node in model.nodes:
        if node.is_machine:
            machines.append({
                "id": node.id,
                "cpu_cores": node.cpu_cores,
                "memory_mb": node.memory_bytes / units.MIB,
                "storage_mb": node.storage_bytes / units.MIB,
            })
        else:
            routers.append({"id": node.id})
    connections = []
    for connection in model.connections:
        props = connection.properties
        entry: dict[str, Any] = {
            "from": connection.endpoint_a,
            "to": connection.endpoint_b,
            "rate_mbit": props.rate_bps / units.MBIT,
            "delay_ms_oneway": props.delay_ms,
        }
        if props.dispersion_ms:
            entry["dispersion_ms"] = props.dispersion_ms
        for field_name, key in (("loss", "loss_pct"), ("corruption", "corruption_pct"),
                                ("reorder", "reorder_pct"), ("duplicate", "duplicate_pct")):
            value = getattr(props, field_name)
            if value:
                entry[key] = value * 100.0
        connections.append(entry)
    return {"machines": machines, "routers": routers, "connections": connections}
