"""Render agent configs into executable artifacts.

Two backends are served: a traffic-control command script (``tc`` qdisc and
netem syntax with one per-destination filter per entry) and a neutral JSON
impairment table for the in-process proxy. Both renderings are fully
deterministic: identical configs produce byte-identical output, so the
results are golden-file testable and are persisted verbatim for audit.
"""

from __future__ import annotations

import json
from typing import Iterable

from fogrig import units
from fogrig.netplan.plan import AgentNetworkConfig, config_to_wire

# htb requires a finite ceiling; also used for uncapped entries.
_UNCAPPED_RATE = "10gbit"


def render_shaper_script(config: AgentNetworkConfig, device: str = "eth0",
                         management_addresses: Iterable[str] = ()) -> list[str]:
    """Ordered command list: reset preamble, then one rule block per entry.

    The first command tears down previous state and may fail on a pristine
    device; executors must tolerate a non-zero exit for it. Management
    addresses are pinned to the vanilla class ahead of every shaping filter,
    so no manipulation can match them.
    """
    script = [
        f"tc qdisc del dev {device} root",
        f"tc qdisc add dev {device} root handle 1: htb default 1",
        f"tc class add dev {device} parent 1: classid 1:1 htb rate {_UNCAPPED_RATE}",
    ]
    for address in sorted(set(management_addresses)):
        host = address.rsplit(":", 1)[0]
        script.append(
            f"tc filter add dev {device} parent 1: protocol ip prio 0 u32 "
            f"match ip dst {host}/32 flowid 1:1"
        )
    for index, entry in enumerate(sorted(config.entries, key=lambda e: e.target)):
        classid = f"1:{index + 10}"
        handle = f"{index + 10}:"
        rate = _UNCAPPED_RATE if entry.rate_bps is None else units.format_rate(entry.rate_bps)
        netem = _netem_options(entry)
        host = entry.target_address.rsplit(":", 1)[0]
        script.append(f"tc class add dev {device} parent 1: classid {classid} htb rate {rate}")
        script.append(f"tc qdisc add dev {device} parent {classid} handle {handle} netem{netem}")
        script.append(
            f"tc filter add dev {device} parent 1: protocol ip prio 1 u32 "
            f"match ip dst {host}/32 flowid {classid}"
        )
    return script


def _netem_options(entry) -> str:
    options = ""
    if entry.delay_ms or entry.dispersion_ms:
        options += f" delay {units.format_ms(entry.delay_ms)}"
        if entry.dispersion_ms:
            options += f" {units.format_ms(entry.dispersion_ms)}"
    if entry.loss:
        options += f" loss {units.format_percent(entry.loss)}"
    if entry.corruption:
        options += f" corrupt {units.format_percent(entry.corruption)}"
    if entry.reorder:
        options += f" reorder {units.format_percent(entry.reorder)}"
    if entry.duplicate:
        options += f" duplicate {units.format_percent(entry.duplicate)}"
    return options


def render_impairment_table(config: AgentNetworkConfig) -> str:
    """The JSON impairment table consumed by the proxy backend."""
    return json.dumps(config_to_wire(config), indent=2, sort_keys=True) + "\n"
