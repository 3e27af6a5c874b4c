import pytest

from fogrig.infra.model import InfrastructureError
from fogrig.infra.overlay import (
    EMPTY_OVERLAY,
    InfraUpdate,
    LinkOverride,
    MachineOverride,
)
from fogrig.infra.paths import effective_properties


def test_link_override_changes_only_named_properties(routed_model):
    overlay = EMPTY_OVERLAY.merge(InfraUpdate(links=(
        LinkOverride("R1", "R2", delay_ms=40.0),
    )))
    modified = overlay.apply(routed_model)
    link = modified.connection_between("R1", "R2")
    assert link.properties.delay_ms == 40.0
    assert link.properties.rate_bps == routed_model.connection_between("R1", "R2").properties.rate_bps


def test_machine_override_scales_memory_from_pristine(routed_model):
    overlay = EMPTY_OVERLAY.merge(InfraUpdate(machines=(
        MachineOverride("M1", memory_scale=0.8),
    )))
    once = overlay.apply(routed_model)
    # Merging the same scale again must not compound: it applies to pristine.
    twice = overlay.merge(InfraUpdate(machines=(MachineOverride("M1", memory_scale=0.8),))) \
        .apply(routed_model)
    pristine = routed_model.machine("M1").memory_bytes
    assert once.machine("M1").memory_bytes == int(round(pristine * 0.8))
    assert twice.machine("M1").memory_bytes == int(round(pristine * 0.8))


def test_updates_accumulate_until_reset(routed_model):
    overlay = EMPTY_OVERLAY.merge(InfraUpdate(machines=(MachineOverride("M1", cpu_cores=0.5),)))
    overlay = overlay.merge(InfraUpdate(links=(LinkOverride("R1", "R2", loss=0.2),)))
    modified = overlay.apply(routed_model)
    assert modified.machine("M1").cpu_cores == 0.5
    assert modified.connection_between("R1", "R2").properties.loss == 0.2

    overlay = overlay.merge(InfraUpdate(reset=True))
    assert overlay.empty
    assert overlay.apply(routed_model) == routed_model


def test_reset_then_apply_in_one_update(routed_model):
    overlay = EMPTY_OVERLAY.merge(InfraUpdate(machines=(MachineOverride("M1", cpu_cores=0.5),)))
    overlay = overlay.merge(InfraUpdate(reset=True,
                                        links=(LinkOverride("R1", "R2", loss=0.1),)))
    modified = overlay.apply(routed_model)
    assert modified.machine("M1").cpu_cores == 1.0
    assert modified.connection_between("R1", "R2").properties.loss == 0.1


def test_downed_link_forces_rerouting_or_unreachable(routed_model):
    overlay = EMPTY_OVERLAY.merge(InfraUpdate(links=(LinkOverride("R1", "R2", down=True),)))
    modified = overlay.apply(routed_model)
    result = effective_properties(modified, "M2", "M6")
    assert not result.reachable
    assert result.loss == 1.0


def test_partitions_accumulate_and_normalize():
    overlay = EMPTY_OVERLAY.merge(InfraUpdate(partitions=("M1", ("M3", "M2"))))
    assert overlay.partitions == {"M1", ("M2", "M3")}
    cut = overlay.partitioned_peers("M2", ["M1", "M3", "M4"])
    assert cut == {"M1", "M3"}


def test_unknown_override_targets_rejected(routed_model):
    overlay = EMPTY_OVERLAY.merge(InfraUpdate(machines=(MachineOverride("nope", cpu_cores=1),)))
    with pytest.raises(InfrastructureError):
        overlay.apply(routed_model)
