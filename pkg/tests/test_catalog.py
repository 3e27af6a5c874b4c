import pytest

from fogrig import units
from fogrig.infra.catalog import MachineCatalogEntry, NoMatchingTypeError, select_machine_type
from fogrig.infra.model import MachineSpec

GB = units.mb_to_bytes(1024)

CATALOG = [
    MachineCatalogEntry(1, "small", 1, units.mb_to_bytes(512), 10 * GB),
    MachineCatalogEntry(2, "medium", 1, 2 * GB, 20 * GB),
    MachineCatalogEntry(3, "large", 2, 4 * GB, 40 * GB),
]


def _machine(cpu, memory_mb, storage_mb=0):
    return MachineSpec(id="m", cpu_cores=cpu,
                       memory_bytes=units.mb_to_bytes(memory_mb),
                       storage_bytes=units.mb_to_bytes(storage_mb))


def test_picks_cheapest_sufficient_entry():
    # 1 core / 1 GB: small is too small on memory, medium fits.
    assignment = select_machine_type(_machine(1, 1024), CATALOG)
    assert assignment.entry.type_name == "medium"
    assert assignment.surplus_memory_bytes == GB
    assert assignment.surplus_cpu_cores == 0


def test_exact_match_has_zero_surplus():
    assignment = select_machine_type(_machine(2, 4096, 40 * 1024), CATALOG)
    assert assignment.entry.type_name == "large"
    assert assignment.exact


def test_unsatisfiable_cpu_names_the_binding_dimension():
    with pytest.raises(NoMatchingTypeError) as excinfo:
        select_machine_type(_machine(8, 1024), CATALOG)
    assert excinfo.value.binding_dimensions == ["cpu_cores"]
    assert "cpu_cores" in str(excinfo.value)


def test_cross_constrained_failure_still_raises():
    # Each dimension is individually satisfiable, but no single entry fits.
    catalog = [
        MachineCatalogEntry(1, "cpu-heavy", 8, 1 * GB, 10 * GB),
        MachineCatalogEntry(2, "mem-heavy", 1, 16 * GB, 10 * GB),
    ]
    with pytest.raises(NoMatchingTypeError) as excinfo:
        select_machine_type(_machine(4, 8192), catalog)
    assert excinfo.value.binding_dimensions == []


def test_empty_catalog_rejected():
    with pytest.raises(ValueError):
        select_machine_type(_machine(1, 64), [])


def test_duplicate_cost_ranks_rejected():
    catalog = [CATALOG[0], MachineCatalogEntry(1, "other", 4, 8 * GB, 80 * GB)]
    with pytest.raises(ValueError):
        select_machine_type(_machine(1, 64), catalog)
