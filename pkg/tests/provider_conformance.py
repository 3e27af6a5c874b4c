"""Reusable provider conformance suite.

Any provider implementation can be checked by subclassing and overriding the
``provider`` fixture. The suite asserts the contract documented on
:class:`fogrig.provider.base.Provider`: idempotent bootstrap with distinct
address pairs, reachable agents after install (with respawn of dead ones),
and a destroy that releases everything and may be repeated.
"""

from __future__ import annotations

import pytest

from fogrig.infra.document import parse_infrastructure
from fogrig.provider.base import Provider, ProvisioningError


def small_model():
    return parse_infrastructure({
        "machines": [
            {"id": "alpha", "cpu_cores": 1, "memory_mb": 256},
            {"id": "beta", "cpu_cores": 1, "memory_mb": 256},
            {"id": "gamma", "cpu_cores": 2, "memory_mb": 512},
        ],
        "connections": [
            {"from": "alpha", "to": "beta", "rate_mbit": 100, "delay_ms_oneway": 2},
            {"from": "beta", "to": "gamma", "rate_mbit": 100, "delay_ms_oneway": 3},
        ],
    })


class ProviderConformance:
    @pytest.fixture()
    def provider(self, tmp_path) -> Provider:
        raise NotImplementedError("subclasses provide the provider under test")

    def test_descriptor_has_a_catalog(self, provider):
        descriptor = provider.descriptor()
        assert descriptor.catalog
        ranks = [entry.cost_rank for entry in descriptor.catalog]
        assert len(set(ranks)) == len(ranks)

    def test_bootstrap_yields_distinct_address_pairs(self, provider):
        model = small_model()
        handles = provider.bootstrap(model)
        try:
            assert set(handles) == set(model.machine_ids)
            addresses = [h.application_address for h in handles.values()]
            addresses += [h.management_address for h in handles.values()]
            assert len(set(addresses)) == len(addresses)
            for handle in handles.values():
                assert handle.application_address != handle.management_address
        finally:
            provider.destroy(handles)

    def test_bootstrap_rejects_empty_model(self, provider):
        empty = parse_infrastructure({"machines": []})
        with pytest.raises(ProvisioningError):
            provider.bootstrap(empty)

    def test_bootstrap_is_idempotent(self, provider):
        model = small_model()
        first = provider.bootstrap(model)
        try:
            second = provider.bootstrap(model, existing=first)
            assert second == first
        finally:
            provider.destroy(first)

    def test_install_makes_agents_reachable_and_destroy_releases(self, provider):
        model = small_model()
        handles = provider.bootstrap(model)
        try:
            handles = provider.install_agents(model, handles)
            for handle in handles.values():
                assert provider.probe(handle)
        finally:
            report = provider.destroy(handles)
        assert report.clean
        for handle in handles.values():
            assert not provider.probe(handle)
        # Destroy again: still fine.
        assert provider.destroy(handles).clean
