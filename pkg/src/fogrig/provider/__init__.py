"""Machine fleet provisioning behind a pluggable provider interface."""

from fogrig.provider.base import (
    LIFECYCLE_ORDER,
    DestroyReport,
    MachineHandle,
    Provider,
    ProviderDescriptor,
    ProvisioningError,
    TestbedState,
    load_state,
    save_state,
)
from fogrig.provider.local import LocalProcessProvider

__all__ = [
    "DestroyReport",
    "LIFECYCLE_ORDER",
    "LocalProcessProvider",
    "MachineHandle",
    "Provider",
    "ProviderDescriptor",
    "ProvisioningError",
    "TestbedState",
    "load_state",
    "save_state",
]
