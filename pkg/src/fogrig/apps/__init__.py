"""Container configuration, deployment mapping, and lifecycle management."""

from fogrig.apps.config import (
    ApplicationConfig,
    ContainerConfig,
    CopyDir,
    DeploymentEntry,
    DeploymentError,
    ResolverExpression,
    parse_application,
)
from fogrig.apps.manager import (
    collect_results,
    prepare_files,
    resolve_env,
    start_containers,
    stop_containers,
)
from fogrig.apps.runtime import ContainerRuntime, DockerCliRuntime, ProcessRuntime, RecordingRuntime

__all__ = [
    "ApplicationConfig",
    "ContainerConfig",
    "ContainerRuntime",
    "CopyDir",
    "DeploymentEntry",
    "DeploymentError",
    "DockerCliRuntime",
    "ProcessRuntime",
    "RecordingRuntime",
    "ResolverExpression",
    "collect_results",
    "parse_application",
    "prepare_files",
    "resolve_env",
    "start_containers",
    "stop_containers",
]
