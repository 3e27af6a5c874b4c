"""REST surface of the agent.

Endpoints: ``GET /status``, ``POST /ping``, ``PUT /network``,
``GET /network``, ``PUT /limits``, ``GET /limits``. The generated OpenAPI
document is committed at ``docs/agent-openapi.json``; regenerate it with
``python -m fogrig.agent --print-openapi``.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from fogrig.agent.appnet import AppPlane
from fogrig.agent.backends import BackendError
from fogrig.agent.core import AgentCore, StaleRevisionError
from fogrig.agent.runtime import UnknownContainerError
from fogrig.netplan.plan import config_from_wire, config_to_wire


class StatusResponse(BaseModel):
    agent: str
    uptime_s: float
    applied_revision: int
    shaper_backend: str
    warnings: list[str]


class NetworkEntry(BaseModel):
    target: str
    target_address: str
    delay_ms: float = 0.0
    dispersion_ms: float = 0.0
    rate_bps: float | None = None
    loss: float = Field(0.0, ge=0.0, le=1.0)
    corruption: float = Field(0.0, ge=0.0, le=1.0)
    reorder: float = Field(0.0, ge=0.0, le=1.0)
    duplicate: float = Field(0.0, ge=0.0, le=1.0)


class NetworkConfigBody(BaseModel):
    agent: str
    revision: int = Field(ge=1)
    entries: list[NetworkEntry] = []


class ApplyAck(BaseModel):
    revision: int
    warnings: list[str]


class PingRequest(BaseModel):
    targets: list[str] = Field(min_length=1)
    samples: int = Field(10, ge=1)
    timeout_ms: float = Field(500.0, gt=0)


class PingReportEntry(BaseModel):
    target: str
    samples: int
    loss_fraction: float
    rtt_avg_ms: float | None
    rtt_stddev_ms: float | None


class PingResponse(BaseModel):
    reports: list[PingReportEntry]


class ContainerLimitBody(BaseModel):
    container: str
    cpu_cores: float = Field(gt=0)
    memory_bytes: int = Field(gt=0)


class LimitsRequest(BaseModel):
    limits: list[ContainerLimitBody]


class LimitsAck(BaseModel):
    updated: list[str]


def create_app(core: AgentCore, plane: AppPlane | None = None) -> FastAPI:
    app = FastAPI(title="fogrig node agent", version="1.0.0",
                  description="Per-machine control surface for network impairments, "
                              "ping measurement, and container resource limits.")

    @app.get("/status", response_model=StatusResponse)
    def get_status() -> dict:
        return core.status()

    @app.post("/ping", response_model=PingResponse)
    def post_ping(request: PingRequest) -> dict:
        if plane is None:
            raise HTTPException(status_code=501, detail="no application network on this backend")
        reports = plane.measure_ping(request.targets, samples=request.samples,
                                     timeout_s=request.timeout_ms / 1000.0)
        return {"reports": reports}

    @app.put("/network", response_model=ApplyAck)
    def put_network(body: NetworkConfigBody) -> dict:
        config = config_from_wire(body.model_dump())
        try:
            return core.apply_network_config(config)
        except StaleRevisionError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        except BackendError as exc:
            raise HTTPException(status_code=500, detail=f"backend failed, rolled back: {exc}") from exc

    @app.get("/network")
    def get_network() -> dict:
        return config_to_wire(core.network_config())

    @app.put("/limits", response_model=LimitsAck)
    def put_limits(body: LimitsRequest) -> dict:
        try:
            return core.set_container_limits([entry.model_dump() for entry in body.limits])
        except UnknownContainerError as exc:
            raise HTTPException(status_code=404, detail=f"unknown container: {exc}") from exc

    @app.get("/limits")
    def get_limits() -> dict:
        return core.current_limits()

    return app
