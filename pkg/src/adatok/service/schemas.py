"""Request/response models for the HTTP service."""

from __future__ import annotations

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str = "ok"
    service: str = "adatok"
    version: str


class CostRequest(BaseModel):
    """Either `ratio` directly, or `tokens` plus the grid to derive it from."""

    layers: int = Field(ge=1)
    compress_at: int = Field(default=1, ge=1)
    ratio: float | None = None
    tokens: int | None = Field(default=None, ge=1)
    grid_h: int | None = Field(default=None, ge=1)
    grid_w: int | None = Field(default=None, ge=1)
    flops_per_unit: float | None = Field(default=None, gt=0)


class CostResponse(BaseModel):
    cost_uncompressed: float
    cost_compressed: float
    benefit: float
    ratio: float
    units: str


class BandwidthRow(BaseModel):
    kind: str  # "image" or "tokens"
    label: str
    payload_bytes: int
    display_value: float
    unit: str
    display: str


class BandwidthTableResponse(BaseModel):
    rows: list[BandwidthRow]


class BandwidthQueryResponse(BaseModel):
    image_bytes: int | None
    token_bytes: int | None
    reduction_factor: float | None
    rows: list[BandwidthRow]


class FrameIngestResponse(BaseModel):
    sha256: str
    stored_as: str | None
    tokens: int
    dim: int
    frame_bytes: int


class ErrorEnvelope(BaseModel):
    error: str
    message: str
