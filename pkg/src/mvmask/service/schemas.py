"""Request/response bodies for the edge-server API.

Binary payloads (PPM/PGM images, wire frames, plan records) travel as
base64 strings inside JSON so clients need nothing beyond an HTTP library.
"""

from __future__ import annotations

from pydantic import BaseModel, Field


class GridInfo(BaseModel):
    width: int
    height: int
    patch_size: int
    cols: int
    rows: int
    patch_count: int


class PlanInfo(BaseModel):
    mode: str
    ratio: float
    r_milli: int
    kappa: float | None
    seed: int
    unmasked_count: int
    unmasked: list[int]
    grid: GridInfo
    plan_b64: str = Field(description="plan-only wire record, base64")


class MaskRequest(BaseModel):
    image_b64: str | None = None
    mask_b64: str | None = None
    ratio: float = 0.7
    kappa: float = 0.15
    mode: str = "semantic"
    seed: int = 0
    patch_size: int = 20
    downscale: int = Field(default=1, description="2x downsampling steps before masking")


class EncodeRequest(MaskRequest):
    plan_b64: str | None = None
    camera_id: int = 0
    frame_id: int = 0


class EncodeResponse(BaseModel):
    frame_b64: str
    frame_bytes: int
    payload_bits: int
    index_bits: int
    header_bits: int
    plan: PlanInfo


class DecodeRequest(BaseModel):
    frame_b64: str


class DecodeResponse(BaseModel):
    plan: PlanInfo
    sparse_b64: str = Field(description="received pixels as PPM, masked pixels zero")
    known_b64: str = Field(description="PGM, 255 where pixels arrived")


class FillRequest(BaseModel):
    frame_b64: str
    method: str = "nearest-patch"


class FillResponse(BaseModel):
    image_b64: str


class ProjectRequest(BaseModel):
    calibration_text: str
    direction: str = Field(
        default="ground-to-pixel",
        description="'ground-to-pixel' maps (x, y) meters; 'pixel-to-ground' maps (u, v) pixels",
    )
    a: float
    b: float


class ProjectResponse(BaseModel):
    a: float
    b: float


class ReportRequest(BaseModel):
    cameras: int = 7
    ratio: float = 0.7
    patch_size: int = 20
    width: int = 640
    height: int = 360
    mode: str = "semantic"
    header_policy: str = "payload-only"
    original_width: int | None = None
    original_height: int | None = None


class ReportResponse(BaseModel):
    cameras: int
    payload_bits: int
    header_bits: int
    index_bits: int
    total_bits: int
    baseline_full_bits: int
    megabits: float
    baseline_megabits: float
    reduction_numerator: int | None
    reduction_denominator: int | None
    reduction_factor: float | None


class SimulateRequest(BaseModel):
    scenario_text: str
    base_dir: str = "."
    workers: int = 1
    bev_dir: str | None = Field(
        default=None, description="write per-frame aggregated BEV heatmaps (PGM) here"
    )


class SimulateResponse(BaseModel):
    report: dict
    frames_csv: str


class SweepRequest(BaseModel):
    masks_b64: list[str]
    r_values: list[float]
    kappa: float = 0.15
    modes: list[str] = ["semantic", "random"]
    seeds: list[int] = [0]
    patch_size: int = 20


class SweepResponse(BaseModel):
    csv: str
    rows: int
