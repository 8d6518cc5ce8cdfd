"""FastAPI edge server exposing the full pipeline over JSON.

Camera-side operations (mask, encode) and server-side operations (decode,
fill, project, report, simulate, sweep) share one process here; the CLI is
a thin client that can talk to an in-process instance or a remote one.
Domain errors map to 422, bad binary inputs to 422, filesystem problems to
400 so clients can tell misuse from missing data.
"""

from __future__ import annotations

import base64
import binascii
import json

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__, wire
from ..errors import FormatError, MvmaskError, RangeError
from ..geometry import (
    parse_calibration,
    project_ground_to_pixel,
    project_pixel_to_ground,
)
from ..imageio import (
    RasterImage,
    SegMask,
    binarize_mask,
    downsample_by_2,
    image_from_bytes,
    image_to_bytes,
)
from ..masking import (
    MODE_RANDOM,
    MODE_SEMANTIC,
    MaskPlan,
    activity_map,
    sample_random,
    sample_unmasked,
    selection_distribution,
)
from ..metrics import sweep, sweep_csv
from ..patch_grid import count_from_milli, make_grid, ratio_to_milli
from ..reconstruct import fill_baseline
from ..sim import parse_scenario, run
from . import schemas


def _from_b64(data: str, what: str) -> bytes:
    try:
        return base64.b64decode(data, validate=True)
    except binascii.Error as exc:
        raise FormatError(f"invalid base64 in {what}: {exc}") from None


def _to_b64(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def _plan_info(plan: MaskPlan) -> schemas.PlanInfo:
    grid = plan.grid
    return schemas.PlanInfo(
        mode=plan.mode,
        ratio=plan.r,
        r_milli=plan.r_milli,
        kappa=plan.kappa,
        seed=plan.rng_seed,
        unmasked_count=plan.unmasked_count,
        unmasked=[int(i) for i in plan.unmasked],
        grid=schemas.GridInfo(
            width=grid.image_width,
            height=grid.image_height,
            patch_size=grid.patch_size,
            cols=grid.cols,
            rows=grid.rows,
            patch_count=grid.patch_count,
        ),
        plan_b64=_to_b64(wire.encode_plan(plan)),
    )


def _build_plan(req: schemas.MaskRequest) -> tuple[RasterImage | None, MaskPlan]:
    """Shared camera-side path: optional downscale, then draw a plan."""
    img = image_from_bytes(_from_b64(req.image_b64, "image_b64")) if req.image_b64 else None
    mask_img = image_from_bytes(_from_b64(req.mask_b64, "mask_b64")) if req.mask_b64 else None
    if req.downscale < 0:
        raise RangeError("downscale must be >= 0")
    for _ in range(req.downscale):
        img = downsample_by_2(img) if img else None
        mask_img = downsample_by_2(mask_img) if mask_img else None
    sized = img or mask_img
    if sized is None:
        raise FormatError("request needs image_b64 or mask_b64 to fix dimensions")
    grid = make_grid(sized.width, sized.height, req.patch_size)
    if req.mode == MODE_SEMANTIC:
        if mask_img is None:
            raise FormatError("semantic mode needs mask_b64")
        dist = selection_distribution(
            activity_map(binarize_mask(mask_img), grid), req.kappa
        )
        plan = sample_unmasked(dist, grid, req.ratio, req.seed)
    elif req.mode == MODE_RANDOM:
        plan = sample_random(grid, req.ratio, req.seed)
    else:
        raise RangeError(f"mode must be semantic or random, got {req.mode!r}")
    return img, plan


def create_app() -> FastAPI:
    app = FastAPI(title="mvmask edge server", version=__version__)

    @app.exception_handler(MvmaskError)
    async def _domain_error(_: Request, exc: MvmaskError) -> JSONResponse:
        return JSONResponse(
            status_code=422, content={"detail": str(exc), "error": type(exc).__name__}
        )

    @app.exception_handler(OSError)
    async def _io_error(_: Request, exc: OSError) -> JSONResponse:
        return JSONResponse(
            status_code=400, content={"detail": str(exc), "error": "IoError"}
        )

    @app.get("/health")
    async def health() -> dict:
        return {"status": "ok", "service": "mvmask", "version": __version__}

    @app.post("/mask")
    async def mask(req: schemas.MaskRequest) -> schemas.PlanInfo:
        _, plan = _build_plan(req)
        return _plan_info(plan)

    @app.post("/encode")
    async def encode(req: schemas.EncodeRequest) -> schemas.EncodeResponse:
        if req.plan_b64 is not None:
            if req.image_b64 is None:
                raise FormatError("encode needs image_b64")
            img = image_from_bytes(_from_b64(req.image_b64, "image_b64"))
            for _ in range(req.downscale):
                img = downsample_by_2(img)
            plan = wire.decode_plan(_from_b64(req.plan_b64, "plan_b64"))
        else:
            img, plan = _build_plan(req)
            if img is None:
                raise FormatError("encode needs image_b64")
        frame = wire.encode(img, plan, camera_id=req.camera_id, frame_id=req.frame_id)
        return schemas.EncodeResponse(
            frame_b64=_to_b64(frame),
            frame_bytes=len(frame),
            payload_bits=plan.unmasked_count * plan.grid.patch_size**2 * wire.BITS_PER_PIXEL,
            index_bits=wire.index_block_bits(plan),
            header_bits=wire.HEADER_BITS,
            plan=_plan_info(plan),
        )

    @app.post("/decode")
    async def decode(req: schemas.DecodeRequest) -> schemas.DecodeResponse:
        plan, sparse = wire.decode(_from_b64(req.frame_b64, "frame_b64"))
        known = RasterImage(sparse.known.astype(np.uint8) * np.uint8(255))
        return schemas.DecodeResponse(
            plan=_plan_info(plan),
            sparse_b64=_to_b64(image_to_bytes(RasterImage(sparse.pixels))),
            known_b64=_to_b64(image_to_bytes(known)),
        )

    @app.post("/fill")
    async def fill(req: schemas.FillRequest) -> schemas.FillResponse:
        plan, sparse = wire.decode(_from_b64(req.frame_b64, "frame_b64"))
        filled = fill_baseline(sparse, plan, req.method)
        return schemas.FillResponse(image_b64=_to_b64(image_to_bytes(filled)))

    @app.post("/project")
    async def project(req: schemas.ProjectRequest) -> schemas.ProjectResponse:
        cam = parse_calibration(req.calibration_text)
        if req.direction == "ground-to-pixel":
            a, b = project_ground_to_pixel(cam, req.a, req.b)
        elif req.direction == "pixel-to-ground":
            a, b = project_pixel_to_ground(cam, req.a, req.b)
        else:
            raise RangeError(f"unknown direction {req.direction!r}")
        return schemas.ProjectResponse(a=a, b=b)

    @app.post("/report")
    async def report(req: schemas.ReportRequest) -> schemas.ReportResponse:
        if req.cameras < 1:
            raise RangeError("cameras must be >= 1")
        if req.mode not in (MODE_RANDOM, MODE_SEMANTIC):
            raise RangeError(f"mode must be semantic or random, got {req.mode!r}")
        grid = make_grid(req.width, req.height, req.patch_size)
        r_milli = ratio_to_milli(req.ratio)
        keep = count_from_milli(grid.patch_count, r_milli)
        plan = MaskPlan(
            grid=grid,
            unmasked=np.arange(keep, dtype=np.int64),
            r_milli=r_milli,
            kappa=None,
            rng_seed=0,
            mode=req.mode,
        )
        original = None
        if req.original_width is not None or req.original_height is not None:
            if req.original_width is None or req.original_height is None:
                raise RangeError("original_width and original_height go together")
            original = (req.original_width, req.original_height)
        rep = wire.comm_report(
            [plan] * req.cameras, header_policy=req.header_policy, original_size=original
        )
        return schemas.ReportResponse(
            cameras=rep.cameras,
            payload_bits=rep.payload_bits,
            header_bits=rep.header_bits,
            index_bits=rep.index_bits,
            total_bits=rep.total_bits,
            baseline_full_bits=rep.baseline_full_bits,
            megabits=rep.megabits,
            baseline_megabits=rep.baseline_megabits,
            reduction_numerator=None
            if rep.reduction_factor is None
            else rep.reduction_factor.numerator,
            reduction_denominator=None
            if rep.reduction_factor is None
            else rep.reduction_factor.denominator,
            reduction_factor=None
            if rep.reduction_factor is None
            else float(rep.reduction_factor),
        )

    @app.post("/simulate")
    async def simulate(req: schemas.SimulateRequest) -> schemas.SimulateResponse:
        scenario = parse_scenario(req.scenario_text, base_dir=req.base_dir)
        result = run(scenario, workers=max(1, req.workers), bev_dir=req.bev_dir)
        return schemas.SimulateResponse(
            report=json.loads(result.to_json()),
            frames_csv=result.to_frames_csv(),
        )

    @app.post("/sweep")
    async def sweep_route(req: schemas.SweepRequest) -> schemas.SweepResponse:
        masks: list[SegMask] = [
            binarize_mask(image_from_bytes(_from_b64(m, f"masks_b64[{i}]")))
            for i, m in enumerate(req.masks_b64)
        ]
        rows = sweep(
            masks,
            r_values=req.r_values,
            kappa=req.kappa,
            modes=req.modes,
            seeds=req.seeds,
            patch_size=req.patch_size,
        )
        return schemas.SweepResponse(csv=sweep_csv(rows), rows=len(rows))

    return app
