"""Discrete-time multi-camera network simulation.

Each frame, every camera is either dropped by the link or runs the sender
side (downsample, mask, encode); the receiving side decodes, fills, projects
coverage to the shared ground grid and aggregates across survivors. The
whole run is a pure function of the scenario text: camera i at frame f masks
with seed mix_seed(base_seed, i, f, 0) and draws its dropout uniform from
mix_seed(base_seed, i, f, 1), so results do not depend on execution order
and repeat byte-for-byte. Transport is in-process on purpose; the wire
format itself is the transmission artifact.
"""

from __future__ import annotations

import json
import math
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Protocol, Sequence

from . import wire
from .errors import ConfigError, DimensionMismatch
from .geometry import (
    BevGrid,
    CameraModel,
    aggregate,
    bev_to_pgm,
    load_calibration,
    splat_coverage,
)
from .imageio import RasterImage, SegMask, binarize_mask, downsample_by_2, load_image
from .masking import (
    MODE_RANDOM,
    MODE_SEMANTIC,
    MaskPlan,
    activity_map,
    sample_random,
    sample_unmasked,
    selection_distribution,
)
from .metrics import RetentionStats, retention
from .patch_grid import make_grid
from .reconstruct import FILL_METHODS, FILL_NEAREST, fill_baseline
from .rng import Stream, mix_seed
from .synth import SyntheticScene

DROPOUT_RANDOM = "random"
DROPOUT_FIXED = "fixed"


@dataclass(frozen=True)
class CameraFiles:
    calibration: Path
    images: Path
    masks: Path


@dataclass
class Scenario:
    """Parsed flat key=value run configuration."""

    frames: int
    frame_rate: float = 2.0
    ratio: float = 0.7
    kappa: float = 0.15
    mode: str = MODE_SEMANTIC
    seed: int = 0
    dropout: float = 0.0
    dropout_mode: str = DROPOUT_RANDOM
    patch_size: int = 20
    downscale_steps: int = 1
    fill: str = FILL_NEAREST
    header_policy: str = "payload-only"
    bev_rows: int = 60
    bev_cols: int = 60
    bev_cell_size: float = 0.1
    bev_origin_x: float = -3.0
    bev_origin_y: float = -3.0
    synthetic: bool = True
    synthetic_cameras: int = 7
    synthetic_width: int = 640
    synthetic_height: int = 360
    synthetic_pedestrians: int = 8
    synthetic_seed: int = 0
    camera_files: tuple[CameraFiles, ...] = ()

    def __post_init__(self) -> None:
        if self.frames < 1:
            raise ConfigError("scenario needs frames >= 1")
        if not 0.0 <= self.dropout <= 1.0:
            raise ConfigError(f"dropout must be in [0, 1], got {self.dropout}")
        if not 0.0 <= self.ratio <= 1.0:
            raise ConfigError(f"ratio must be in [0, 1], got {self.ratio}")
        if self.kappa < 0:
            raise ConfigError(f"kappa must be >= 0, got {self.kappa}")
        if self.mode not in (MODE_RANDOM, MODE_SEMANTIC):
            raise ConfigError(f"mode must be semantic or random, got {self.mode!r}")
        if self.dropout_mode not in (DROPOUT_RANDOM, DROPOUT_FIXED):
            raise ConfigError(f"dropout_mode must be random or fixed, got {self.dropout_mode!r}")
        if self.fill not in FILL_METHODS:
            raise ConfigError(f"fill must be one of {FILL_METHODS}, got {self.fill!r}")
        if self.header_policy not in ("payload-only", "include"):
            raise ConfigError(f"bad header_policy {self.header_policy!r}")
        if self.downscale_steps < 0:
            raise ConfigError("downscale_steps must be >= 0")
        if self.synthetic and self.camera_files:
            raise ConfigError("scenario mixes synthetic=true with cameraN_* files")
        if not self.synthetic and not self.camera_files:
            raise ConfigError("file scenario lists no cameras")

    @property
    def camera_count(self) -> int:
        return self.synthetic_cameras if self.synthetic else len(self.camera_files)

    def bev_template(self) -> BevGrid:
        return BevGrid(
            rows=self.bev_rows,
            cols=self.bev_cols,
            cell_size=self.bev_cell_size,
            origin_x=self.bev_origin_x,
            origin_y=self.bev_origin_y,
        )


_BOOL_WORDS = {"true": True, "yes": True, "1": True, "false": False, "no": False, "0": False}
_CAMERA_KEY = re.compile(r"^camera(\d+)_(calibration|images|masks)$")


def parse_scenario(text: str, base_dir: str | Path = ".") -> Scenario:
    """Parse 'key = value' lines ('#' comments) into a Scenario.

    Relative cameraN_* paths resolve against base_dir. Unknown keys are
    rejected rather than ignored so typos cannot silently change a run.
    """
    base = Path(base_dir)
    known_fields = {f.name: f.type for f in fields(Scenario) if f.name != "camera_files"}
    values: dict = {}
    camera_raw: dict[int, dict[str, Path]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        cam = _CAMERA_KEY.match(key)
        if cam:
            camera_raw.setdefault(int(cam.group(1)), {})[cam.group(2)] = base / val
            continue
        if key not in known_fields:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _parse_value(key, val, lineno)
    if camera_raw:
        values.setdefault("synthetic", False)
        entries = []
        for idx in range(len(camera_raw)):
            entry = camera_raw.get(idx)
            if entry is None:
                raise ConfigError(f"camera ids must be 0..{len(camera_raw) - 1}, missing {idx}")
            missing = {"calibration", "images", "masks"} - entry.keys()
            if missing:
                raise ConfigError(f"camera{idx} is missing {sorted(missing)}")
            entries.append(
                CameraFiles(entry["calibration"], entry["images"], entry["masks"])
            )
        values["camera_files"] = tuple(entries)
    if "frames" not in values:
        raise ConfigError("scenario must set frames")
    return Scenario(**values)


_INT_KEYS = {
    "frames",
    "seed",
    "patch_size",
    "downscale_steps",
    "bev_rows",
    "bev_cols",
    "synthetic_cameras",
    "synthetic_width",
    "synthetic_height",
    "synthetic_pedestrians",
    "synthetic_seed",
}
_FLOAT_KEYS = {
    "frame_rate",
    "ratio",
    "kappa",
    "dropout",
    "bev_cell_size",
    "bev_origin_x",
    "bev_origin_y",
}


def _parse_value(key: str, val: str, lineno: int):
    try:
        if key in _INT_KEYS:
            return int(val)
        if key in _FLOAT_KEYS:
            return float(val)
        if key == "synthetic":
            return _BOOL_WORDS[val.lower()]
        return val
    except (ValueError, KeyError):
        raise ConfigError(f"line {lineno}: bad value {val!r} for {key}") from None


def load_scenario(path: str | Path) -> Scenario:
    p = Path(path)
    return parse_scenario(p.read_text(), base_dir=p.parent)


class FrameSource(Protocol):
    def camera_models(self) -> list[CameraModel]: ...

    def frame(self, camera: int, frame_id: int) -> tuple[RasterImage, SegMask]: ...


class FileSource:
    """Frame source reading PPM images and PGM masks from per-camera dirs.

    Sequences are the lexicographically sorted files of each directory; all
    cameras must hold at least the scenario's frame count, and image/mask
    sequences must pair up one-to-one.
    """

    def __init__(self, entries: Sequence[CameraFiles], frame_count: int):
        self.cams = [load_calibration(e.calibration) for e in entries]
        self.sequences: list[tuple[list[Path], list[Path]]] = []
        for idx, entry in enumerate(entries):
            images = sorted(p for p in Path(entry.images).iterdir() if p.is_file())
            masks = sorted(p for p in Path(entry.masks).iterdir() if p.is_file())
            if len(images) != len(masks):
                raise ConfigError(
                    f"camera {idx}: {len(images)} images but {len(masks)} masks"
                )
            if len(images) < frame_count:
                raise ConfigError(
                    f"camera {idx} has {len(images)} frames, scenario needs {frame_count}"
                )
            self.sequences.append((images, masks))

    def camera_models(self) -> list[CameraModel]:
        return list(self.cams)

    def frame(self, camera: int, frame_id: int) -> tuple[RasterImage, SegMask]:
        images, masks = self.sequences[camera]
        if frame_id >= len(images):
            raise OSError(f"camera {camera} has no frame {frame_id}")
        return load_image(images[frame_id]), binarize_mask(load_image(masks[frame_id]))


def build_source(scenario: Scenario) -> FrameSource:
    if scenario.synthetic:
        return SyntheticScene(
            cameras=scenario.synthetic_cameras,
            width=scenario.synthetic_width,
            height=scenario.synthetic_height,
            pedestrians=scenario.synthetic_pedestrians,
            seed=scenario.synthetic_seed,
        )
    return FileSource(scenario.camera_files, scenario.frames)


@dataclass(frozen=True)
class FrameResult:
    frame_id: int
    active_cameras: tuple[int, ...]
    comm: wire.CommReport
    covered_cells: int
    mean_multiplicity: float
    retention: tuple[RetentionStats, ...]


_EMPTY_COMM = wire.CommReport(
    cameras=0,
    payload_bits=0,
    header_bits=0,
    index_bits=0,
    total_bits=0,
    baseline_full_bits=0,
    reduction_factor=None,
)


def dropped_cameras(scenario: Scenario, frame_id: int, camera_count: int) -> list[bool]:
    """Per-camera drop decisions for one frame.

    random: camera i is dropped iff its seeded uniform is below d, so for
    one base seed the active sets at two dropout levels are nested. fixed:
    the floor(d * cameras) lowest ids are dropped every frame.
    """
    d = scenario.dropout
    if scenario.dropout_mode == DROPOUT_FIXED:
        k = math.floor(d * camera_count)
        return [i < k for i in range(camera_count)]
    return [
        Stream(mix_seed(scenario.seed, i, frame_id, 1)).random() < d
        for i in range(camera_count)
    ]


@dataclass(frozen=True)
class _CameraPass:
    plan_bits_ok: bool
    plan: MaskPlan
    layer: BevGrid
    stats: RetentionStats


def _camera_pass(
    scenario: Scenario,
    source: FrameSource,
    cam_model: CameraModel,
    cam_idx: int,
    frame_id: int,
    bev: BevGrid,
) -> _CameraPass:
    img, mask = source.frame(cam_idx, frame_id)
    for _ in range(scenario.downscale_steps):
        img = downsample_by_2(img)
        mask = SegMask(downsample_by_2(RasterImage(mask.pixels)).pixels)
    grid = make_grid(img.width, img.height, scenario.patch_size)
    plan_seed = mix_seed(scenario.seed, cam_idx, frame_id, 0)
    if scenario.mode == MODE_SEMANTIC:
        dist = selection_distribution(activity_map(mask, grid), scenario.kappa)
        plan = sample_unmasked(dist, grid, scenario.ratio, plan_seed)
    else:
        plan = sample_random(grid, scenario.ratio, plan_seed)
    blob = wire.encode(img, plan, camera_id=cam_idx, frame_id=frame_id)
    rplan, sparse = wire.decode(blob)
    fill_baseline(sparse, rplan, scenario.fill)  # receiver-side reconstruction
    layer = splat_coverage(cam_model, rplan, bev)
    return _CameraPass(
        plan_bits_ok=rplan == plan,
        plan=rplan,
        layer=layer,
        stats=retention(mask, plan),
    )


def run(
    scenario: Scenario,
    source: FrameSource | None = None,
    workers: int = 1,
    bev_dir: str | Path | None = None,
) -> "SimReport":
    """Execute every frame; optionally dump aggregated BEV heatmaps.

    Passing a prebuilt source lets several runs share one synthetic scene
    (rendered frames are cached per (camera, frame)). Results are identical
    for any worker count.
    """
    if source is None:
        source = build_source(scenario)
    cams = source.camera_models()
    if scenario.synthetic and len(cams) != scenario.synthetic_cameras:
        raise ConfigError("source camera count does not match scenario")
    bev = scenario.bev_template()
    if bev_dir is not None:
        Path(bev_dir).mkdir(parents=True, exist_ok=True)
    results: list[FrameResult] = []
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for frame_id in range(scenario.frames):
            dropped = dropped_cameras(scenario, frame_id, len(cams))
            active = tuple(i for i, gone in enumerate(dropped) if not gone)
            jobs = [
                (scenario, source, cams[i], i, frame_id, bev) for i in active
            ]
            if pool is not None:
                passes = list(pool.map(lambda a: _camera_pass(*a), jobs))
            else:
                passes = [_camera_pass(*a) for a in jobs]
            if passes:
                if not all(p.plan_bits_ok for p in passes):
                    raise AssertionError("wire round trip altered a plan")
                comm = wire.comm_report(
                    [p.plan for p in passes],
                    header_policy=scenario.header_policy,
                    original_size=(
                        scenario.synthetic_width,
                        scenario.synthetic_height,
                    )
                    if scenario.synthetic
                    else None,
                )
                agg = aggregate([p.layer for p in passes])
            else:
                comm = _EMPTY_COMM
                agg = scenario.bev_template()
            covered = int((agg.values > 0).sum())
            multiplicity = float(agg.values.sum() / covered) if covered else 0.0
            if bev_dir is not None:
                bev_to_pgm(agg, Path(bev_dir) / f"bev_{frame_id:05d}.pgm")
            results.append(
                FrameResult(
                    frame_id=frame_id,
                    active_cameras=active,
                    comm=comm,
                    covered_cells=covered,
                    mean_multiplicity=multiplicity,
                    retention=tuple(p.stats for p in passes),
                )
            )
    finally:
        if pool is not None:
            pool.shutdown()
    return SimReport(scenario=scenario, frames=results)


def throughput(results: Sequence[FrameResult], frame_rate: float) -> float:
    """Mean per-frame transmitted bits times the frame rate, in bits/s."""
    if not results:
        raise DimensionMismatch("throughput needs at least one frame result")
    return sum(r.comm.total_bits for r in results) / len(results) * frame_rate


@dataclass
class SimReport:
    scenario: Scenario
    frames: list[FrameResult]

    def mean_active(self) -> float:
        return sum(len(r.active_cameras) for r in self.frames) / len(self.frames)

    def mean_covered_cells(self) -> float:
        return sum(r.covered_cells for r in self.frames) / len(self.frames)

    def total_bits(self) -> int:
        return sum(r.comm.total_bits for r in self.frames)

    def throughput_bits_per_s(self) -> float:
        return throughput(self.frames, self.scenario.frame_rate)

    def _frame_row(self, r: FrameResult) -> dict:
        ratios = [s.retention_ratio for s in r.retention if s.retention_ratio is not None]
        return {
            "frame": r.frame_id,
            "active": list(r.active_cameras),
            "payload_bits": r.comm.payload_bits,
            "total_bits": r.comm.total_bits,
            "covered_cells": r.covered_cells,
            "mean_multiplicity": r.mean_multiplicity,
            "mean_retention": sum(ratios) / len(ratios) if ratios else None,
        }

    def to_json(self) -> str:
        """Canonical (byte-stable) aggregate report."""
        sc = self.scenario
        doc = {
            "scenario": {
                "frames": sc.frames,
                "frame_rate": sc.frame_rate,
                "ratio": sc.ratio,
                "kappa": sc.kappa,
                "mode": sc.mode,
                "seed": sc.seed,
                "dropout": sc.dropout,
                "dropout_mode": sc.dropout_mode,
                "patch_size": sc.patch_size,
                "downscale_steps": sc.downscale_steps,
                "fill": sc.fill,
                "header_policy": sc.header_policy,
                "cameras": sc.camera_count,
            },
            "frames": [self._frame_row(r) for r in self.frames],
            "summary": {
                "mean_active": self.mean_active(),
                "mean_covered_cells": self.mean_covered_cells(),
                "total_bits": self.total_bits(),
                "throughput_bits_per_s": self.throughput_bits_per_s(),
            },
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))

    def to_frames_csv(self) -> str:
        lines = ["frame,active_cameras,total_bits,covered_cells,mean_multiplicity,mean_retention"]
        for r in self.frames:
            row = self._frame_row(r)
            ret = row["mean_retention"]
            lines.append(
                ",".join(
                    [
                        str(r.frame_id),
                        ";".join(str(i) for i in r.active_cameras),
                        str(r.comm.total_bits),
                        str(r.covered_cells),
                        repr(r.mean_multiplicity),
                        "" if ret is None else repr(ret),
                    ]
                )
            )
        return "\n".join(lines) + "\n"
