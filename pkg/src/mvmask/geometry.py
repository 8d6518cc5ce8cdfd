"""Pinhole ground-plane projection and multi-camera BEV coverage.

World frame: z up, the ground is z = 0. A camera is K[R|t]; dropping the
third column of P gives the 3x3 ground homography P', which maps ground
points (x, y, 1) to pixels and, inverted, pixels back to the ground. BEV
coverage marks each grid cell whose center projects, in front of the camera
and inside the image, into an unmasked patch of a plan. Cell-center sampling
is an approximation of the true cell footprint, chosen to match the grid
granularity and keep the brute-force oracle tractable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    AtInfinity,
    BehindCamera,
    ConfigError,
    DegenerateCamera,
    DimensionError,
    DimensionMismatch,
    FormatError,
)
from .imageio import RasterImage, save_image
from .masking import MaskPlan

_ORTHO_TOL = 1e-9
_DET_TOL = 1e-12
_INFINITY_TOL = 1e-12


@dataclass(eq=False)
class CameraModel:
    """Validated pinhole camera with its derived ground homography."""

    K: np.ndarray
    R: np.ndarray
    t: np.ndarray
    P: np.ndarray = field(init=False)
    Pprime: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        self.K = np.asarray(self.K, dtype=np.float64)
        self.R = np.asarray(self.R, dtype=np.float64)
        self.t = np.asarray(self.t, dtype=np.float64).reshape(-1)
        if self.K.shape != (3, 3) or self.R.shape != (3, 3) or self.t.shape != (3,):
            raise DimensionError("camera needs 3x3 K, 3x3 R and a 3-vector t")
        if np.abs(self.R.T @ self.R - np.eye(3)).max() >= _ORTHO_TOL:
            raise ConfigError("R is not orthonormal")
        if abs(np.linalg.det(self.R) - 1.0) >= _ORTHO_TOL:
            raise ConfigError("R must be a proper rotation (det 1)")
        if np.any(self.K[np.tril_indices(3, -1)] != 0.0):
            raise ConfigError("K must be upper-triangular")
        if self.K[0, 0] <= 0 or self.K[1, 1] <= 0:
            raise ConfigError("K focal entries must be positive")
        self.P = self.K @ np.hstack([self.R, self.t[:, None]])
        self.Pprime = self.P[:, [0, 1, 3]]

    @property
    def is_degenerate(self) -> bool:
        return abs(np.linalg.det(self.Pprime)) <= _DET_TOL

    def _require_usable(self) -> None:
        if self.is_degenerate:
            raise DegenerateCamera("ground homography is not invertible")


def project_ground_to_pixel(cam: CameraModel, x: float, y: float) -> tuple[float, float]:
    """Map a ground point (meters) to pixel coordinates via P'."""
    cam._require_usable()
    su, sv, s = cam.Pprime @ np.array([x, y, 1.0])
    if s <= 0:
        raise BehindCamera(f"ground point ({x}, {y}) has depth {s} <= 0")
    return float(su / s), float(sv / s)


def project_pixel_to_ground(cam: CameraModel, u: float, v: float) -> tuple[float, float]:
    """Map a pixel back to the ground plane via the inverse homography."""
    cam._require_usable()
    wx, wy, w = np.linalg.inv(cam.Pprime) @ np.array([u, v, 1.0])
    if abs(w) < _INFINITY_TOL:
        raise AtInfinity(f"pixel ({u}, {v}) maps to the horizon")
    return float(wx / w), float(wy / w)


@dataclass(eq=False)
class BevGrid:
    """Ground-plane accumulator grid.

    Cell (i, j) is centered at world (origin_x + j*cell_size,
    origin_y + i*cell_size); `values` holds per-cell counts (0/1 for a
    single-camera coverage layer, covering-camera counts after aggregation).
    """

    rows: int
    cols: int
    cell_size: float = 0.10
    origin_x: float = 0.0
    origin_y: float = 0.0
    values: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.rows < 1 or self.cols < 1:
            raise DimensionError("BEV grid needs at least one row and column")
        if self.cell_size <= 0:
            raise ConfigError("cell size must be positive")
        if self.values is None:
            self.values = np.zeros((self.rows, self.cols), dtype=np.int64)
        else:
            self.values = np.asarray(self.values, dtype=np.int64)
            if self.values.shape != (self.rows, self.cols):
                raise DimensionMismatch(
                    f"values shape {self.values.shape} != ({self.rows}, {self.cols})"
                )

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """World (x, y) of every cell center, each shaped (rows, cols)."""
        jj, ii = np.meshgrid(np.arange(self.cols), np.arange(self.rows))
        return (
            self.origin_x + jj * self.cell_size,
            self.origin_y + ii * self.cell_size,
        )

    def same_layout(self, other: "BevGrid") -> bool:
        return (
            self.rows == other.rows
            and self.cols == other.cols
            and self.cell_size == other.cell_size
            and self.origin_x == other.origin_x
            and self.origin_y == other.origin_y
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, BevGrid):
            return NotImplemented
        return self.same_layout(other) and np.array_equal(self.values, other.values)


def splat_coverage(cam: CameraModel, plan: MaskPlan, bev: BevGrid) -> BevGrid:
    """Coverage layer: 1 for each cell whose center lands in an unmasked patch.

    A cell counts only when its center projects with positive depth, inside
    the image, and into a patch of the grid (trailing crop margins belong to
    no patch) that the plan keeps.
    """
    cam._require_usable()
    grid = plan.grid
    cx, cy = bev.cell_centers()
    pts = np.stack([cx.ravel(), cy.ravel(), np.ones(cx.size)])
    su, sv, s = cam.Pprime @ pts
    front = s > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.where(front, su / s, -1.0)
        v = np.where(front, sv / s, -1.0)
    inside = (
        front
        & (u >= 0)
        & (u < grid.image_width)
        & (v >= 0)
        & (v < grid.image_height)
    )
    pcol = np.floor(u / grid.patch_size).astype(np.int64)
    prow = np.floor(v / grid.patch_size).astype(np.int64)
    inside &= (pcol < grid.cols) & (prow < grid.rows)
    member = np.zeros(grid.patch_count, dtype=bool)
    member[plan.unmasked] = True
    covered = np.zeros(cx.size, dtype=np.int64)
    idx = prow[inside] * grid.cols + pcol[inside]
    covered[inside] = member[idx]
    return BevGrid(
        rows=bev.rows,
        cols=bev.cols,
        cell_size=bev.cell_size,
        origin_x=bev.origin_x,
        origin_y=bev.origin_y,
        values=covered.reshape(bev.rows, bev.cols),
    )


def aggregate(layers: Sequence[BevGrid]) -> BevGrid:
    """Per-cell sum over camera layers; permutation-invariant and associative."""
    layers = list(layers)
    if not layers:
        raise DimensionMismatch("cannot aggregate an empty layer list")
    first = layers[0]
    total = np.zeros((first.rows, first.cols), dtype=np.int64)
    for layer in layers:
        if not first.same_layout(layer):
            raise DimensionMismatch("BEV layers differ in shape, cell size or origin")
        total += layer.values
    return BevGrid(
        rows=first.rows,
        cols=first.cols,
        cell_size=first.cell_size,
        origin_x=first.origin_x,
        origin_y=first.origin_y,
        values=total,
    )


def load_calibration(path: str | Path) -> CameraModel:
    """Read one camera from text: 9 K entries (row-major), 9 R, 3 t.

    Whitespace-separated, '#' starts a comment through end of line.
    """
    return parse_calibration(Path(path).read_text())


def parse_calibration(text: str) -> CameraModel:
    tokens = []
    for line in text.splitlines():
        tokens.extend(line.split("#", 1)[0].split())
    if len(tokens) != 21:
        raise FormatError(f"calibration needs 21 numbers, found {len(tokens)}")
    try:
        vals = np.array([float(tok) for tok in tokens], dtype=np.float64)
    except ValueError as exc:
        raise FormatError(f"calibration contains a non-numeric token: {exc}") from None
    return CameraModel(K=vals[:9].reshape(3, 3), R=vals[9:18].reshape(3, 3), t=vals[18:])


def save_calibration(cam: CameraModel, path: str | Path) -> None:
    def rows(mat: np.ndarray) -> str:
        return "\n".join(" ".join(repr(float(x)) for x in row) for row in mat)

    Path(path).write_text(
        "# intrinsics K, row-major\n"
        f"{rows(cam.K)}\n"
        "# rotation R, row-major\n"
        f"{rows(cam.R)}\n"
        "# translation t\n"
        f"{' '.join(repr(float(x)) for x in cam.t)}\n"
    )


def bev_to_pgm(bev: BevGrid, path: str | Path) -> None:
    """Export counts as a grayscale heatmap, scaled so the max count is 255."""
    peak = int(bev.values.max())
    if peak == 0:
        scaled = np.zeros_like(bev.values)
    else:
        scaled = (bev.values * 510 + peak) // (2 * peak)  # round-half-up
    save_image(RasterImage(scaled.astype(np.uint8)), path)


def bev_to_csv(bev: BevGrid, path: str | Path) -> None:
    """Export raw counts, one grid row per line."""
    lines = [",".join(str(v) for v in row) for row in bev.values.tolist()]
    Path(path).write_text("\n".join(lines) + "\n")


def cameras_from_files(paths: Iterable[str | Path]) -> list[CameraModel]:
    return [load_calibration(p) for p in paths]
