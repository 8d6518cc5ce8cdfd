"""Tiling of an image into fixed-size square patches.

A grid over a W x H image with patch size p has floor(W/p) columns and
floor(H/p) rows; trailing pixels that do not fill a whole patch belong to no
patch. Patch indices are row-major (index = row * cols + col), which the wire
format relies on for determinism.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DimensionMismatch, RangeError
from .imageio import RasterImage


@dataclass(frozen=True)
class PatchGrid:
    image_width: int
    image_height: int
    patch_size: int
    cols: int
    rows: int
    patch_count: int

    def patch_slice(self, index: int) -> tuple[slice, slice]:
        """(row-slice, col-slice) of patch `index` in image coordinates."""
        if not 0 <= index < self.patch_count:
            raise IndexError(f"patch index {index} out of range [0, {self.patch_count})")
        p = self.patch_size
        row, col = divmod(index, self.cols)
        return slice(row * p, (row + 1) * p), slice(col * p, (col + 1) * p)

    def patch_ref(self, index: int) -> "PatchRef":
        sy, sx = self.patch_slice(index)
        return PatchRef(index=index, pixel_origin=(sx.start, sy.start))


@dataclass(frozen=True)
class PatchRef:
    """A patch's index and the (x, y) of its top-left pixel."""

    index: int
    pixel_origin: tuple[int, int]


def make_grid(width: int, height: int, patch_size: int) -> PatchGrid:
    """Build the patch grid; patch count is floor(W/p) * floor(H/p)."""
    if patch_size < 1:
        raise RangeError(f"patch size must be >= 1, got {patch_size}")
    if width < patch_size or height < patch_size:
        raise DimensionError(
            f"image {width}x{height} smaller than one {patch_size}x{patch_size} patch"
        )
    cols = width // patch_size
    rows = height // patch_size
    return PatchGrid(width, height, patch_size, cols, rows, cols * rows)


def ratio_to_milli(r: float) -> int:
    """Quantize a masking ratio to integer thousandths (round half-up).

    The wire header carries the ratio as milli units, so every plan is built
    from the quantized value; this keeps the receiver's patch-count
    arithmetic exactly reproducible.
    """
    if not 0.0 <= r <= 1.0:
        raise RangeError(f"masking ratio must be in [0, 1], got {r}")
    return int(np.floor(r * 1000.0 + 0.5))


def unmasked_count(grid: PatchGrid, r: float) -> int:
    """Number of patches kept unmasked: ceil(N * (1 - r)).

    Evaluated in exact integer arithmetic on the milli-quantized ratio,
    avoiding float-ceiling artifacts near integral N*(1-r).
    """
    return count_from_milli(grid.patch_count, ratio_to_milli(r))


def count_from_milli(patch_count: int, r_milli: int) -> int:
    if not 0 <= r_milli <= 1000:
        raise RangeError(f"milli ratio must be in [0, 1000], got {r_milli}")
    return (patch_count * (1000 - r_milli) + 999) // 1000


def patch_pixels(grid: PatchGrid, index: int, img: RasterImage) -> np.ndarray:
    """Copy of the p x p pixel block of patch `index` (p, p[, channels])."""
    if (img.width, img.height) != (grid.image_width, grid.image_height):
        raise DimensionMismatch(
            f"image {img.width}x{img.height} does not match grid "
            f"{grid.image_width}x{grid.image_height}"
        )
    sy, sx = grid.patch_slice(index)
    return img.pixels[sy, sx].copy()


def patch_sums(grid: PatchGrid, values: np.ndarray) -> np.ndarray:
    """Per-patch sums of a (H, W) array, shape (rows, cols); margins excluded."""
    if values.shape != (grid.image_height, grid.image_width):
        raise DimensionMismatch(
            f"array shape {values.shape} does not match grid image "
            f"{grid.image_height}x{grid.image_width}"
        )
    p = grid.patch_size
    crop = values[: grid.rows * p, : grid.cols * p]
    return crop.reshape(grid.rows, p, grid.cols, p).sum(axis=(1, 3), dtype=np.int64)


def footprint(grid: PatchGrid, indices: np.ndarray) -> np.ndarray:
    """Boolean (H, W) map of the pixels covered by the given patches.

    Trailing margin pixels are always False.
    """
    member = np.zeros(grid.patch_count, dtype=bool)
    member[np.asarray(indices, dtype=np.int64)] = True
    cells = member.reshape(grid.rows, grid.cols)
    p = grid.patch_size
    full = np.zeros((grid.image_height, grid.image_width), dtype=bool)
    full[: grid.rows * p, : grid.cols * p] = cells.repeat(p, axis=0).repeat(p, axis=1)
    return full
