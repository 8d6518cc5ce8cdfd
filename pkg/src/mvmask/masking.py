"""Semantic-guided patch masking and the uniform-random baseline.

A segmentation mask is turned into a per-patch activity heatmap (mask-pixel
count over the patch and its in-bounds 3x3 neighborhood), sharpened or
flattened by a power-law exponent, normalized into a selection distribution,
and sampled without replacement to pick the patches that stay unmasked.
Lower exponents push the distribution toward uniform; an exponent near 1
concentrates selection on the most active patches.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, RangeError
from .imageio import RasterImage, SegMask
from .patch_grid import PatchGrid, count_from_milli, footprint, patch_sums, ratio_to_milli
from .rng import MASK64, Stream

MODE_RANDOM = "random"
MODE_SEMANTIC = "semantic"


@dataclass(frozen=True)
class ActivityMap:
    """Per-patch activity levels, length N, row-major patch order."""

    levels: np.ndarray


@dataclass(frozen=True)
class SelectionDistribution:
    """Normalized per-patch selection probabilities and their exponent."""

    probs: np.ndarray
    kappa: float


@dataclass(eq=False)
class MaskPlan:
    """The set of unmasked patch indices plus everything needed to redo the draw.

    `unmasked` is sorted ascending and holds distinct indices; its length is
    always ceil(N * (1 - r)) for the milli-quantized ratio. `kappa` is None
    in random mode. It records how the selection weights were built and is
    not part of plan identity: the wire format never transmits it (the
    receiver has no use for it), so equality compares the fields a receiver
    can reconstruct.
    """

    grid: PatchGrid
    unmasked: np.ndarray
    r_milli: int
    kappa: float | None
    rng_seed: int
    mode: str

    @property
    def r(self) -> float:
        return self.r_milli / 1000.0

    @property
    def unmasked_count(self) -> int:
        return int(self.unmasked.size)

    def __eq__(self, other) -> bool:
        if not isinstance(other, MaskPlan):
            return NotImplemented
        return (
            self.grid == other.grid
            and self.r_milli == other.r_milli
            and self.rng_seed == other.rng_seed
            and self.mode == other.mode
            and np.array_equal(self.unmasked, other.unmasked)
        )


def activity_map(mask: SegMask, grid: PatchGrid) -> ActivityMap:
    """Count mask pixels over each patch and its in-bounds 3x3 neighborhood.

    Neighborhoods are clipped at the grid border (missing neighbors
    contribute zero); there is no wraparound.
    """
    if (mask.width, mask.height) != (grid.image_width, grid.image_height):
        raise DimensionMismatch(
            f"mask {mask.width}x{mask.height} does not match grid image "
            f"{grid.image_width}x{grid.image_height}"
        )
    counts = patch_sums(grid, mask.pixels)
    padded = np.zeros((grid.rows + 2, grid.cols + 2), dtype=np.int64)
    padded[1:-1, 1:-1] = counts
    acc = np.zeros_like(counts)
    for dy in range(3):
        for dx in range(3):
            acc += padded[dy : dy + grid.rows, dx : dx + grid.cols]
    return ActivityMap(acc.reshape(-1))


def selection_distribution(act: ActivityMap, kappa: float) -> SelectionDistribution:
    """Normalize power-reweighted activity levels into probabilities.

    Weights are A**kappa with 0**kappa = 0 for kappa > 0 and x**0 = 1 for
    all x (so kappa = 0 is exactly the uniform baseline). If every weight is
    zero (no targets anywhere) the distribution falls back to uniform.
    """
    if kappa < 0:
        raise RangeError(f"power exponent must be >= 0, got {kappa}")
    levels = np.asarray(act.levels, dtype=np.float64)
    weights = np.power(levels, kappa)
    total = float(weights.sum())
    if total <= 0.0:
        n = levels.size
        return SelectionDistribution(np.full(n, 1.0 / n), kappa)
    return SelectionDistribution(weights / total, kappa)


def _draw_order(weights: np.ndarray | None, n: int, stream: Stream) -> np.ndarray:
    """Order all n patches as by sequential weighted draws without replacement.

    Implemented as an exponential race: patch i "fires" at time
    -log(1 - u_i) / w_i for an independent uniform u_i, and patches are taken
    in firing order -- distribution-identical to drawing one patch at a time
    with probability proportional to the remaining weights. Zero-weight
    patches fire only after every positive-weight patch, in uniform random
    order among themselves. `weights=None` is the uniform case, ordered by
    the raw 64-bit draws so random-mode plans involve no floating point at
    all (the wire protocol regenerates them on the receiving side).
    """
    z = stream.u64_block(n)
    if weights is None:
        return np.argsort(z, kind="stable").astype(np.int64)
    w = np.asarray(weights, dtype=np.float64)
    positive = w > 0.0
    pos_idx = np.nonzero(positive)[0]
    zero_idx = np.nonzero(~positive)[0]
    u = (z[pos_idx] >> np.uint64(11)).astype(np.float64) * 2.0**-53
    times = -np.log1p(-u) / w[pos_idx]
    order = np.concatenate(
        [
            pos_idx[np.argsort(times, kind="stable")],
            zero_idx[np.argsort(z[zero_idx], kind="stable")],
        ]
    )
    return order.astype(np.int64)


def sample_unmasked(
    dist: SelectionDistribution, grid: PatchGrid, r: float, rng_seed: int
) -> MaskPlan:
    """Draw the unmasked patch set from the selection distribution."""
    probs = np.asarray(dist.probs, dtype=np.float64)
    if probs.size != grid.patch_count:
        raise DimensionMismatch(
            f"distribution length {probs.size} != patch count {grid.patch_count}"
        )
    r_milli = ratio_to_milli(r)
    keep = count_from_milli(grid.patch_count, r_milli)
    order = _draw_order(probs, grid.patch_count, Stream(rng_seed))
    return MaskPlan(
        grid=grid,
        unmasked=np.sort(order[:keep]),
        r_milli=r_milli,
        kappa=dist.kappa,
        rng_seed=rng_seed & MASK64,
        mode=MODE_SEMANTIC,
    )


def sample_random(grid: PatchGrid, r: float, rng_seed: int) -> MaskPlan:
    """Uniform-random baseline plan; pattern is a pure function of the seed."""
    r_milli = ratio_to_milli(r)
    keep = count_from_milli(grid.patch_count, r_milli)
    order = _draw_order(None, grid.patch_count, Stream(rng_seed))
    return MaskPlan(
        grid=grid,
        unmasked=np.sort(order[:keep]),
        r_milli=r_milli,
        kappa=None,
        rng_seed=rng_seed & MASK64,
        mode=MODE_RANDOM,
    )


def apply_mask(img: RasterImage, plan: MaskPlan) -> RasterImage:
    """Zero out everything outside the unmasked patches (debug/visualization).

    Masked patches and trailing crop margins both go to 0; the wire codec
    never transmits that content in the first place.
    """
    grid = plan.grid
    if (img.width, img.height) != (grid.image_width, grid.image_height):
        raise DimensionMismatch(
            f"image {img.width}x{img.height} does not match plan grid "
            f"{grid.image_width}x{grid.image_height}"
        )
    keep = footprint(grid, plan.unmasked)
    out = np.zeros_like(img.pixels)
    out[keep] = img.pixels[keep]
    return RasterImage(out)
