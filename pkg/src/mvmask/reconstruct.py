"""Closed-form fills for the masked patches of a decoded sparse image.

A deterministic stand-in for learned inpainting: downstream projection only
needs a full raster, and the package's claims (communication volume, masking
behavior, geometry) do not depend on reconstruction fidelity. The module
boundary accepts any future learned reconstructor.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatch, EmptyFrameError, RangeError
from .imageio import RasterImage
from .masking import MaskPlan
from .wire import SparseImage

FILL_ZERO = "zero"
FILL_GLOBAL_MEAN = "global-mean"
FILL_NEAREST = "nearest-patch"
FILL_METHODS = (FILL_ZERO, FILL_GLOBAL_MEAN, FILL_NEAREST)


def fill_baseline(sparse: SparseImage, plan: MaskPlan, method: str) -> RasterImage:
    """Fill masked patches, leaving every received pixel bit-exact.

    zero        masked pixels set to 0
    global-mean per-channel mean of all received pixels, rounded half up
    nearest-patch  copy of the received patch whose center is nearest in
                   Euclidean pixel distance, ties broken by lower index

    Output is the grid footprint (rows*p x cols*p); trailing crop margins
    were never transmitted. global-mean and nearest-patch need at least one
    received patch.
    """
    if method not in FILL_METHODS:
        raise RangeError(f"unknown fill method {method!r}")
    grid = plan.grid
    p = grid.patch_size
    shape = (grid.rows * p, grid.cols * p, 3)
    if sparse.pixels.shape != shape:
        raise DimensionMismatch(
            f"sparse image shape {sparse.pixels.shape} does not match grid footprint {shape}"
        )
    unmasked = plan.unmasked
    masked = np.setdiff1d(np.arange(grid.patch_count, dtype=np.int64), unmasked)
    out = sparse.pixels.copy()
    blocks = out.reshape(grid.rows, p, grid.cols, p, 3)
    mrow, mcol = masked // grid.cols, masked % grid.cols

    if method == FILL_ZERO:
        blocks[mrow, :, mcol] = 0
        return RasterImage(out)

    if unmasked.size == 0:
        raise EmptyFrameError(f"{method} fill needs at least one received patch")

    if method == FILL_GLOBAL_MEAN:
        received = sparse.pixels[sparse.known]
        sums = received.sum(axis=0, dtype=np.int64)
        count = received.shape[0]
        # integer round-half-up of sum/count, exact for any magnitude
        mean = (2 * sums + count) // (2 * count)
        blocks[mrow, :, mcol] = mean.astype(np.uint8)
        return RasterImage(out)

    # nearest-patch: squared center distance in whole patch units; p scales
    # all distances equally so it cannot change the argmin
    urow, ucol = unmasked // grid.cols, unmasked % grid.cols
    d2 = (mrow[:, None] - urow[None, :]) ** 2 + (mcol[:, None] - ucol[None, :]) ** 2
    nearest = unmasked[np.argmin(d2, axis=1)]  # first minimum = lowest index
    blocks[mrow, :, mcol] = blocks[nearest // grid.cols, :, nearest % grid.cols]
    return RasterImage(out)
