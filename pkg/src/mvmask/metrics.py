"""Masking-quality proxy metrics and parameter sweeps.

Retention ratio is the fraction of segmentation-mask pixels that survive
masking. It measures exactly what activity-guided patch selection tries to
maximize (informative-pixel survival) without any trained model, and is not
claimed to equal detection or tracking scores.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .errors import DimensionMismatch
from .imageio import SegMask
from .masking import (
    MODE_RANDOM,
    MODE_SEMANTIC,
    MaskPlan,
    activity_map,
    sample_random,
    sample_unmasked,
    selection_distribution,
)
from .patch_grid import make_grid, patch_sums
from .rng import mix_seed
from .wire import BITS_PER_PIXEL

SWEEP_HEADER = ("mode", "r", "kappa", "seed", "frame", "retention_ratio", "payload_bits")


@dataclass(frozen=True)
class RetentionStats:
    """Mask-pixel survival counts within the grid footprint."""

    mask_pixels_total: int
    mask_pixels_kept: int

    @property
    def retention_ratio(self) -> float | None:
        """kept/total, or None for a frame with no mask pixels."""
        if self.mask_pixels_total == 0:
            return None
        return self.mask_pixels_kept / self.mask_pixels_total

    def __post_init__(self) -> None:
        if self.mask_pixels_kept > self.mask_pixels_total:
            raise DimensionMismatch("kept mask pixels exceed total")


def retention(mask: SegMask, plan: MaskPlan) -> RetentionStats:
    """Count mask pixels inside unmasked patches vs all inside the footprint.

    Trailing crop margins are outside every patch and count toward neither
    number.
    """
    grid = plan.grid
    if (mask.width, mask.height) != (grid.image_width, grid.image_height):
        raise DimensionMismatch(
            f"mask {mask.width}x{mask.height} does not match grid image "
            f"{grid.image_width}x{grid.image_height}"
        )
    sums = patch_sums(grid, mask.pixels)
    return RetentionStats(
        mask_pixels_total=int(sums.sum()),
        mask_pixels_kept=int(sums.reshape(-1)[plan.unmasked].sum()),
    )


@dataclass(frozen=True)
class SweepRow:
    mode: str
    r: float
    kappa: float | None
    seed: int
    frame: int
    retention_ratio: float | None
    payload_bits: int


def sweep(
    masks: Sequence[SegMask],
    r_values: Sequence[float],
    kappa: float,
    modes: Sequence[str],
    seeds: Sequence[int],
    patch_size: int,
) -> list[SweepRow]:
    """Retention/payload table over (mode, r, seed, frame) cells.

    Rows appear in that nesting order. Each cell uses the deterministic plan
    seed mix_seed(seed, frame, r_milli, mode_code) so repeated frames and
    ratios draw decorrelated plans while the run stays reproducible from the
    listed seeds. The kappa column is empty for random-mode rows.
    """
    if not masks:
        raise DimensionMismatch("empty frame list")
    if not r_values or not modes or not seeds:
        raise DimensionMismatch("r values, modes and seeds must be nonempty")
    rows = []
    for mode in modes:
        if mode not in (MODE_RANDOM, MODE_SEMANTIC):
            raise DimensionMismatch(f"unknown mode {mode!r}")
        for r in r_values:
            for seed in seeds:
                for frame_idx, mask in enumerate(masks):
                    grid = make_grid(mask.width, mask.height, patch_size)
                    plan_seed = mix_seed(
                        seed,
                        frame_idx,
                        int(round(r * 1000)),
                        0 if mode == MODE_RANDOM else 1,
                    )
                    if mode == MODE_RANDOM:
                        plan = sample_random(grid, r, plan_seed)
                    else:
                        dist = selection_distribution(activity_map(mask, grid), kappa)
                        plan = sample_unmasked(dist, grid, r, plan_seed)
                    stats = retention(mask, plan)
                    rows.append(
                        SweepRow(
                            mode=mode,
                            r=r,
                            kappa=None if mode == MODE_RANDOM else kappa,
                            seed=seed,
                            frame=frame_idx,
                            retention_ratio=stats.retention_ratio,
                            payload_bits=plan.unmasked_count
                            * patch_size**2
                            * BITS_PER_PIXEL,
                        )
                    )
    return rows


def sweep_csv(rows: Sequence[SweepRow]) -> str:
    """Render rows under the fixed header; absent values become empty cells."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(SWEEP_HEADER)
    for row in rows:
        writer.writerow(
            [
                row.mode,
                row.r,
                "" if row.kappa is None else row.kappa,
                row.seed,
                row.frame,
                "" if row.retention_ratio is None else row.retention_ratio,
                row.payload_bits,
            ]
        )
    return out.getvalue()


def write_sweep_csv(rows: Sequence[SweepRow], path: str | Path) -> None:
    Path(path).write_text(sweep_csv(rows))
