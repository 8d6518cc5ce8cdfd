"""Communication-efficient multi-camera transmission with semantic masking.

Camera side: downsample, score patches by segmentation activity, keep a
seeded weighted sample of patches, serialize them bit-exactly. Server side:
decode, fill the gaps, project per-camera coverage to a shared ground-plane
grid and aggregate. Everything is deterministic from explicit seeds, and
every transmitted bit is accounted for exactly.
"""

__version__ = "0.1.0"

from .errors import MvmaskError
from .geometry import (
    BevGrid,
    CameraModel,
    aggregate,
    load_calibration,
    parse_calibration,
    project_ground_to_pixel,
    project_pixel_to_ground,
    save_calibration,
    splat_coverage,
)
from .imageio import (
    RasterImage,
    SegMask,
    binarize_mask,
    downsample_by_2,
    image_from_bytes,
    image_to_bytes,
    load_image,
    save_image,
)
from .masking import (
    MODE_RANDOM,
    MODE_SEMANTIC,
    ActivityMap,
    MaskPlan,
    SelectionDistribution,
    activity_map,
    apply_mask,
    sample_random,
    sample_unmasked,
    selection_distribution,
)
from .metrics import RetentionStats, retention, sweep, sweep_csv, write_sweep_csv
from .patch_grid import PatchGrid, make_grid, ratio_to_milli, unmasked_count
from .reconstruct import FILL_METHODS, fill_baseline
from .rng import Stream, mix_seed
from .sim import Scenario, SimReport, load_scenario, parse_scenario, run, throughput
from .synth import SyntheticScene
from .wire import (
    CommReport,
    FrameHeader,
    SparseImage,
    comm_report,
    decode,
    decode_plan,
    encode,
    encode_plan,
    read_frames,
    read_header,
    write_frames,
)

__all__ = [
    "__version__",
    "MvmaskError",
    "BevGrid",
    "CameraModel",
    "aggregate",
    "load_calibration",
    "parse_calibration",
    "project_ground_to_pixel",
    "project_pixel_to_ground",
    "save_calibration",
    "splat_coverage",
    "RasterImage",
    "SegMask",
    "binarize_mask",
    "downsample_by_2",
    "image_from_bytes",
    "image_to_bytes",
    "load_image",
    "save_image",
    "MODE_RANDOM",
    "MODE_SEMANTIC",
    "ActivityMap",
    "MaskPlan",
    "SelectionDistribution",
    "activity_map",
    "apply_mask",
    "sample_random",
    "sample_unmasked",
    "selection_distribution",
    "RetentionStats",
    "retention",
    "sweep",
    "sweep_csv",
    "write_sweep_csv",
    "PatchGrid",
    "make_grid",
    "ratio_to_milli",
    "unmasked_count",
    "FILL_METHODS",
    "fill_baseline",
    "Stream",
    "mix_seed",
    "Scenario",
    "SimReport",
    "load_scenario",
    "parse_scenario",
    "run",
    "throughput",
    "SyntheticScene",
    "CommReport",
    "FrameHeader",
    "SparseImage",
    "comm_report",
    "decode",
    "decode_plan",
    "encode",
    "encode_plan",
    "read_frames",
    "read_header",
    "write_frames",
]
