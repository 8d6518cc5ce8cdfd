"""Bit-exact wire codec for masked frames, plus communication accounting.

Frame layout (big-endian, fixed 37-byte header):

    offset  size  field
    0       4     magic "MVWF"
    4       1     version (1)
    5       1     flags: bit0 index block is a bitmap, bit1 plan-only
    6       2     camera id
    8       4     frame id
    12      2     image width
    14      2     image height
    16      2     patch size
    18      1     mode (0 random, 1 semantic)
    19      2     masking ratio in milli units
    21      8     masking rng seed
    29      4     index block length, bytes
    33      4     payload length, bytes
    37      ...   index block, then payload

Random-mode frames carry no index block: the receiver regenerates the
unmasked set from (seed, N, S), which the integer-only uniform sampler makes
bit-exact on any machine. Semantic-mode frames must carry the set explicitly
(the receiver has no segmentation mask to recompute it from) and use
whichever of two encodings is smaller that frame: a bitmap of N bits, or S
packed big-endian indices of max(1, ceil(log2 N)) bits each. The payload is
the raw RGB bytes of the unmasked patches in ascending index order, p*p*3
bytes per patch. All declared lengths are verified on decode and pad bits
must be zero, so a flipped byte is either rejected or visibly changes the
decoded plan.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from fractions import Fraction
from typing import BinaryIO, Iterable, Iterator

import numpy as np

from .errors import (
    ChannelError,
    DimensionMismatch,
    FormatError,
    RangeError,
    TruncationError,
    VersionError,
)
from .imageio import RasterImage
from .masking import MODE_RANDOM, MODE_SEMANTIC, MaskPlan, _draw_order
from .patch_grid import PatchGrid, count_from_milli, footprint, make_grid
from .rng import Stream

MAGIC = b"MVWF"
VERSION = 1
_HEADER = struct.Struct(">4sBBHIHHHBHQII")
HEADER_BYTES = _HEADER.size
HEADER_BITS = HEADER_BYTES * 8

_FLAG_BITMAP = 0x01
_FLAG_PLAN_ONLY = 0x02
_FLAG_KNOWN = _FLAG_BITMAP | _FLAG_PLAN_ONLY

_MODE_CODES = {MODE_RANDOM: 0, MODE_SEMANTIC: 1}
_MODE_NAMES = {v: k for k, v in _MODE_CODES.items()}

BITS_PER_PIXEL = 24


@dataclass(eq=False)
class SparseImage:
    """Receiver-side image: unmasked patches placed, everything else unknown.

    Cropped to the grid footprint (rows*p x cols*p); `known` flags the pixels
    that actually arrived.
    """

    pixels: np.ndarray
    known: np.ndarray


@dataclass(frozen=True)
class FrameHeader:
    """Parsed fixed-size header of one wire frame."""

    camera_id: int
    frame_id: int
    image_width: int
    image_height: int
    patch_size: int
    mode: str
    r_milli: int
    rng_seed: int
    plan_only: bool
    index_len: int
    payload_len: int


def read_header(data: bytes) -> FrameHeader:
    """Parse just the header for inspection, validating magic and version."""
    if len(data) < HEADER_BYTES:
        raise TruncationError(
            f"frame header needs {HEADER_BYTES} bytes, have {len(data)}"
        )
    magic, version, flags, cam, frame, w, h, p, mode_code, r_milli, seed, bl, pl = (
        _HEADER.unpack_from(data)
    )
    if magic != MAGIC:
        raise VersionError(f"bad magic {magic!r}")
    if version != VERSION:
        raise VersionError(f"unsupported frame version {version}")
    if flags & ~_FLAG_KNOWN:
        raise FormatError(f"unknown flag bits 0x{flags & ~_FLAG_KNOWN:02x}")
    if mode_code not in _MODE_NAMES:
        raise FormatError(f"unknown mode byte {mode_code}")
    return FrameHeader(
        camera_id=cam,
        frame_id=frame,
        image_width=w,
        image_height=h,
        patch_size=p,
        mode=_MODE_NAMES[mode_code],
        r_milli=r_milli,
        rng_seed=seed,
        plan_only=bool(flags & _FLAG_PLAN_ONLY),
        index_len=bl,
        payload_len=pl,
    )


@dataclass(frozen=True)
class CommReport:
    """Exact per-policy bit accounting over a set of per-camera plans."""

    cameras: int
    payload_bits: int
    header_bits: int
    index_bits: int
    total_bits: int
    baseline_full_bits: int
    reduction_factor: Fraction | None

    @property
    def megabits(self) -> float:
        return self.total_bits / 1e6

    @property
    def baseline_megabits(self) -> float:
        return self.baseline_full_bits / 1e6


def bits_per_index(patch_count: int) -> int:
    """Width of one packed patch index: max(1, ceil(log2 N))."""
    return max(1, (patch_count - 1).bit_length())


def index_block_bits(plan: MaskPlan) -> int:
    """Exact index overhead of a plan: 0 in random mode, else min of the
    bitmap and packed-index encodings (before byte padding)."""
    if plan.mode == MODE_RANDOM:
        return 0
    n = plan.grid.patch_count
    return min(n, plan.unmasked_count * bits_per_index(n))


def _check_u(value: int, bits: int, what: str) -> int:
    if not 0 <= value < (1 << bits):
        raise RangeError(f"{what} {value} does not fit in {bits} bits")
    return value


def _patch_blocks(img: RasterImage, grid: PatchGrid) -> np.ndarray:
    """All patch pixel blocks, shape (N, p*p*3), ascending patch index."""
    p = grid.patch_size
    crop = img.pixels[: grid.rows * p, : grid.cols * p]
    return crop.reshape(grid.rows, p, grid.cols, p, 3).swapaxes(1, 2).reshape(
        grid.patch_count, p * p * 3
    )


def _encode_index_block(plan: MaskPlan) -> tuple[bytes, bool]:
    """Pack the unmasked set, returning (bytes, used_bitmap)."""
    n = plan.grid.patch_count
    bpi = bits_per_index(n)
    s = plan.unmasked_count
    if n <= s * bpi:
        member = np.zeros(n, dtype=np.uint8)
        member[plan.unmasked] = 1
        return np.packbits(member).tobytes(), True
    widths = np.uint64(1) << np.arange(bpi - 1, -1, -1, dtype=np.uint64)
    bits = (plan.unmasked.astype(np.uint64)[:, None] & widths) > 0
    return np.packbits(bits.reshape(-1)).tobytes(), False


def _decode_index_block(
    block: bytes, n: int, s: int, is_bitmap: bool
) -> np.ndarray:
    bits = np.unpackbits(np.frombuffer(block, dtype=np.uint8))
    if is_bitmap:
        used = n
    else:
        used = s * bits_per_index(n)
    if bits.size < used or (bits.size - used) >= 8:
        raise FormatError("index block length does not match header fields")
    if bits[used:].any():
        raise FormatError("nonzero padding in index block")
    if is_bitmap:
        indices = np.nonzero(bits[:n])[0].astype(np.int64)
        if indices.size != s:
            raise FormatError(f"bitmap has {indices.size} set bits, expected {s}")
    else:
        bpi = bits_per_index(n)
        widths = (np.int64(1) << np.arange(bpi - 1, -1, -1)).astype(np.int64)
        indices = bits[:used].reshape(s, bpi).astype(np.int64) @ widths
        if indices.size and (
            indices[-1] >= n or np.any(np.diff(indices) <= 0) or indices[0] < 0
        ):
            raise FormatError("packed indices not strictly ascending below N")
    return indices


def encode(
    img: RasterImage, plan: MaskPlan, camera_id: int = 0, frame_id: int = 0
) -> bytes:
    """Serialize one masked frame: header, optional index block, RGB payload."""
    if img.channels != 3:
        raise ChannelError("wire payload requires a 3-channel image")
    grid = plan.grid
    if (img.width, img.height) != (grid.image_width, grid.image_height):
        raise DimensionMismatch(
            f"image {img.width}x{img.height} does not match plan grid "
            f"{grid.image_width}x{grid.image_height}"
        )
    payload = _patch_blocks(img, grid)[plan.unmasked].tobytes()
    return _assemble(plan, camera_id, frame_id, payload, plan_only=False)


def encode_plan(plan: MaskPlan, camera_id: int = 0, frame_id: int = 0) -> bytes:
    """Serialize a plan alone (no pixel payload), same frame grammar."""
    return _assemble(plan, camera_id, frame_id, b"", plan_only=True)


def _assemble(
    plan: MaskPlan, camera_id: int, frame_id: int, payload: bytes, plan_only: bool
) -> bytes:
    grid = plan.grid
    flags = _FLAG_PLAN_ONLY if plan_only else 0
    if plan.mode == MODE_SEMANTIC:
        block, used_bitmap = _encode_index_block(plan)
        if used_bitmap:
            flags |= _FLAG_BITMAP
    elif plan.mode == MODE_RANDOM:
        block = b""
    else:
        raise RangeError(f"unknown plan mode {plan.mode!r}")
    header = _HEADER.pack(
        MAGIC,
        VERSION,
        flags,
        _check_u(camera_id, 16, "camera id"),
        _check_u(frame_id, 32, "frame id"),
        _check_u(grid.image_width, 16, "image width"),
        _check_u(grid.image_height, 16, "image height"),
        _check_u(grid.patch_size, 16, "patch size"),
        _MODE_CODES[plan.mode],
        _check_u(plan.r_milli, 16, "milli ratio"),
        _check_u(plan.rng_seed, 64, "rng seed"),
        len(block),
        len(payload),
    )
    return header + block + payload


def decode(data: bytes) -> tuple[MaskPlan, SparseImage]:
    """Parse one frame back into its plan and sparse image.

    Every unmasked pixel is restored exactly; pixels of masked patches are
    zero and flagged unknown. Plan-only frames decode to an all-unknown
    sparse image.
    """
    if len(data) < HEADER_BYTES:
        raise TruncationError(
            f"frame header needs {HEADER_BYTES} bytes, have {len(data)}"
        )
    (
        magic,
        version,
        flags,
        camera_id,
        frame_id,
        width,
        height,
        patch,
        mode_code,
        r_milli,
        seed,
        block_len,
        payload_len,
    ) = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise VersionError(f"bad magic {magic!r}")
    if version != VERSION:
        raise VersionError(f"unsupported frame version {version}")
    if flags & ~_FLAG_KNOWN:
        raise FormatError(f"unknown flag bits 0x{flags & ~_FLAG_KNOWN:02x}")
    if mode_code not in _MODE_NAMES:
        raise FormatError(f"unknown mode byte {mode_code}")
    if r_milli > 1000:
        raise FormatError(f"milli ratio {r_milli} above 1000")
    mode = _MODE_NAMES[mode_code]
    grid = make_grid(width, height, patch)
    s = count_from_milli(grid.patch_count, r_milli)
    plan_only = bool(flags & _FLAG_PLAN_ONLY)

    expected_payload = 0 if plan_only else s * patch * patch * 3
    if payload_len != expected_payload:
        raise FormatError(
            f"declared payload {payload_len} bytes, header fields imply {expected_payload}"
        )
    end = HEADER_BYTES + block_len + payload_len
    if len(data) < end:
        raise TruncationError(f"frame truncated: missing {end - len(data)} bytes")
    if len(data) > end:
        raise FormatError(f"{len(data) - end} trailing bytes after frame")

    block = data[HEADER_BYTES : HEADER_BYTES + block_len]
    if mode == MODE_RANDOM:
        if block_len:
            raise FormatError("random-mode frame must not carry an index block")
        if flags & _FLAG_BITMAP:
            raise FormatError("bitmap flag set on a random-mode frame")
        order = _draw_order(None, grid.patch_count, Stream(seed))
        unmasked = np.sort(order[:s])
    else:
        unmasked = _decode_index_block(block, grid.patch_count, s, bool(flags & _FLAG_BITMAP))

    plan = MaskPlan(
        grid=grid,
        unmasked=unmasked,
        r_milli=r_milli,
        kappa=None,  # not transmitted; the receiver never needs it
        rng_seed=seed,
        mode=mode,
    )

    p = patch
    pixels = np.zeros((grid.rows, p, grid.cols, p, 3), dtype=np.uint8)
    if not plan_only and s:
        payload = np.frombuffer(data[HEADER_BYTES + block_len : end], dtype=np.uint8)
        blocks = payload.reshape(s, p, p, 3)
        pixels[unmasked // grid.cols, :, unmasked % grid.cols] = blocks
    pixels = pixels.reshape(grid.rows * p, grid.cols * p, 3)
    if plan_only:
        known = np.zeros((grid.rows * p, grid.cols * p), dtype=bool)
    else:
        known = footprint(grid, unmasked)[: grid.rows * p, : grid.cols * p]
    return plan, SparseImage(pixels=pixels, known=known)


def decode_plan(data: bytes) -> MaskPlan:
    return decode(data)[0]


def comm_report(
    plans: Iterable[MaskPlan],
    header_policy: str = "payload-only",
    original_size: tuple[int, int] | None = None,
) -> CommReport:
    """Exact bit totals over one frame's per-camera plans.

    `header_policy="payload-only"` counts pixel payload alone, the
    convention behind the headline per-frame volumes; `"include"` adds the
    fixed header and exact (unpadded) index bits. The full-image baseline
    uses the original capture resolution, by default twice the plan's grid
    dimensions (one 2x downsampling step).
    """
    if header_policy not in ("include", "payload-only"):
        raise RangeError(f"unknown header policy {header_policy!r}")
    plans = list(plans)
    if not plans:
        raise DimensionMismatch("empty plan list")
    payload = header = index = baseline = 0
    for plan in plans:
        payload += plan.unmasked_count * plan.grid.patch_size**2 * BITS_PER_PIXEL
        header += HEADER_BITS
        index += index_block_bits(plan)
        if original_size is None:
            w0, h0 = 2 * plan.grid.image_width, 2 * plan.grid.image_height
        else:
            w0, h0 = original_size
        baseline += w0 * h0 * BITS_PER_PIXEL
    total = payload if header_policy == "payload-only" else payload + header + index
    return CommReport(
        cameras=len(plans),
        payload_bits=payload,
        header_bits=header,
        index_bits=index,
        total_bits=total,
        baseline_full_bits=baseline,
        reduction_factor=Fraction(baseline, total) if total else None,
    )


def write_frames(fh: BinaryIO, frames: Iterable[bytes]) -> int:
    """Append length-prefixed frame records to a binary stream; returns count."""
    n = 0
    for frame in frames:
        fh.write(struct.pack(">I", len(frame)))
        fh.write(frame)
        n += 1
    return n


def read_frames(fh: BinaryIO) -> Iterator[bytes]:
    """Yield frame records from a length-prefixed container stream."""
    while True:
        prefix = fh.read(4)
        if not prefix:
            return
        if len(prefix) < 4:
            raise TruncationError("container record length cut short")
        (length,) = struct.unpack(">I", prefix)
        record = fh.read(length)
        if len(record) < length:
            raise TruncationError(
                f"container record truncated: missing {length - len(record)} bytes"
            )
        yield record
