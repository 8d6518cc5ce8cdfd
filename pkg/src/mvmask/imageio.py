"""Deterministic image I/O: binary PPM/PGM, 2x box downsampling, mask ingestion.

Storage is fixed to binary Netpbm (P6 color / P5 grayscale, maxval 255):
dependency-free, bit-exact on round trip, easy to produce from scripts.
Segmentation masks are produced by an external model and arrive as grayscale
files; :func:`binarize_mask` adapts them.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .errors import ChannelError, FormatError, OddDimensionError

_WHITESPACE = b" \t\n\r\x0b\x0c"


@dataclass(eq=False)
class RasterImage:
    """8-bit image, shape (H, W) for grayscale or (H, W, 3) for color."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.uint8)
        if px.ndim == 2:
            pass
        elif px.ndim == 3 and px.shape[2] == 3:
            pass
        else:
            raise ChannelError(f"expected (H, W) or (H, W, 3) pixels, got shape {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise FormatError(f"image dimensions must be >= 1, got {px.shape[1]}x{px.shape[0]}")
        self.pixels = px

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def channels(self) -> int:
        return 1 if self.pixels.ndim == 2 else 3

    def __eq__(self, other) -> bool:
        if not isinstance(other, RasterImage):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and np.array_equal(
            self.pixels, other.pixels
        )


@dataclass(eq=False)
class SegMask:
    """Binary target mask, shape (H, W), values strictly in {0, 1}."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.uint8)
        if px.ndim != 2:
            raise ChannelError(f"mask must be 2-D, got shape {px.shape}")
        if px.size and px.max() > 1:
            raise FormatError("mask values must be 0 or 1")
        self.pixels = px

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def to_raster(self, high: int = 255) -> RasterImage:
        """Render the mask as a grayscale image with 1 -> high."""
        return RasterImage(self.pixels * np.uint8(high))

    def __eq__(self, other) -> bool:
        if not isinstance(other, SegMask):
            return NotImplemented
        return np.array_equal(self.pixels, other.pixels)


def _next_token(buf: bytes, pos: int) -> tuple[bytes, int]:
    """Read the next header token, skipping whitespace and '#' comments."""
    n = len(buf)
    while pos < n:
        c = buf[pos]
        if c in _WHITESPACE:
            pos += 1
        elif c == ord("#"):
            while pos < n and buf[pos] != ord("\n"):
                pos += 1
        else:
            break
    start = pos
    while pos < n and buf[pos] not in _WHITESPACE and buf[pos] != ord("#"):
        pos += 1
    if start == pos:
        raise FormatError("unexpected end of header")
    return buf[start:pos], pos


def _header_int(buf: bytes, pos: int, what: str) -> tuple[int, int]:
    tok, pos = _next_token(buf, pos)
    if not tok.isdigit():
        raise FormatError(f"bad {what} field {tok!r}")
    return int(tok), pos


def load_image(path: str | os.PathLike) -> RasterImage:
    """Load a binary PPM (P6) or PGM (P5) file with maxval 255.

    Raises OSError for missing/unreadable files and FormatError for bad
    magic, unsupported maxval (16-bit files are rejected) or a payload
    shorter than width*height*channels.
    """
    with open(path, "rb") as fh:
        return image_from_bytes(fh.read())


def image_from_bytes(buf: bytes) -> RasterImage:
    """Parse a P6/P5 byte buffer; same validation as load_image."""
    if buf[:2] == b"P6":
        channels = 3
    elif buf[:2] == b"P5":
        channels = 1
    else:
        raise FormatError(f"bad magic {buf[:2]!r}, expected P5 or P6")
    width, pos = _header_int(buf, 2, "width")
    height, pos = _header_int(buf, pos, "height")
    maxval, pos = _header_int(buf, pos, "maxval")
    if width < 1 or height < 1:
        raise FormatError(f"bad dimensions {width}x{height}")
    if maxval != 255:
        raise FormatError(f"unsupported maxval {maxval}, only 255 is accepted")
    if pos >= len(buf) or buf[pos] not in _WHITESPACE:
        raise FormatError("missing whitespace after maxval")
    pos += 1
    need = width * height * channels
    raster = buf[pos : pos + need]
    if len(raster) < need:
        raise FormatError(f"truncated payload: need {need} bytes, have {len(raster)}")
    px = np.frombuffer(raster, dtype=np.uint8)
    shape = (height, width) if channels == 1 else (height, width, 3)
    return RasterImage(px.reshape(shape).copy())


def save_image(img: RasterImage, path: str | os.PathLike) -> None:
    """Write img as binary P6 (color) or P5 (grayscale), maxval 255.

    Header is canonical ("P6\\n{w} {h}\\n255\\n", no comments) so that
    save followed by load round-trips bit-exactly.
    """
    with open(path, "wb") as fh:
        fh.write(image_to_bytes(img))


def image_to_bytes(img: RasterImage) -> bytes:
    magic = b"P6" if img.channels == 3 else b"P5"
    return magic + b"\n%d %d\n255\n" % (img.width, img.height) + img.pixels.tobytes()


def downsample_by_2(img: RasterImage) -> RasterImage:
    """Halve both dimensions with a 2x2 box mean, rounding half-up.

    Integer arithmetic only ((sum + 2) // 4), so the result is identical on
    every platform. Dimensions must be even.
    """
    h, w = img.height, img.width
    if h % 2 or w % 2:
        raise OddDimensionError(f"dimensions {w}x{h} not divisible by 2")
    px = img.pixels
    if img.channels == 1:
        s = px.reshape(h // 2, 2, w // 2, 2).sum(axis=(1, 3), dtype=np.uint32)
    else:
        s = px.reshape(h // 2, 2, w // 2, 2, 3).sum(axis=(1, 3), dtype=np.uint32)
    return RasterImage(((s + 2) // 4).astype(np.uint8))


def binarize_mask(img: RasterImage, threshold: int = 128) -> SegMask:
    """Threshold a grayscale image into a binary mask (sample >= threshold -> 1)."""
    if img.channels != 1:
        raise ChannelError(f"mask source must be grayscale, got {img.channels} channels")
    return SegMask((img.pixels >= threshold).astype(np.uint8))
