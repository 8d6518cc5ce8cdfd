"""Self-contained synthetic multi-camera scenes.

A ring of validated pinhole cameras looks down at a textured courtyard on
the ground plane z = 0. Pedestrians are upright billboards (fixed 1.7 m tall,
0.6 m wide) moving along closed-form trajectories, so every frame comes with
an exact segmentation mask and every camera with an exact calibration. All
content is a deterministic function of (scene parameters, camera, frame id);
no external data is needed to run the full pipeline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import RangeError
from .geometry import CameraModel
from .imageio import RasterImage, SegMask
from .rng import Stream, mix_seed

_PED_HEIGHT = 1.7
_PED_HALF_WIDTH = 0.3
_PALETTE = np.array(
    [
        (200, 40, 40),
        (40, 160, 220),
        (240, 200, 40),
        (150, 60, 200),
        (60, 200, 90),
        (230, 120, 30),
        (90, 90, 240),
        (220, 70, 160),
    ],
    dtype=np.uint8,
)


def _iround(x: float) -> int:
    return math.floor(x + 0.5)


@dataclass
class SyntheticScene:
    """Deterministic frame source for the simulator and test corpus."""

    cameras: int = 7
    width: int = 640
    height: int = 360
    pedestrians: int = 8
    seed: int = 0
    ring_radius: float = 8.0
    camera_height: float = 4.5
    extent: float = 10.0
    _cams: list[CameraModel] = field(init=False, repr=False)
    _walks: np.ndarray = field(init=False, repr=False)
    _cache: dict = field(init=False, repr=False, default_factory=dict)

    def __post_init__(self) -> None:
        if self.cameras < 1 or self.pedestrians < 1:
            raise RangeError("need at least one camera and one pedestrian")
        if self.width < 16 or self.height < 16 or self.width % 2 or self.height % 2:
            raise RangeError("scene dimensions must be even and at least 16")
        self._cams = [self._build_camera(i) for i in range(self.cameras)]
        # per pedestrian: center (2), amplitude (2), angular rate (2), phase (2)
        stream = Stream(mix_seed(self.seed, 0x5CE11E))
        u = np.array(
            [stream.random() for _ in range(8 * self.pedestrians)]
        ).reshape(self.pedestrians, 8)
        span = 0.45 * self.extent
        self._walks = np.column_stack(
            [
                (u[:, 0] - 0.5) * span,
                (u[:, 1] - 0.5) * span,
                0.2 * span + u[:, 2] * 0.5 * span,
                0.2 * span + u[:, 3] * 0.5 * span,
                0.02 + u[:, 4] * 0.07,
                0.02 + u[:, 5] * 0.07,
                u[:, 6] * 2.0 * math.pi,
                u[:, 7] * 2.0 * math.pi,
            ]
        )

    def _build_camera(self, index: int) -> CameraModel:
        theta = 2.0 * math.pi * index / self.cameras
        center = np.array(
            [
                self.ring_radius * math.cos(theta),
                self.ring_radius * math.sin(theta),
                self.camera_height,
            ]
        )
        forward = -center / np.linalg.norm(center)
        up = np.array([0.0, 0.0, 1.0])
        right = np.cross(forward, up)
        right /= np.linalg.norm(right)
        down = np.cross(forward, right)
        rot = np.vstack([right, down, forward])
        focal = 0.9 * self.width
        intr = np.array(
            [
                [focal, 0.0, (self.width - 1) / 2.0],
                [0.0, focal, (self.height - 1) / 2.0],
                [0.0, 0.0, 1.0],
            ]
        )
        return CameraModel(K=intr, R=rot, t=-rot @ center)

    def camera_models(self) -> list[CameraModel]:
        return list(self._cams)

    def pedestrian_positions(self, frame_id: int) -> np.ndarray:
        """Ground (x, y) of every pedestrian at a frame, shape (P, 2)."""
        w = self._walks
        x = w[:, 0] + w[:, 2] * np.cos(w[:, 4] * frame_id + w[:, 6])
        y = w[:, 1] + w[:, 3] * np.sin(w[:, 5] * frame_id + w[:, 7])
        return np.column_stack([x, y])

    def frame(self, camera: int, frame_id: int) -> tuple[RasterImage, SegMask]:
        """Render one camera view and its exact pedestrian mask (cached)."""
        key = (camera, frame_id)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        cam = self._cams[camera]
        img = self._render_ground(cam)
        mask = np.zeros((self.height, self.width), dtype=np.uint8)
        self._paint_pedestrians(cam, frame_id, img, mask)
        out = (RasterImage(img), SegMask(mask))
        self._cache[key] = out
        return out

    def _render_ground(self, cam: CameraModel) -> np.ndarray:
        h, w = self.height, self.width
        uu, vv = np.meshgrid(np.arange(w) + 0.5, np.arange(h) + 0.5)
        pix = np.stack([uu.ravel(), vv.ravel(), np.ones(uu.size)])
        q = np.linalg.inv(cam.Pprime) @ pix
        qw = q[2]
        ground = qw > 1e-9
        with np.errstate(divide="ignore", invalid="ignore"):
            gx = np.where(ground, q[0] / qw, 0.0)
            gy = np.where(ground, q[1] / qw, 0.0)
        courtyard = ground & (np.abs(gx) <= self.extent) & (np.abs(gy) <= self.extent)
        checker = ((np.floor(gx) + np.floor(gy)) % 2.0).astype(np.float64)
        shade_x = np.clip(6.0 * gx, -30.0, 30.0)
        shade_y = np.clip(6.0 * gy, -30.0, 30.0)
        img = np.empty((h * w, 3), dtype=np.float64)
        img[:, 0] = np.where(courtyard, 80.0 + 60.0 * checker + shade_x, 60.0)
        img[:, 1] = np.where(courtyard, 90.0 + 55.0 * checker + shade_y, 62.0)
        img[:, 2] = np.where(courtyard, 70.0 + 50.0 * checker, 58.0)
        sky = ~ground
        if sky.any():
            glow = 150.0 + 80.0 * (1.0 - vv.ravel()[sky] / h)
            img[sky, 0] = glow * 0.75
            img[sky, 1] = glow * 0.85
            img[sky, 2] = np.minimum(glow * 1.1, 255.0)
        return img.clip(0.0, 255.0).astype(np.uint8).reshape(h, w, 3)

    def _paint_pedestrians(
        self, cam: CameraModel, frame_id: int, img: np.ndarray, mask: np.ndarray
    ) -> None:
        spans = []
        for k, (x, y) in enumerate(self.pedestrian_positions(frame_id)):
            su, sv, s = cam.P @ np.array([x, y, 0.0, 1.0])
            hu, hv, hs = cam.P @ np.array([x, y, _PED_HEIGHT, 1.0])
            if s <= 0.2 or hs <= 0.2:
                continue
            foot_u, foot_v = su / s, sv / s
            head_v = hv / hs
            half_w = _PED_HALF_WIDTH * cam.K[0, 0] / s
            c0 = max(_iround(foot_u - half_w), 0)
            c1 = min(_iround(foot_u + half_w), self.width)
            r0 = max(_iround(min(head_v, foot_v)), 0)
            r1 = min(_iround(max(head_v, foot_v)), self.height)
            if c0 < c1 and r0 < r1:
                spans.append((s, k, r0, r1, c0, c1))
        for s, k, r0, r1, c0, c1 in sorted(spans, reverse=True):  # far to near
            img[r0:r1, c0:c1] = _PALETTE[k % len(_PALETTE)]
            mask[r0:r1, c0:c1] = 1

    def corpus(self, count: int = 5) -> list[tuple[RasterImage, SegMask]]:
        """Fixed small test corpus spanning cameras and time."""
        return [
            self.frame(i % self.cameras, 3 * i + 1) for i in range(count)
        ]
