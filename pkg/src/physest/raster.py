"""Rasterisation of trajectories into T x C x Y x X occupancy tensors.

Channel 0 holds the highlighted object, channel 1 every other dynamic body
(the test object included) and channel 2 the static geometry.  A pixel is
set when its centre lies inside a shape; there is no anti-aliasing.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from .physics2d import Box, Circle, Segment, Shape, Trajectory

CHANNELS = 3
HIGHLIGHT, DYNAMIC, STATIC = 0, 1, 2

FSEQ_MAGIC = b"FSEQ"
FSEQ_VERSION = 1


@dataclass(frozen=True)
class RasterConfig:
    width: int = 64
    height: int = 64
    world_window: Tuple[float, float, float, float] = (0.0, 0.0, 10.0, 10.0)
    frames: int = 30
    stride: int = 10
    channels: int = CHANNELS

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("raster size must be positive")
        x0, y0, x1, y1 = self.world_window
        if not (x1 > x0 and y1 > y0):
            raise ValueError("world window must have positive area")
        if self.frames < 1:
            raise ValueError("frames must be >= 1")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")
        if self.channels != CHANNELS:
            raise ValueError("exactly three channels are supported")

    @property
    def steps(self) -> int:
        """Simulation steps needed to cover every rendered frame."""
        return (self.frames - 1) * self.stride

    @property
    def shape(self) -> Tuple[int, int, int, int]:
        return (self.frames, self.channels, self.height, self.width)

    def pixel_centers(self):
        x0, y0, x1, y1 = self.world_window
        sx = (x1 - x0) / self.width
        sy = (y1 - y0) / self.height
        xs = x0 + (np.arange(self.width) + 0.5) * sx
        # row 0 is the top of the window
        ys = y1 - (np.arange(self.height) + 0.5) * sy
        return xs, ys

    def to_dict(self) -> dict:
        return {"width": self.width, "height": self.height, "world_window": list(self.world_window),
                "frames": self.frames, "stride": self.stride}


@dataclass(frozen=True)
class FrameSequence:
    data: np.ndarray
    config: RasterConfig

    def __post_init__(self):
        if self.data.shape != self.config.shape:
            raise ValueError(f"data shape {self.data.shape} does not match config {self.config.shape}")

    @property
    def shape(self):
        return self.data.shape


class PlacedShape(NamedTuple):
    body_id: int
    shape: Shape
    x: float
    y: float
    angle: float


def _mask(shape: Shape, x: float, y: float, angle: float, xs: np.ndarray, ys: np.ndarray,
          out: np.ndarray) -> None:
    """OR the occupancy of one shape into ``out`` (Y x X)."""
    if isinstance(shape, Circle):
        reach = shape.radius
    elif isinstance(shape, Box):
        reach = math.hypot(shape.half_w, shape.half_h)
    else:
        reach = None
    if reach is not None:
        cols = np.nonzero((xs >= x - reach) & (xs <= x + reach))[0]
        rows = np.nonzero((ys >= y - reach) & (ys <= y + reach))[0]
        if cols.size == 0 or rows.size == 0:
            return
        c0, c1 = cols[0], cols[-1] + 1
        r0, r1 = rows[0], rows[-1] + 1
        dx = xs[c0:c1][None, :] - x
        dy = ys[r0:r1][:, None] - y
        if isinstance(shape, Circle):
            inside = dx * dx + dy * dy <= shape.radius * shape.radius
        else:
            c, s = math.cos(angle), math.sin(angle)
            lx = c * dx + s * dy
            ly = -s * dx + c * dy
            inside = (np.abs(lx) <= shape.half_w) & (np.abs(ly) <= shape.half_h)
        out[r0:r1, c0:c1] |= inside
        return
    # segment: distance from pixel centre to the rotated, translated segment
    c, s = math.cos(angle), math.sin(angle)
    ax = x + c * shape.a[0] - s * shape.a[1]
    ay = y + s * shape.a[0] + c * shape.a[1]
    bx = x + c * shape.b[0] - s * shape.b[1]
    by = y + s * shape.b[0] + c * shape.b[1]
    half = 0.5 * shape.thickness
    px = xs[None, :]
    py = ys[:, None]
    ex, ey = bx - ax, by - ay
    t = np.clip(((px - ax) * ex + (py - ay) * ey) / (ex * ex + ey * ey), 0.0, 1.0)
    qx = px - (ax + t * ex)
    qy = py - (ay + t * ey)
    out |= qx * qx + qy * qy <= half * half


def render_frame(bodies: Sequence[PlacedShape], static_geometry: Sequence[PlacedShape],
                 config: RasterConfig, highlight: Optional[int] = None) -> np.ndarray:
    """Render one C x Y x X frame."""
    if highlight is not None and highlight not in {b.body_id for b in bodies}:
        raise ValueError(f"highlighted body {highlight} is not a dynamic body in the scene")
    xs, ys = config.pixel_centers()
    occ = np.zeros((config.channels, config.height, config.width), dtype=bool)
    for b in bodies:
        ch = HIGHLIGHT if b.body_id == highlight else DYNAMIC
        _mask(b.shape, b.x, b.y, b.angle, xs, ys, occ[ch])
    for g in static_geometry:
        _mask(g.shape, g.x, g.y, g.angle, xs, ys, occ[STATIC])
    return occ.astype(np.float32)


def _static_from_trajectory(traj: Trajectory):
    out = []
    for i, (bid, shape, is_static) in enumerate(zip(traj.body_ids, traj.shapes, traj.static_mask)):
        if is_static:
            x, y, a = traj.states[0, i, :3]
            out.append(PlacedShape(bid, shape, float(x), float(y), float(a)))
    return out


def render_sequence(traj: Trajectory, static_geometry: Optional[Sequence] = None,
                    config: RasterConfig = RasterConfig(), highlight: Optional[int] = None
                    ) -> FrameSequence:
    """Frame ``t`` is rendered from trajectory state ``t * stride``."""
    needed = config.steps
    if traj.step_count < needed:
        raise ValueError(f"trajectory has {traj.step_count} steps, {needed} needed")
    if static_geometry is None:
        static_geometry = _static_from_trajectory(traj)
    else:
        static_geometry = [PlacedShape(*g) for g in static_geometry]
    dyn = [i for i, st in enumerate(traj.static_mask) if not st]
    if highlight is not None and highlight not in {traj.body_ids[i] for i in dyn}:
        raise ValueError(f"highlighted body {highlight} is not a dynamic body in the scene")
    xs, ys = config.pixel_centers()
    static_layer = np.zeros((config.height, config.width), dtype=bool)
    for g in static_geometry:
        _mask(g.shape, g.x, g.y, g.angle, xs, ys, static_layer)
    data = np.zeros(config.shape, dtype=bool)
    data[:, STATIC] = static_layer
    for t in range(config.frames):
        row = traj.states[t * config.stride]
        for i in dyn:
            ch = HIGHLIGHT if traj.body_ids[i] == highlight else DYNAMIC
            x, y, a = row[i, 0], row[i, 1], row[i, 2]
            _mask(traj.shapes[i], float(x), float(y), float(a), xs, ys, data[t, ch])
    return FrameSequence(data.astype(np.float32), config)


def blur(seq: FrameSequence, sigma: float) -> FrameSequence:
    """Per-frame, per-channel Gaussian blur; zero padding, radius ceil(3 sigma)."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if sigma == 0:
        return seq
    radius = int(math.ceil(3.0 * sigma))
    data = seq.data.astype(np.float64)
    for axis in (2, 3):
        data = ndimage.gaussian_filter1d(data, sigma, axis=axis, mode="constant", cval=0.0,
                                         radius=radius)
    hi = float(seq.data.max()) if seq.data.size else 0.0
    data = np.clip(data, 0.0, hi)
    return FrameSequence(data.astype(np.float32), seq.config)


# ---------------------------------------------------------------------------
# file formats

def write_fseq(path, seq: FrameSequence) -> None:
    """``FSEQ`` magic, u32 version, u32 T C Y X, float32 payload; little endian."""
    t, c, y, x = seq.data.shape
    with open(path, "wb") as fh:
        fh.write(FSEQ_MAGIC)
        fh.write(struct.pack("<5I", FSEQ_VERSION, t, c, y, x))
        fh.write(np.ascontiguousarray(seq.data, dtype="<f4").tobytes())


def read_fseq(path, config: Optional[RasterConfig] = None) -> FrameSequence:
    raw = Path(path).read_bytes()
    if raw[:4] != FSEQ_MAGIC:
        raise ValueError(f"{path}: not an FSEQ file")
    version, t, c, y, x = struct.unpack("<5I", raw[4:24])
    if version != FSEQ_VERSION:
        raise ValueError(f"{path}: unsupported FSEQ version {version}")
    data = np.frombuffer(raw, dtype="<f4", offset=24)
    if data.size != t * c * y * x:
        raise ValueError(f"{path}: truncated payload")
    data = data.reshape(t, c, y, x).astype(np.float32)
    if config is None:
        config = RasterConfig(width=x, height=y, frames=t)
    return FrameSequence(data, config)


def write_pgm_frames(directory, seq: FrameSequence, prefix: str = "frame") -> list:
    """One binary PGM per frame, channels tiled left to right, each max-scaled."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for t, frame in enumerate(seq.data):
        tiles = []
        for ch in frame:
            peak = float(ch.max())
            scaled = ch / peak if peak > 0 else ch
            tiles.append(np.round(scaled * 255.0).astype(np.uint8))
        img = np.concatenate(tiles, axis=1)
        h, w = img.shape
        path = directory / f"{prefix}_{t:03d}.pgm"
        with open(path, "wb") as fh:
            fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
            fh.write(img.tobytes())
        paths.append(path)
    return paths
