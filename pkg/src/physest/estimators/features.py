"""Image-moment features: the fixed-length input of the learned regressor.

For every frame and channel we keep six numbers: pixel mass, centroid
(column, row) in pixel-index units and the mass-normalised central second
moments xx, yy, xy.  The vector is ``[observation | simulation | obs - sim]``,
each block laid out frame-major, then channel, then moment.
"""
from __future__ import annotations

import numpy as np

from ..raster import FrameSequence

MOMENTS = ("mass", "cx", "cy", "xx", "yy", "xy")


def frame_moments(data: np.ndarray) -> np.ndarray:
    """``(T, C, Y, X)`` -> ``(T, C, 6)`` moments.

    An empty channel reports the window centre as its centroid and zero
    second moments.
    """
    data = np.asarray(data, dtype=np.float64)
    _, _, ny, nx = data.shape
    cols = np.arange(nx, dtype=np.float64)
    rows = np.arange(ny, dtype=np.float64)
    col_mass = data.sum(axis=2)  # (T, C, X)
    row_mass = data.sum(axis=3)  # (T, C, Y)
    mass = col_mass.sum(axis=2)
    empty = mass <= 0
    safe = np.where(empty, 1.0, mass)
    cx = np.where(empty, 0.5 * (nx - 1), col_mass @ cols / safe)
    cy = np.where(empty, 0.5 * (ny - 1), row_mass @ rows / safe)
    dx = cols[None, None, :] - cx[..., None]
    dy = rows[None, None, :] - cy[..., None]
    xx = np.einsum("tcx,tcx->tc", col_mass, dx * dx) / safe
    yy = np.einsum("tcy,tcy->tc", row_mass, dy * dy) / safe
    xy = np.einsum("tcyx,tcy,tcx->tc", data, dy, dx) / safe
    out = np.stack([mass, cx, cy, xx, yy, xy], axis=-1)
    out[..., 3:][empty] = 0.0
    return out


def feature_length(frames: int, channels: int) -> int:
    return 3 * frames * channels * len(MOMENTS)


def extract_features(obs: FrameSequence, sim: FrameSequence) -> np.ndarray:
    a = obs.data if isinstance(obs, FrameSequence) else np.asarray(obs)
    b = sim.data if isinstance(sim, FrameSequence) else np.asarray(sim)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    mo = frame_moments(a).ravel()
    ms = frame_moments(b).ravel()
    return np.concatenate([mo, ms, mo - ms])
