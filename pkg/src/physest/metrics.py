"""Objective and evaluation measures."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .physics2d import simulate
from .raster import FrameSequence, RasterConfig, render_sequence
from .scenes import ParamBounds, ParamKind, ParamVector, SceneSpec, apply_params

SWEEP_POINTS = 41
# absolute value ranges swept by default, per kind
SWEEP_RANGES = {
    ParamKind.MASS: (1.0, 9.0),
    ParamKind.ELASTICITY: (0.0, 1.0),
    ParamKind.FRICTION: (0.1, 0.9),
}
SWEEP_BASE = {ParamKind.MASS: 5.0, ParamKind.ELASTICITY: 0.1, ParamKind.FRICTION: 0.1}


def image_mse(a: FrameSequence, b: FrameSequence) -> float:
    """Mean squared element difference, accumulated in double precision."""
    da = a.data if isinstance(a, FrameSequence) else np.asarray(a)
    db = b.data if isinstance(b, FrameSequence) else np.asarray(b)
    if da.shape != db.shape:
        raise ValueError(f"shape mismatch: {da.shape} vs {db.shape}")
    diff = da.astype(np.float64) - db.astype(np.float64)
    return float(np.sum(diff * diff) / diff.size)


def normalized_param_mse(est: ParamVector, gt: ParamVector, bounds: ParamBounds) -> float:
    """Mean of ((est - gt) / p_max)^2 over entries."""
    if est.keys != gt.keys:
        raise ValueError("parameter vectors have different structure")
    if not len(est):
        raise ValueError("empty parameter vectors")
    total = 0.0
    for e, g in zip(est.entries, gt.entries):
        d = (e.value - g.value) / bounds.p_max(e.kind)
        total += d * d
    return total / len(est)


@dataclass(frozen=True)
class SensitivityCurve:
    kind: ParamKind
    base: float
    deltas: Tuple[float, ...]
    mse: Tuple[float, ...]

    @property
    def range(self) -> float:
        return max(self.mse) - min(self.mse)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["delta", "image_mse"])
            for d, m in zip(self.deltas, self.mse):
                w.writerow([repr(float(d)), repr(float(m))])


def default_deltas(kind, base: float, points: int = SWEEP_POINTS,
                   value_range: Optional[Tuple[float, float]] = None) -> Tuple[float, ...]:
    """Evenly spaced offsets covering ``value_range`` that always contain 0."""
    kind = ParamKind(kind)
    lo, hi = value_range or SWEEP_RANGES[kind]
    lo_d, hi_d = lo - base, hi - base
    if lo_d > 0 or hi_d < 0:
        raise ValueError("base lies outside the sweep range")
    span = hi_d - lo_d
    k = int(round((points - 1) * (-lo_d) / span)) if span > 0 else 0
    left = np.linspace(lo_d, 0.0, k + 1) if k > 0 else np.array([0.0])
    right = np.linspace(0.0, hi_d, points - k)[1:] if points - k > 1 else np.array([])
    out = np.concatenate([left, right])
    out[k] = 0.0
    return tuple(float(v) for v in out)


def render_params(spec: SceneSpec, params: ParamVector, config: RasterConfig,
                  highlight: Optional[int] = None) -> FrameSequence:
    traj = simulate(apply_params(spec, params), config.steps)
    return render_sequence(traj, None, config, highlight)


def sensitivity_sweep(spec: SceneSpec, kind, base: float, deltas: Sequence[float],
                      config: RasterConfig = RasterConfig(), object_id: Optional[int] = None
                      ) -> SensitivityCurve:
    """Image-space MSE against the base-value sequence as one object's parameter varies.

    All unknowns of the scene get ``base`` for ``kind``; the designated object
    (the first unknown unless given) is then moved to ``base + delta``.
    """
    kind = ParamKind(kind)
    spec = spec.with_free_kinds([kind])
    if object_id is None:
        object_id = spec.unknown_ids[0]
    if object_id not in spec.unknown_ids:
        raise ValueError(f"object {object_id} is not an unknown of the scene")
    bounds = spec.bounds
    for d in (0.0, *deltas):
        if not bounds.contains(kind, base + d):
            raise ValueError(f"{kind.value} value {base + d} outside bounds {bounds[kind]}")
    ref_params = ParamVector.from_items((i, kind, base) for i in spec.unknown_ids)
    reference = render_params(spec, ref_params, config)
    mse = []
    for d in deltas:
        if d == 0:
            mse.append(0.0)
            continue
        vals = [base + d if e.object_id == object_id else base for e in ref_params.entries]
        seq = render_params(spec, ref_params.with_values(vals), config)
        mse.append(image_mse(reference, seq))
    return SensitivityCurve(kind, float(base), tuple(float(d) for d in deltas), tuple(mse))
