"""The correction-estimator interface and the simple estimators behind it."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Protocol, Tuple

import numpy as np

from ..metrics import image_mse
from ..raster import FrameSequence
from ..scenes import ParamBounds, ParamEntry, ParamVector
from .tpe import TpeConfig, TrialHistory, random_propose, tpe_propose


@dataclass(frozen=True)
class EstimatorContext:
    """Everything one estimator query may look at.

    ``current`` holds only the entries under estimation in this query: those
    of ``highlighted`` in a per-object sweep, or every free entry otherwise.
    ``history`` already contains ``current`` with its objective.
    """

    observation: FrameSequence
    simulated: FrameSequence
    current: ParamVector
    bounds: ParamBounds
    highlighted: Optional[int] = None
    history: TrialHistory = field(default_factory=TrialHistory)
    seed: int = 0

    def __post_init__(self):
        if self.observation.shape != self.simulated.shape:
            raise ValueError(f"observation {self.observation.shape} and simulation "
                             f"{self.simulated.shape} differ in shape")

    @property
    def objective(self) -> float:
        return image_mse(self.observation, self.simulated)


@dataclass(frozen=True)
class ParamUpdate:
    """Additive correction ``delta``; ``target`` is set when the update was
    built from an absolute proposal and is then applied exactly."""
    deltas: Tuple[ParamEntry, ...]
    target: Optional[ParamVector] = None

    @classmethod
    def between(cls, current: ParamVector, target: ParamVector) -> "ParamUpdate":
        if current.keys != target.keys:
            raise ValueError("target structure does not match current parameters")
        deltas = tuple(ParamEntry(e.object_id, e.kind, t.value - e.value)
                       for e, t in zip(current.entries, target.entries))
        return cls(deltas, target)

    @property
    def keys(self):
        return tuple(d.key for d in self.deltas)

    @property
    def values(self) -> np.ndarray:
        return np.array([d.value for d in self.deltas], dtype=np.float64)

    def apply(self, current: ParamVector, bounds: ParamBounds) -> ParamVector:
        """``clamp(current + delta)``."""
        if current.keys != self.keys:
            raise ValueError("update structure does not match current parameters")
        if self.target is not None:
            # p + (t - p) can miss t by an ulp; land on the target exactly
            return self.target.clamped(bounds)
        return current.with_values(current.values + self.values).clamped(bounds)


class Estimator(Protocol):
    name: str

    def propose_update(self, ctx: EstimatorContext) -> ParamUpdate: ...


@dataclass(frozen=True)
class OracleEstimator:
    """Test double that knows the ground truth and jumps straight to it."""

    truth: ParamVector
    name: str = "oracle"

    def propose_update(self, ctx: EstimatorContext) -> ParamUpdate:
        target = ParamVector(tuple(ParamEntry(e.object_id, e.kind, self.truth.get(e.object_id, e.kind))
                                   for e in ctx.current.entries))
        return ParamUpdate.between(ctx.current, target)


@dataclass(frozen=True)
class RandomSearchEstimator:
    """Uniform proposals over the bounds; shares the TPE start-up stream."""

    name: str = "random"

    def propose_update(self, ctx: EstimatorContext) -> ParamUpdate:
        u = random_propose(ctx.history, ctx.seed, len(ctx.current))
        return ParamUpdate.between(ctx.current, ctx.current.from_unit(u, ctx.bounds))


@dataclass(frozen=True)
class TpeEstimator:
    """TPE over the normalised parameter cube, converted to an additive update."""

    config: TpeConfig = TpeConfig()
    name: str = "tpe"

    def propose_update(self, ctx: EstimatorContext) -> ParamUpdate:
        u = tpe_propose(ctx.history, self.config, ctx.seed, len(ctx.current))
        return ParamUpdate.between(ctx.current, ctx.current.from_unit(u, ctx.bounds))
