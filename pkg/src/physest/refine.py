"""Iterative refinement: simulate, compare, correct, repeat.

``refine`` queries the estimator once per iteration for every free parameter
with nothing highlighted.  ``refine_multi`` sweeps the unknown objects each
iteration, highlighting one at a time; all queries of a sweep see the same
pre-sweep parameters and their updates are applied together at the end.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from functools import partial
from typing import Dict, Mapping, Optional, Sequence, Tuple

import numpy as np

from . import seeding
from .estimators.base import EstimatorContext
from .estimators.tpe import TrialHistory
from .metrics import image_mse, normalized_param_mse
from .parallel import parallel_map
from .physics2d import simulate
from .raster import FrameSequence, RasterConfig, render_sequence
from .scenes import ParamVector, SceneSpec, apply_params, check_params


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    params: ParamVector
    image_mse: float
    param_mse: Optional[float]
    best: bool  # lowest image MSE so far (first one wins ties)
    best_image_mse: float


@dataclass(frozen=True)
class RunRecord:
    estimator: str
    seed: int
    scene: SceneSpec
    raster: RasterConfig
    mode: str
    iterations: Tuple[IterationRecord, ...]
    extra: Mapping = field(default_factory=dict)

    @property
    def m(self) -> int:
        return len(self.iterations) - 1

    def best_index(self, upto: Optional[int] = None) -> int:
        """Iteration with the lowest image MSE among ``0..upto``."""
        upto = self.m if upto is None else upto
        its = self.iterations[: upto + 1]
        return min(range(len(its)), key=lambda i: (its[i].image_mse, i))

    def best_params(self, upto: Optional[int] = None) -> ParamVector:
        return self.iterations[self.best_index(upto)].params

    def min_param_mse(self, upto: Optional[int] = None) -> float:
        upto = self.m if upto is None else upto
        vals = [it.param_mse for it in self.iterations[: upto + 1]]
        if any(v is None for v in vals):
            raise ValueError("run has no ground truth")
        return min(vals)

    def param_mse_curve(self) -> np.ndarray:
        return np.array([it.param_mse for it in self.iterations], dtype=np.float64)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        cols = [f"{o}:{k.value}" for o, k in self.iterations[0].params.keys]
        w.writerow(["iteration", *cols, "image_mse", "param_mse", "best", "best_image_mse"])
        for it in self.iterations:
            pm = "" if it.param_mse is None else repr(it.param_mse)
            w.writerow([it.iteration, *(repr(float(v)) for v in it.params.values),
                        repr(it.image_mse), pm, int(it.best), repr(it.best_image_mse)])
        return buf.getvalue()

    def manifest(self) -> dict:
        return {"estimator": self.estimator, "seed": self.seed, "mode": self.mode,
                "iterations": self.m, "scene": self.scene.to_dict(),
                "raster": self.raster.to_dict(), **dict(self.extra)}


def settle_iteration(errors: Sequence[float], fraction: float = 0.1) -> int:
    """First ``t`` with ``e_t - e_final <= fraction * (e_0 - e_final)``.

    Returns 0 when the error never decreased overall.
    """
    e = np.asarray(errors, dtype=np.float64)
    span = e[0] - e[-1]
    if span <= 0:
        return 0
    return int(np.nonzero(e - e[-1] <= fraction * span)[0][0])


def render_state(spec: SceneSpec, params: ParamVector, config: RasterConfig,
                 highlights: Sequence[Optional[int]] = (None,)) -> Dict[Optional[int], FrameSequence]:
    """One simulation, rendered once per requested highlight."""
    traj = simulate(apply_params(spec, params), config.steps)
    return {h: render_sequence(traj, None, config, h) for h in highlights}


def observe(spec: SceneSpec, truth: ParamVector, config: RasterConfig,
            per_object: bool = False) -> Dict[Optional[int], FrameSequence]:
    """Observation family keyed by highlighted id (``None`` = no highlight)."""
    hl = (None, *spec.unknown_ids) if per_object else (None,)
    return render_state(spec, truth, config, hl)


class _Tracker:
    def __init__(self, bounds, truth):
        self.bounds = bounds
        self.truth = truth
        self.records = []
        self.best = np.inf

    def add(self, params: ParamVector, mse: float):
        pm = None if self.truth is None else normalized_param_mse(params, self.truth, self.bounds)
        is_best = mse < self.best
        self.best = min(self.best, mse)
        self.records.append(IterationRecord(len(self.records), params, mse, pm, is_best, self.best))


def _start(spec, p0, m, config, observations, truth):
    if m < 0:
        raise ValueError("iteration count must be >= 0")
    check_params(spec, p0)
    if truth is not None:
        check_params(spec, truth)
    for key, obs in observations.items():
        if obs.shape != config.shape:
            raise ValueError(f"observation {key} has shape {obs.shape}, raster gives {config.shape}")


def refine(spec: SceneSpec, observation: FrameSequence, p0: ParamVector, estimator, m: int,
           seed: int = 0, truth: Optional[ParamVector] = None,
           config: Optional[RasterConfig] = None) -> RunRecord:
    config = config or observation.config
    _start(spec, p0, m, config, {None: observation}, truth)
    track = _Tracker(spec.bounds, truth)
    history = TrialHistory()
    params = p0
    for t in range(m + 1):
        sim = render_state(spec, params, config)[None]
        mse = image_mse(observation, sim)
        track.add(params, mse)
        if t == m:
            break
        history = history.add(params.to_unit(spec.bounds), mse)
        ctx = EstimatorContext(observation, sim, params, spec.bounds, None, history,
                               seeding.derive_seed(seed, seeding.ESTIMATOR, t))
        params = estimator.propose_update(ctx).apply(params, spec.bounds)
    return RunRecord(estimator.name, int(seed), spec, config, "single", tuple(track.records))


def _query(job):
    estimator, ctx = job
    return estimator.propose_update(ctx)


def refine_multi(spec: SceneSpec, observations: Mapping[Optional[int], FrameSequence],
                 p0: ParamVector, estimator, m: int, seed: int = 0,
                 truth: Optional[ParamVector] = None, config: Optional[RasterConfig] = None,
                 workers: Optional[int] = 1) -> RunRecord:
    """Per-object sweeps with simultaneous (Jacobi) updates.

    ``observations`` maps each unknown id (and ``None`` for the recorded image
    MSE) to the observation rendered with that object highlighted.
    """
    ids = spec.unknown_ids
    if not ids:
        raise ValueError("scene has no unknown objects")
    missing = [k for k in (None, *ids) if k not in observations]
    if missing:
        raise ValueError(f"observation family lacks highlights {missing}")
    config = config or observations[None].config
    _start(spec, p0, m, config, observations, truth)
    track = _Tracker(spec.bounds, truth)
    histories = {k: TrialHistory() for k in ids}
    params = p0
    for t in range(m + 1):
        frames = render_state(spec, params, config, (None, *ids))
        track.add(params, image_mse(observations[None], frames[None]))
        if t == m:
            break
        jobs = []
        for j, k in enumerate(ids):
            cur = params.for_object(k)
            obj = image_mse(observations[k], frames[k])
            histories[k] = histories[k].add(cur.to_unit(spec.bounds), obj)
            ctx = EstimatorContext(observations[k], frames[k], cur, spec.bounds, k, histories[k],
                                   seeding.derive_seed(seed, seeding.ESTIMATOR, t, j))
            jobs.append((estimator, ctx))
        updates = parallel_map(_query, jobs, workers)
        # every update is applied to the pre-sweep parameters of its own object
        merged = {}
        for k, u in zip(ids, updates):
            for e in u.apply(params.for_object(k), spec.bounds).entries:
                merged[e.key] = e.value
        params = params.with_values([merged.get(e.key, e.value) for e in params.entries])
    return RunRecord(estimator.name, int(seed), spec, config, "multi", tuple(track.records))


def write_run(run: RunRecord, csv_path, manifest_path=None) -> None:
    with open(csv_path, "w", newline="") as fh:
        fh.write(run.to_csv())
    if manifest_path is not None:
        with open(manifest_path, "w") as fh:
            json.dump(run.manifest(), fh, indent=2, sort_keys=True)
            fh.write("\n")
