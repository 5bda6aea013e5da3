"""Canned experiments: repeated refinement runs and their aggregation."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field, replace
from functools import partial
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .. import seeding
from ..estimators import (LearnedEstimator, OracleEstimator, RandomSearchEstimator,
                          TpeEstimator)
from ..parallel import parallel_map
from ..raster import RasterConfig, blur
from ..refine import RunRecord, observe, refine, refine_multi, write_run
from ..scenes import SceneKind, make_scene, parse_kinds, sample_params

ESTIMATORS = ("oracle", "tpe", "random", "learned")
MODES = ("auto", "single", "multi")


@dataclass(frozen=True)
class ExperimentConfig:
    scene: str = "three_circles"
    estimator: str = "tpe"
    kinds: Tuple[str, ...] = ("mass",)
    runs: int = 10
    iterations: int = 11
    seed: int = 0
    n_unknown: Optional[int] = None
    model: Optional[str] = None
    blur_sigma: float = 0.0
    mode: str = "auto"
    width: int = 64
    height: int = 64
    frames: int = 30
    stride: int = 10

    def __post_init__(self):
        SceneKind(self.scene)
        object.__setattr__(self, "kinds", tuple(k.value for k in parse_kinds(self.kinds)))
        if self.estimator not in ESTIMATORS:
            raise ValueError(f"unknown estimator {self.estimator!r}; choose from {ESTIMATORS}")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; choose from {MODES}")
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.blur_sigma < 0:
            raise ValueError("blur_sigma must be >= 0")
        if self.estimator == "learned" and not self.model:
            raise ValueError("the learned estimator needs a model file")

    @property
    def raster(self) -> RasterConfig:
        return RasterConfig(width=self.width, height=self.height, frames=self.frames,
                            stride=self.stride)

    @property
    def resolved_mode(self) -> str:
        if self.mode != "auto":
            return self.mode
        return "multi" if self.estimator == "learned" else "single"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kinds"] = list(self.kinds)
        return d


def make_estimator(cfg: ExperimentConfig, truth=None):
    if cfg.estimator == "oracle":
        if truth is None:
            raise ValueError("the oracle needs ground truth")
        return OracleEstimator(truth)
    if cfg.estimator == "tpe":
        return TpeEstimator()
    if cfg.estimator == "random":
        return RandomSearchEstimator()
    return LearnedEstimator.load(cfg.model)


def run_seed(cfg: ExperimentConfig, index: int) -> int:
    return seeding.derive_seed(cfg.seed, index)


def run_one(cfg: ExperimentConfig, index: int, workers: Optional[int] = 1) -> RunRecord:
    """Run ``index`` of an experiment; depends only on ``(cfg, index)``."""
    rs = run_seed(cfg, index)
    spec = make_scene(cfg.scene, cfg.n_unknown, rs, cfg.kinds, allow_single=cfg.n_unknown == 1)
    truth = sample_params(spec, seeding.derive_seed(rs, seeding.TRUTH))
    p0 = sample_params(spec, seeding.derive_seed(rs, seeding.START))
    est = make_estimator(cfg, truth)
    multi = cfg.resolved_mode == "multi"
    obs = observe(spec, truth, cfg.raster, per_object=multi)
    if cfg.blur_sigma > 0:
        obs = {k: blur(v, cfg.blur_sigma) for k, v in obs.items()}
    if multi:
        run = refine_multi(spec, obs, p0, est, cfg.iterations, rs, truth, cfg.raster, workers)
    else:
        run = refine(spec, obs[None], p0, est, cfg.iterations, rs, truth, cfg.raster)
    extra = {"run_index": index, "root_seed": cfg.seed, "blur_sigma": cfg.blur_sigma,
             "truth": truth.as_list(), "start": p0.as_list()}
    return replace(run, extra=extra)


def _run_index(cfg: ExperimentConfig, index: int) -> RunRecord:
    return run_one(cfg, index)


def run_experiment(cfg: ExperimentConfig, workers: Optional[int] = None) -> List[RunRecord]:
    """All runs of ``cfg`` in parallel, returned in run order."""
    return parallel_map(partial(_run_index, cfg), range(cfg.runs), workers)


def _config_key(run: RunRecord) -> tuple:
    kinds = tuple(sorted({k.value for k in run.scene.free_kinds}))
    return (run.scene.kind.value, run.estimator, run.mode, kinds, run.m,
            float(run.extra.get("blur_sigma", 0.0)), run.raster.width, run.raster.height)


TABLE_COLUMNS = ("scene", "estimator", "mode", "kinds", "iterations", "blur_sigma", "width",
                 "height", "runs", "mean_min_param_mse", "std_min_param_mse")


def aggregate_table(records: Sequence[RunRecord]) -> List[dict]:
    """Mean and sample std of each run's minimum normalised parameter MSE.

    Rows are grouped by configuration, in order of first appearance.
    """
    if not records:
        raise ValueError("no run records to aggregate")
    groups: Dict[tuple, List[float]] = {}
    for r in records:
        groups.setdefault(_config_key(r), []).append(r.min_param_mse())
    rows = []
    for key, vals in groups.items():
        v = np.asarray(vals, dtype=np.float64)
        std = float(v.std(ddof=1)) if v.size > 1 else 0.0
        row = dict(zip(TABLE_COLUMNS, (*key[:3], "+".join(key[3]), *key[4:])))
        row.update(runs=int(v.size), mean_min_param_mse=float(v.mean()), std_min_param_mse=std)
        rows.append(row)
    return rows


def table_csv(rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=TABLE_COLUMNS, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    return buf.getvalue()


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def write_experiment(out, cfg: ExperimentConfig, records: Sequence[RunRecord],
                     table_name: str = "eval.csv") -> List[dict]:
    out = Path(out)
    (out / "runs").mkdir(parents=True, exist_ok=True)
    for r in records:
        write_run(r, out / "runs" / f"run_{r.extra['run_index']:03d}.csv")
    rows = aggregate_table(records)
    (out / table_name).write_text(table_csv(rows))
    return rows
