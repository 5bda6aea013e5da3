"""Training data for the learned estimator.

Each record draws a scene, two independent parameter vectors ``p`` (the
observation) and ``p'`` (the guess) and one highlighted unknown.  The input is
the moment features of both renderings and the target is ``(p - p') / p_max``
for the highlighted object's free kinds.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import partial
from pathlib import Path
from typing import Optional, Sequence, Tuple

import numpy as np

from .. import seeding
from ..metrics import render_params
from ..parallel import parallel_map
from ..raster import RasterConfig, blur
from ..scenes import (N_UNKNOWN_RANGE, ParamKind, SceneKind, make_scene, parse_kinds,
                      sample_params)
from .features import extract_features

DATASET_MAGIC = b"PDS1"
DATASET_VERSION = 1
KIND_ORDER = tuple(ParamKind)
LEARNED_RASTER = RasterConfig(width=32, height=32)


@dataclass(frozen=True)
class Dataset:
    seeds: np.ndarray  # uint64 per record
    features: np.ndarray  # (N, F) float64
    targets: np.ndarray  # (N, K) float64
    kinds: Tuple[ParamKind, ...]

    def __post_init__(self):
        n = len(self.seeds)
        if self.features.shape[0] != n or self.targets.shape[0] != n:
            raise ValueError("record counts disagree")
        if self.targets.shape[1] != len(self.kinds):
            raise ValueError("target width does not match kinds")

    def __len__(self) -> int:
        return len(self.seeds)

    @classmethod
    def concat(cls, parts: Sequence["Dataset"]) -> "Dataset":
        if not parts:
            raise ValueError("nothing to concatenate")
        if len({p.kinds for p in parts}) != 1 or len({p.features.shape[1] for p in parts}) != 1:
            raise ValueError("datasets differ in kinds or feature length")
        return cls(np.concatenate([p.seeds for p in parts]),
                   np.concatenate([p.features for p in parts]),
                   np.concatenate([p.targets for p in parts]), parts[0].kinds)

    def subset(self, idx) -> "Dataset":
        return Dataset(self.seeds[idx], self.features[idx], self.targets[idx], self.kinds)


def _record(i: int, *, kind: SceneKind, seed: int, kinds, config: RasterConfig,
            force_equal: bool, n_unknown: Optional[int], obs_blur: float):
    rs = seeding.derive_seed(seed, seeding.DATASET, i)
    rng = seeding.make_rng(rs, 0)
    lo, hi = N_UNKNOWN_RANGE[kind]
    n = n_unknown if n_unknown is not None else int(rng.integers(lo, hi + 1))
    spec = make_scene(kind, n, rs, kinds, allow_single=n_unknown == 1)
    truth = sample_params(spec, seeding.derive_seed(rs, seeding.TRUTH))
    guess = truth if force_equal else sample_params(spec, seeding.derive_seed(rs, seeding.START))
    hl = spec.unknown_ids[int(rng.integers(0, len(spec.unknown_ids)))]
    obs = render_params(spec, truth, config, hl)
    if obs_blur > 0:
        obs = blur(obs, obs_blur)
    sim = render_params(spec, guess, config, hl)
    target = np.array([(truth.get(hl, k) - guess.get(hl, k)) / spec.bounds.p_max(k) for k in kinds])
    return rs, extract_features(obs, sim), target


def gen_dataset(kind, n_records: int, seed: int, kinds: Sequence = (ParamKind.MASS,),
                config: RasterConfig = LEARNED_RASTER, force_equal: bool = False,
                n_unknown: Optional[int] = None, obs_blur: float = 0.0,
                workers: Optional[int] = 1) -> Dataset:
    """``force_equal`` makes the guess equal the truth (test hook); ``obs_blur``
    blurs the observation side only, as for fuzzy real-world observations."""
    if n_records < 1:
        raise ValueError("n_records must be >= 1")
    kind = SceneKind(kind)
    kinds = parse_kinds(kinds)
    fn = partial(_record, kind=kind, seed=seed, kinds=kinds, config=config,
                 force_equal=force_equal, n_unknown=n_unknown, obs_blur=obs_blur)
    rows = parallel_map(fn, range(n_records), workers)
    return Dataset(np.array([r[0] for r in rows], dtype=np.uint64),
                   np.stack([r[1] for r in rows]), np.stack([r[2] for r in rows]), kinds)


def _kind_mask(kinds) -> int:
    return sum(1 << KIND_ORDER.index(k) for k in kinds)


def save_dataset(path, ds: Dataset) -> None:
    """Header ``PDS1`` + u32 (version, records, features, targets, kind mask),
    then per record a u64 seed followed by features and targets as f8; LE."""
    n, f = ds.features.shape
    k = ds.targets.shape[1]
    rec = np.dtype([("seed", "<u8"), ("x", "<f8", (f,)), ("y", "<f8", (k,))])
    arr = np.empty(n, dtype=rec)
    arr["seed"] = ds.seeds
    arr["x"] = ds.features
    arr["y"] = ds.targets
    with open(path, "wb") as fh:
        fh.write(DATASET_MAGIC)
        fh.write(struct.pack("<5I", DATASET_VERSION, n, f, k, _kind_mask(ds.kinds)))
        fh.write(arr.tobytes())


def load_dataset(path) -> Dataset:
    raw = Path(path).read_bytes()
    if raw[:4] != DATASET_MAGIC:
        raise ValueError(f"{path}: not a dataset file")
    version, n, f, k, mask = struct.unpack_from("<5I", raw, 4)
    if version != DATASET_VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    kinds = tuple(kd for j, kd in enumerate(KIND_ORDER) if mask >> j & 1)
    if len(kinds) != k:
        raise ValueError(f"{path}: kind mask does not match target width")
    rec = np.dtype([("seed", "<u8"), ("x", "<f8", (f,)), ("y", "<f8", (k,))])
    body = raw[24:]
    if len(body) != n * rec.itemsize:
        raise ValueError(f"{path}: truncated records")
    arr = np.frombuffer(body, dtype=rec)
    return Dataset(arr["seed"].astype(np.uint64), arr["x"].astype(np.float64).reshape(n, f),
                   arr["y"].astype(np.float64).reshape(n, k), kinds)
