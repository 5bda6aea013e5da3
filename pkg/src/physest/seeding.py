"""Counter-based seed splitting.

Every random draw in the package descends from one 64-bit root seed.  A child
seed is addressed by a path of non-negative integers and derived with
``numpy.random.SeedSequence(root, spawn_key=path)``, so any stream can be
regenerated independently of evaluation order or parallelism.

Stream labels used as the first path element:

====  ====================================
 1    scene geometry (placement jitter)
 2    ground-truth parameters
 3    initial guesses
 4    estimator randomness
 5    dataset records
 6    model initialisation / shuffling
====  ====================================
"""
from __future__ import annotations

import numpy as np

SCENE = 1
TRUTH = 2
START = 3
ESTIMATOR = 4
DATASET = 5
TRAINING = 6

MASK64 = (1 << 64) - 1


def derive_seed(root: int, *path: int) -> int:
    """64-bit child seed of ``root`` at ``path``."""
    ss = np.random.SeedSequence(int(root) & MASK64, spawn_key=tuple(int(p) for p in path))
    return int(ss.generate_state(1, np.uint64)[0])


def make_rng(root: int, *path: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(root) & MASK64, spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.PCG64(ss))
