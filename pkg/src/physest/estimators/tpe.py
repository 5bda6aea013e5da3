"""Tree-structured Parzen estimator over the unit hypercube.

Trials are split at the ``gamma`` quantile of the objective into a good set
and a bad set.  Each set is modelled per dimension by a mixture of Gaussians
truncated to [0, 1], one component per observed coordinate plus a broad prior
component; candidates drawn from the good-set model are ranked by the density
ratio good/bad.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np
from scipy.special import ndtr, ndtri

PRIOR_MU = 0.5
PRIOR_SIGMA = 1.0


@dataclass(frozen=True)
class TpeConfig:
    gamma: float = 0.25
    n_startup: int = 5
    n_candidates: int = 24
    bandwidth_floor: float = 1e-3

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must lie in (0, 1)")
        if self.n_startup < 1:
            raise ValueError("n_startup must be >= 1")
        if self.n_candidates < 1:
            raise ValueError("n_candidates must be >= 1")
        if not self.bandwidth_floor > 0:
            raise ValueError("bandwidth_floor must be positive")


@dataclass(frozen=True)
class TrialHistory:
    """Evaluated points in the unit cube with their (image-space) objective."""

    points: Tuple[Tuple[float, ...], ...] = ()
    objectives: Tuple[float, ...] = ()

    def __post_init__(self):
        if len(self.points) != len(self.objectives):
            raise ValueError("points and objectives differ in length")

    def add(self, point: Sequence[float], objective: float) -> "TrialHistory":
        point = tuple(float(v) for v in point)
        if any(not 0.0 <= v <= 1.0 for v in point):
            raise ValueError("trial point outside the unit cube")
        if not objective >= 0:
            raise ValueError("objective must be >= 0")
        return TrialHistory(self.points + (point,), self.objectives + (float(objective),))

    def __len__(self) -> int:
        return len(self.points)

    def best(self) -> Tuple[Tuple[float, ...], float]:
        i = int(np.argmin(self.objectives))
        return self.points[i], self.objectives[i]


@dataclass(frozen=True)
class Parzen1D:
    """Mixture of [0, 1]-truncated Gaussians with equal weights."""

    mus: np.ndarray
    sigmas: np.ndarray

    @property
    def _mass(self) -> np.ndarray:
        return ndtr((1.0 - self.mus) / self.sigmas) - ndtr(-self.mus / self.sigmas)

    def pdf(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)[..., None]
        z = (x - self.mus) / self.sigmas
        comp = np.exp(-0.5 * z * z) / (math.sqrt(2.0 * math.pi) * self.sigmas * self._mass)
        return comp.mean(axis=-1)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        idx = rng.integers(0, len(self.mus), size=n)
        mu, sig = self.mus[idx], self.sigmas[idx]
        lo = ndtr(-mu / sig)
        hi = ndtr((1.0 - mu) / sig)
        u = lo + rng.random(n) * (hi - lo)
        x = mu + sig * ndtri(np.clip(u, 1e-300, 1.0 - 1e-16))
        return np.clip(x, 0.0, 1.0)


def parzen_estimator(coords: Sequence[float], floor: float) -> Parzen1D:
    """Components at ``coords`` plus the prior; bandwidth from sorted neighbours.

    Bandwidths are clipped below by ``max(floor, PRIOR_SIGMA / min(100, n + 1))``
    with ``n`` components, which keeps a handful of nearly coincident trials
    from collapsing the good-set density onto a spike.
    """
    obs = np.asarray(coords, dtype=np.float64)
    mus = np.append(obs, PRIOR_MU)
    order = np.argsort(mus, kind="stable")
    srt = mus[order]
    if srt.size == 1:
        sig_sorted = np.array([PRIOR_SIGMA])
    else:
        gaps = np.diff(srt)
        left = np.concatenate([[gaps[0]], gaps])
        right = np.concatenate([gaps, [gaps[-1]]])
        sig_sorted = np.maximum(left, right)
    sigmas = np.empty_like(mus)
    sigmas[order] = sig_sorted
    floor = max(floor, PRIOR_SIGMA / min(100.0, 1.0 + mus.size))
    sigmas = np.clip(sigmas, floor, PRIOR_SIGMA)
    sigmas[-1] = PRIOR_SIGMA
    return Parzen1D(mus, sigmas)


def split_trials(history: TrialHistory, gamma: float):
    """Indices of the good (lowest objective) and bad trials."""
    obj = np.asarray(history.objectives)
    order = np.argsort(obj, kind="stable")
    n_good = int(math.ceil(gamma * len(obj)))
    return order[:n_good], order[n_good:]


def tpe_propose(history: TrialHistory, cfg: TpeConfig, seed: int, dim: int | None = None) -> np.ndarray:
    """Next point in [0, 1]^d to evaluate."""
    if dim is None:
        if not len(history):
            raise ValueError("dimension unknown: empty history and no dim given")
        dim = len(history.points[0])
    if dim < 1:
        raise ValueError("dimension must be >= 1")
    if len(history) and len(history.points[0]) != dim:
        raise ValueError("history dimension does not match dim")
    rng = np.random.default_rng(np.random.SeedSequence(int(seed) & ((1 << 64) - 1)))
    if len(history) < cfg.n_startup:
        return rng.random(dim)
    good, bad = split_trials(history, cfg.gamma)
    pts = np.asarray(history.points, dtype=np.float64)
    cands = np.empty((cfg.n_candidates, dim))
    score = np.zeros(cfg.n_candidates)
    for d in range(dim):
        l_model = parzen_estimator(pts[good, d], cfg.bandwidth_floor)
        g_model = parzen_estimator(pts[bad, d], cfg.bandwidth_floor)
        x = l_model.sample(rng, cfg.n_candidates)
        cands[:, d] = x
        score += np.log(l_model.pdf(x)) - np.log(g_model.pdf(x))
    return cands[int(np.argmax(score))]


def random_propose(history: TrialHistory, seed: int, dim: int) -> np.ndarray:
    """Uniform proposal; shares the TPE start-up stream for paired comparisons."""
    rng = np.random.default_rng(np.random.SeedSequence(int(seed) & ((1 << 64) - 1)))
    return rng.random(dim)


def minimize(objective, dim: int, n_trials: int, seed: int, cfg: TpeConfig = TpeConfig(),
             method: str = "tpe") -> TrialHistory:
    """Sequential black-box minimisation of ``objective`` over [0, 1]^dim."""
    from ..seeding import derive_seed

    history = TrialHistory()
    for i in range(n_trials):
        s = derive_seed(seed, i)
        if method == "tpe":
            x = tpe_propose(history, cfg, s, dim)
        elif method == "random":
            x = random_propose(history, s, dim)
        else:
            raise ValueError(f"unknown method {method!r}")
        history = history.add(x, float(objective(x)))
    return history
