"""Correction estimator backed by the moment-feature regressor."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Tuple

import numpy as np

from ..scenes import ParamEntry, ParamKind, ParamVector, parse_kinds
from .base import EstimatorContext, ParamUpdate
from .features import extract_features
from .mlp import MlpModel, load_mlp, mlp_forward, save_mlp


@dataclass(frozen=True)
class LearnedEstimator:
    """Predicts ``(p - p') / p_max`` for the highlighted object's kinds.

    Entries of the object whose kind the model does not predict get a zero
    update.
    """

    model: MlpModel
    kinds: Tuple[ParamKind, ...] = (ParamKind.MASS,)
    name: str = "learned"

    def __post_init__(self):
        object.__setattr__(self, "kinds", parse_kinds(self.kinds))
        if self.model.n_out != len(self.kinds):
            raise ValueError(f"model predicts {self.model.n_out} values for {len(self.kinds)} kinds")

    def propose_update(self, ctx: EstimatorContext) -> ParamUpdate:
        if ctx.highlighted is None:
            raise ValueError("the learned estimator needs a highlighted object")
        pred = mlp_forward(self.model, extract_features(ctx.observation, ctx.simulated))
        by_kind = dict(zip(self.kinds, np.atleast_1d(pred)))
        deltas = []
        for e in ctx.current.entries:
            if e.object_id != ctx.highlighted:
                raise ValueError("context holds entries of a non-highlighted object")
            d = float(by_kind.get(e.kind, 0.0)) * ctx.bounds.p_max(e.kind)
            deltas.append(ParamEntry(e.object_id, e.kind, d))
        return ParamUpdate(tuple(deltas))

    def save(self, path) -> None:
        """Weights to ``path`` (MLP1) and the kinds to ``path`` + ``.json``."""
        save_mlp(path, self.model)
        Path(str(path) + ".json").write_text(json.dumps({"kinds": [k.value for k in self.kinds]}))

    @classmethod
    def load(cls, path) -> "LearnedEstimator":
        meta = Path(str(path) + ".json")
        kinds = json.loads(meta.read_text())["kinds"] if meta.exists() else ["mass"]
        return cls(load_mlp(path), tuple(kinds))
