import csv
import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from physest import seeding
from physest.estimators import (EstimatorContext, LearnedEstimator, OracleEstimator, ParamUpdate,
                                RandomSearchEstimator, TpeEstimator, init_mlp)
from physest.estimators.features import feature_length
from physest.raster import RasterConfig
from physest.refine import observe, refine, refine_multi, render_state, settle_iteration
from physest.scenes import ParamEntry, ParamVector, SceneKind, make_scene, sample_params

FAST = RasterConfig(width=24, height=24, frames=10, stride=29)


def setup(kind="three_circles", seed=0, n=None, kinds=None, single=False):
    spec = make_scene(kind, n, seed, kinds, allow_single=single)
    truth = sample_params(spec, seeding.derive_seed(seed, seeding.TRUTH))
    p0 = sample_params(spec, seeding.derive_seed(seed, seeding.START))
    return spec, truth, p0


class Overshoot:
    """Always proposes a huge step so that clamping has to act."""
    name = "overshoot"

    def propose_update(self, ctx):
        return ParamUpdate(tuple(ParamEntry(e.object_id, e.kind, 100.0) for e in ctx.current.entries))


# -- updates ----------------------------------------------------------------

def test_update_apply_clamps():
    spec, truth, p0 = setup()
    up = ParamUpdate(tuple(ParamEntry(e.object_id, e.kind, 50.0) for e in p0.entries))
    assert up.apply(p0, spec.bounds).values.tolist() == [10.0, 10.0]
    with pytest.raises(ValueError):
        ParamUpdate(up.deltas[:1]).apply(p0, spec.bounds)


def test_context_shape_check():
    spec, truth, p0 = setup()
    a = render_state(spec, truth, FAST)[None]
    b = render_state(spec, truth, RasterConfig(width=8, height=8, frames=10, stride=29))[None]
    with pytest.raises(ValueError):
        EstimatorContext(a, b, p0, spec.bounds)


def test_oracle_delta_is_exact():
    spec, truth, p0 = setup()
    seqs = render_state(spec, p0, FAST)
    ctx = EstimatorContext(seqs[None], seqs[None], p0, spec.bounds)
    d = OracleEstimator(truth).propose_update(ctx)
    assert d.values.tolist() == (truth.values - p0.values).tolist()


@pytest.mark.parametrize("est", [RandomSearchEstimator(), TpeEstimator()])
def test_random_and_tpe_are_reproducible(est):
    spec, truth, p0 = setup()
    obs = observe(spec, truth, FAST)[None]
    a = refine(spec, obs, p0, est, 6, seed=5, truth=truth)
    b = refine(spec, obs, p0, est, 6, seed=5, truth=truth)
    assert a.to_csv() == b.to_csv()


@settings(max_examples=10)
@given(seed=st.integers(0, 1000), kind=st.sampled_from(["three_circles", "second_order"]))
def test_every_estimator_respects_bounds(seed, kind):
    spec, truth, p0 = setup(kind, seed)
    obs = observe(spec, truth, FAST, per_object=True)
    for est in (OracleEstimator(truth), RandomSearchEstimator(), TpeEstimator(), Overshoot()):
        run = refine(spec, obs[None], p0, est, 3, seed, truth)
        for it in run.iterations:
            assert all(spec.bounds.contains(e.kind, e.value) for e in it.params.entries)
    learned = LearnedEstimator(init_mlp((feature_length(10, 3), 8, 1), seed))
    run = refine_multi(spec, obs, p0, learned, 2, seed, truth)
    for it in run.iterations:
        assert all(spec.bounds.contains(e.kind, e.value) for e in it.params.entries)


# -- single-query loop ------------------------------------------------------

def test_m_plus_one_entries_and_negative_m():
    spec, truth, p0 = setup()
    obs = observe(spec, truth, FAST)[None]
    assert len(refine(spec, obs, p0, TpeEstimator(), 4, truth=truth).iterations) == 5
    assert len(refine(spec, obs, p0, TpeEstimator(), 0, truth=truth).iterations) == 1
    with pytest.raises(ValueError):
        refine(spec, obs, p0, TpeEstimator(), -1)


def test_observation_shape_must_match():
    spec, truth, p0 = setup()
    obs = observe(spec, truth, FAST)[None]
    with pytest.raises(ValueError):
        refine(spec, obs, p0, TpeEstimator(), 2, config=RasterConfig(width=8, height=8))


@pytest.mark.parametrize("kind", list(SceneKind))
def test_oracle_one_step(kind):
    spec, truth, p0 = setup(kind, 3)
    obs = observe(spec, truth, FAST)[None]
    run = refine(spec, obs, p0, OracleEstimator(truth), 3, truth=truth)
    assert run.iterations[1].param_mse == 0.0
    assert all(it.best_image_mse == 0.0 for it in run.iterations[1:])


def test_start_at_truth():
    spec, truth, _ = setup()
    obs = observe(spec, truth, FAST)[None]
    run = refine(spec, obs, truth, RandomSearchEstimator(), 4, truth=truth)
    assert run.iterations[0].image_mse == 0.0
    assert all(it.best_image_mse == 0.0 for it in run.iterations)
    assert run.best_index() == 0


@settings(max_examples=8)
@given(seed=st.integers(0, 10_000))
def test_best_so_far_non_increasing(seed):
    spec, truth, p0 = setup(seed=seed)
    obs = observe(spec, truth, FAST)[None]
    run = refine(spec, obs, p0, RandomSearchEstimator(), 6, seed, truth)
    best = [it.best_image_mse for it in run.iterations]
    assert all(b <= a for a, b in zip(best, best[1:]))
    assert best[-1] == min(it.image_mse for it in run.iterations)
    assert run.iterations[run.best_index()].best


def test_run_csv_layout():
    spec, truth, p0 = setup()
    obs = observe(spec, truth, FAST)[None]
    run = refine(spec, obs, p0, TpeEstimator(), 2, truth=truth)
    rows = list(csv.reader(io.StringIO(run.to_csv())))
    assert rows[0] == ["iteration", "1:mass", "2:mass", "image_mse", "param_mse", "best",
                       "best_image_mse"]
    assert len(rows) == 4
    assert run.manifest()["scene"]["kind"] == "three_circles"


# -- per-object sweeps ------------------------------------------------------

class Counting:
    name = "counting"

    def __init__(self):
        self.calls = []

    def propose_update(self, ctx):
        self.calls.append(ctx.highlighted)
        return ParamUpdate(tuple(ParamEntry(e.object_id, e.kind, 0.0) for e in ctx.current.entries))


def test_six_balls_six_queries_per_iteration():
    spec, truth, p0 = setup("bouncing_balls", 1, n=6)
    obs = observe(spec, truth, FAST, per_object=True)
    est = Counting()
    refine_multi(spec, obs, p0, est, 2, truth=truth)
    assert est.calls == [1, 2, 3, 4, 5, 6] * 2


def test_single_unknown_ball():
    spec, truth, p0 = setup("bouncing_balls", 2, n=1, single=True)
    obs = observe(spec, truth, FAST, per_object=True)
    run = refine_multi(spec, obs, p0, OracleEstimator(truth), 2, truth=truth)
    assert run.iterations[1].param_mse == 0.0


def test_multi_requires_full_observation_family():
    spec, truth, p0 = setup("bouncing_balls", 1, n=3)
    obs = observe(spec, truth, FAST, per_object=True)
    del obs[2]
    with pytest.raises(ValueError):
        refine_multi(spec, obs, p0, OracleEstimator(truth), 1)


def test_parallel_sweep_matches_sequential():
    spec, truth, p0 = setup("bouncing_balls", 4, n=4)
    obs = observe(spec, truth, FAST, per_object=True)
    est = LearnedEstimator(init_mlp((feature_length(10, 3), 8, 1), 1))
    a = refine_multi(spec, obs, p0, est, 2, 4, truth, workers=1)
    b = refine_multi(spec, obs, p0, est, 2, 4, truth, workers=2)
    assert a.to_csv() == b.to_csv()


def test_jacobi_updates_use_pre_sweep_parameters():
    spec, truth, p0 = setup("bouncing_balls", 2, n=3)
    obs = observe(spec, truth, FAST, per_object=True)
    seen = []

    class Spy:
        name = "spy"

        def propose_update(self, ctx):
            seen.append(ctx.simulated.data.copy())
            return ParamUpdate(tuple(ParamEntry(e.object_id, e.kind, 1.0) for e in ctx.current.entries))
    refine_multi(spec, obs, p0, Spy(), 1)
    # the three queries differ only by which object is highlighted
    merged = [s[:, 0] + s[:, 1] for s in seen]
    assert all(np.array_equal(merged[0], m) for m in merged)


def test_settle_iteration():
    assert settle_iteration([1.0, 0.5, 0.1, 0.0]) == 2
    assert settle_iteration([1.0, 0.05, 0.0, 0.0]) == 1
    assert settle_iteration([0.1, 0.2]) == 0


@settings(max_examples=20)
@given(x=st.floats(1.0, 10.0), t=st.floats(1.0, 10.0))
def test_between_lands_exactly_on_target(x, t):
    spec, _, _ = setup()
    cur = spec.default_params().with_values([x, x])
    target = cur.with_values([t, 1.0])
    assert ParamUpdate.between(cur, target).apply(cur, spec.bounds) == target
