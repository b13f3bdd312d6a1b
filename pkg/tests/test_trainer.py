import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from taxloss.data import MaskingPolicy, SynthSpec, apply_masking, make_record, synth_generate
from taxloss.gcnreg import GcnParams
from taxloss.taxonomy import balanced_taxonomy
from taxloss.trainer import (
    ClassifierParams,
    HistoryRow,
    Method,
    TrainConfig,
    evaluate,
    forward,
    history_csv,
    load_model,
    metrics_from_predictions,
    model_json,
    objective,
    read_history_csv,
    report_json,
    semantic_context,
    softmax,
    sweep_seeds,
    train,
)


def small_problem(seed=0, n=120, labeled=0.5):
    tax = balanced_taxonomy([2, 2, 2])
    spec = SynthSpec(dim=5, counts=[n // 8] * 8, scales=[3, 2, 1], seed=seed)
    full = synth_generate(tax, spec)
    masked = apply_masking(full, tax, MaskingPolicy((0.0, 1 - labeled, 1 - labeled), seed=seed))
    return tax, full, masked


class TestForward:
    def test_zero_params_uniform(self):
        p = forward(ClassifierParams(np.zeros((3, 4)), np.zeros(4)), [1.0, -2.0, 0.5])
        np.testing.assert_allclose(p, 0.25)

    def test_symmetric_logits(self):
        np.testing.assert_allclose(softmax(np.array([3.0, 3.0])), [0.5, 0.5])

    def test_matches_direct(self, rng):
        params = ClassifierParams(rng.normal(size=(4, 5)), rng.normal(size=5))
        x = rng.normal(size=4)
        e = np.exp(x @ params.W + params.b)
        np.testing.assert_allclose(forward(params, x), e / e.sum(), rtol=1e-12)
        assert forward(params, x).sum() == pytest.approx(1.0, abs=1e-6)

    def test_shape_error(self):
        with pytest.raises(ValueError):
            forward(ClassifierParams(np.zeros((3, 2)), np.zeros(2)), [1.0, 2.0])


class TestMetrics:
    def test_two_thirds(self):
        m = metrics_from_predictions([0, 0, 1], [0, 1, 1], 2)
        assert m.accuracy == pytest.approx(2 / 3)
        assert m.f1 == pytest.approx([2 / 3, 2 / 3])
        assert m.macro_avg_f1 == pytest.approx(2 / 3)
        assert m.weighted_avg_f1 == pytest.approx(2 / 3)

    def test_perfect(self):
        m = metrics_from_predictions([0, 1, 2, 1], [0, 1, 2, 1], 3)
        assert m.accuracy == m.macro_avg_f1 == m.weighted_avg_f1 == 1.0

    def test_single_predicted_class(self):
        m = metrics_from_predictions([0, 0, 1, 1], [0, 0, 0, 0], 2)
        assert m.accuracy == 0.5
        assert m.macro_avg_f1 == pytest.approx(1 / 3)

    def test_zero_support_counts(self):
        m = metrics_from_predictions([0, 0], [0, 0], 3)
        assert m.f1 == [1.0, 0.0, 0.0]
        assert m.macro_avg_f1 == pytest.approx(1 / 3)
        assert m.support == [2, 0, 0]

    def test_against_sklearn(self, rng):
        skm = pytest.importorskip("sklearn.metrics")
        for _ in range(20):
            n = int(rng.integers(2, 7))
            y = rng.integers(n, size=40)
            yp = np.where(rng.random(40) < 0.6, y, rng.integers(n, size=40))
            m = metrics_from_predictions(y, yp, n)
            labels = list(range(n))
            assert m.macro_avg_f1 == pytest.approx(
                skm.f1_score(y, yp, labels=labels, average="macro", zero_division=0))
            assert m.weighted_avg_f1 == pytest.approx(
                skm.f1_score(y, yp, labels=labels, average="weighted", zero_division=0))
            assert m.accuracy == pytest.approx(skm.accuracy_score(y, yp))

    def test_errors(self):
        with pytest.raises(ValueError):
            metrics_from_predictions([], [], 2)
        with pytest.raises(ValueError):
            metrics_from_predictions([0, 1], [0], 2)


@given(st.integers(0, 2**32 - 1))
def test_balanced_weighted_equals_macro(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 6))
    y = np.repeat(np.arange(n), int(rng.integers(1, 6)))
    yp = rng.integers(n, size=y.size)
    m = metrics_from_predictions(y, yp, n)
    assert m.weighted_avg_f1 == pytest.approx(m.macro_avg_f1, abs=1e-12)
    # accuracy equals support-weighted recall
    assert m.accuracy == pytest.approx(sum(r * s for r, s in zip(m.recall, m.support)) / y.size)


def _total_loss(cfg, params, batch, tax, ctx, gcn):
    return objective(cfg, params, batch, tax, ctx, gcn).loss


@pytest.mark.parametrize("method", list(Method))
def test_total_gradient_finite_differences(method):
    tax, full, masked = small_problem(1, n=40)
    rng = np.random.default_rng(3)
    lab = [r for r in masked if r.leaf_label is not None]
    unl = [r for r in masked if r.leaf_label is None]
    batch = lab[:3] + unl[:2]  # both kinds so every term is active
    cfg = TrainConfig(method=method, w=0.7)
    ctx = semantic_context(tax, cfg, masked)
    params = ClassifierParams(rng.normal(0, 0.3, (5, 8)), rng.normal(0, 0.1, 8))
    gcn = GcnParams.init(len(tax), 5, 8, rng, scale=0.5) if method is Method.GCN else None
    obj = objective(cfg, params, batch, tax, ctx, gcn)
    h = 1e-6

    def numeric(arr):
        out = np.zeros_like(arr)
        for i in np.ndindex(arr.shape):
            old = arr[i]
            arr[i] = old + h
            up = _total_loss(cfg, params, batch, tax, ctx, gcn)
            arr[i] = old - h
            dn = _total_loss(cfg, params, batch, tax, ctx, gcn)
            arr[i] = old
            out[i] = (up - dn) / (2 * h)
        return out

    for analytic, arr in [(obj.dW, params.W), (obj.db, params.b)]:
        num = numeric(arr)
        assert np.max(np.abs(analytic - num)) / np.max(np.abs(num)) <= 1e-4
    if gcn is not None:
        for analytic, arr in zip(obj.gcn_grads.weights, gcn.weights):
            num = numeric(arr)
            assert np.max(np.abs(analytic - num)) / np.max(np.abs(num)) <= 1e-4


class TestTraining:
    def test_zero_weight_matches_baseline(self):
        tax, _, masked = small_problem(2)
        base = train(TrainConfig(epochs=2, method="baseline"), masked, tax, seed=4)
        for m in ("symbolic", "gcn", "l1only"):
            other = train(TrainConfig(epochs=2, method=m, w=0.0), masked, tax, seed=4)
            assert np.array_equal(other.params.W, base.params.W)
            assert np.array_equal(other.params.b, base.params.b)
            assert [h.loss for h in other.history] == [h.loss for h in base.history]

    def test_full_batch_descent(self):
        tax = balanced_taxonomy([2, 2])
        recs = [make_record(tax, "a", [1.0, 0.5], "n2_0"), make_record(tax, "b", [-0.5, 1.0], "n2_3")]
        for m in Method:
            cfg = TrainConfig(method=m, w=0.2, epochs=50, batch_size=2, lr=0.05, shuffle=False)
            hist = train(cfg, recs, tax, seed=0).history
            losses = [h.loss for h in hist]
            assert all(b < a for a, b in zip(losses, losses[1:])), m

    def test_deterministic(self):
        tax, _, masked = small_problem(3)
        cfg = TrainConfig(method="symbolic", epochs=2)
        a, b = train(cfg, masked, tax, seed=7), train(cfg, masked, tax, seed=7)
        assert history_csv(a.history) == history_csv(b.history)
        assert np.array_equal(a.params.W, b.params.W)

    def test_history_shape(self):
        tax, _, masked = small_problem(4, n=80)
        res = train(TrainConfig(method="symbolic", epochs=3, batch_size=32), masked, tax, seed=0)
        assert res.iters_per_epoch == 3
        assert [h.iter for h in res.history] == list(range(1, 10))
        params, history = res
        assert params is res.params and history is res.history

    def test_sat_trace_rises(self):
        """Mean WMC satisfaction climbs across the first epoch."""
        tax, _, masked = small_problem(5, n=800, labeled=0.2)
        cfg = TrainConfig(method="symbolic", w=0.5, epochs=1, batch_size=8, lr=0.5)
        hist = train(cfg, masked, tax, seed=0).history
        k = len(hist) // 10
        sat = [h.wmc_sat for h in hist]
        first = np.mean([s for s in sat[:k] if s is not None])
        last = np.mean([s for s in sat[-k:] if s is not None])
        assert last > first

    def test_auto_mode(self):
        tax, full, masked = small_problem(6)
        cfg = TrainConfig(method="symbolic")
        assert semantic_context(tax, cfg, full).mode.value == "supervised"
        assert semantic_context(tax, cfg, masked).mode.value == "semi"
        assert semantic_context(tax, TrainConfig(), full) is None

    def test_errors(self):
        tax, full, masked = small_problem(7)
        with pytest.raises(ValueError, match="empty"):
            train(TrainConfig(), [], tax)
        unl = apply_masking(full, tax, MaskingPolicy((1.0, 1.0, 1.0)))
        with pytest.raises(ValueError, match="leaf-labelled"):
            train(TrainConfig(), unl, tax)
        with pytest.raises(ValueError):
            TrainConfig(w=-1.0)
        with pytest.raises(ValueError):
            TrainConfig(method="nope")
        with pytest.raises(ValueError):
            evaluate(ClassifierParams.init(5, 8, 0), [r for r in masked if r.leaf_label is None][:2], tax)

    def test_seed_sweep_picks_best(self):
        tax, full, masked = small_problem(8)
        sweep = sweep_seeds(TrainConfig(epochs=1, seeds=(0, 1, 2)), masked, full, tax)
        best_run, best_rep = sweep.best
        assert best_rep.macro_avg_f1 == max(r.macro_avg_f1 for r in sweep.reports)
        assert best_run.seed in (0, 1, 2)


class TestArtifacts:
    def test_history_roundtrip(self):
        rows = [HistoryRow(1, 0.5, math.nan, None), HistoryRow(2, 0.25, 0.75, 0.125)]
        text = history_csv(rows)
        assert text.splitlines()[0] == "iter,loss,acc,wmc_sat"
        assert text.splitlines()[1] == "1,0.5,,"
        back = read_history_csv(text)
        assert back[1] == rows[1] and back[0].wmc_sat is None and math.isnan(back[0].acc)

    def test_model_roundtrip(self, six_leaf, rng):
        params = ClassifierParams(rng.normal(size=(3, 6)), rng.normal(size=6), seed=5)
        text = model_json(params, six_leaf, TrainConfig())
        p2, tax2 = load_model(text)
        assert np.array_equal(p2.W, params.W) and p2.seed == 5
        assert tax2.serialize() == six_leaf.serialize()

    def test_model_hash_checked(self, six_leaf, rng):
        text = model_json(ClassifierParams.init(3, 6, 0), six_leaf, TrainConfig())
        with pytest.raises(ValueError, match="hash"):
            load_model(text.replace("X6", "X7"))

    def test_report_fields(self, six_leaf):
        rep = metrics_from_predictions([0, 1, 2], [0, 1, 1], 6)
        text = report_json(rep, six_leaf, TrainConfig(), 0, [(0, rep)])
        import json

        doc = json.loads(text)
        assert doc["schema_version"] == 1
        assert {"accuracy", "macro_avg_f1", "weighted_avg_f1", "per_class", "per_seed"} <= set(doc)
        assert doc["per_class"][0]["class"] == "X1"

    def test_config_roundtrip(self):
        cfg = TrainConfig(method="gcn", w=0.3, seeds=(4, 5), gcn_layers=2)
        again = TrainConfig.from_dict(cfg.to_dict())
        assert again == cfg
        assert replace(cfg, w=0.1).w == 0.1
