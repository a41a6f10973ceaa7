import math
import warnings

import numpy as np
import pytest

from ltrstack import market as mk
from ltrstack import nn
from ltrstack import rankers as rk
from ltrstack import training as tr
from ltrstack.errors import ConfigurationError, DivergenceError, NumericError, TrainingError, ValidationError

TOY = rk.ModelSize(hidden=(5,), feature_k=3, embed_e=3, activation="tanh")


def toy_impression(seed, n=3, f=4, rating=5):
    rng = np.random.default_rng(seed)
    cands = [mk.Listing(i, rng.uniform(size=f)) for i in range(n)]
    q = mk.Query((0, 1, 0, 1), rng.uniform(size=2), seed)
    return mk.Impression(q, cands, int(rng.integers(n)), rating)


@pytest.fixture(scope="module")
def small_log():
    pool = mk.generate_listings(500, seed=31)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return mk.generate_search_log(150, 8, pool, mk.ChoiceModelConfig(), seed=32)


class TestPairs:
    def test_all_pairs(self):
        imp = toy_impression(0, n=5)
        pairs = tr.extract_pairs([imp], tr.TrainConfig())
        assert len(pairs) == 4
        assert all(p.booked is imp.booked and p.not_booked is not imp.booked for p in pairs)
        assert all(p.context is imp.candidates and p.trip_rating == imp.trip_rating for p in pairs)

    def test_single_candidate_skipped(self):
        imp = toy_impression(0, n=1)
        assert tr.extract_pairs([imp], tr.TrainConfig()) == []

    def test_sampled_deterministic(self):
        log = [toy_impression(s, n=6) for s in range(10)]
        cfg = tr.TrainConfig(pairs_per_impression=2, shuffle_seed=4)
        a = [(p.impression_index, p.not_booked_index) for p in tr.extract_pairs(log, cfg)]
        b = [(p.impression_index, p.not_booked_index) for p in tr.extract_pairs(log, cfg)]
        assert a == b and len(a) == 20

    def test_bad_config(self):
        with pytest.raises(ConfigurationError):
            tr.TrainConfig(epochs=0)
        with pytest.raises(ConfigurationError):
            tr.TrainConfig(pairs_per_impression=0)
        with pytest.raises(ConfigurationError):
            tr.TrainConfig(learning_rate=-1.0)


class TestLosses:
    def test_pairwise_examples(self):
        assert tr.pairwise_loss(1.3, 1.3) == pytest.approx(math.log(2), abs=1e-15)
        assert tr.pairwise_loss(20.0, 0.0) < 1e-8
        assert tr.pairwise_loss(0.0, 3.0) == pytest.approx(math.log1p(math.exp(3.0)), rel=1e-15)
        assert tr.pairwise_loss(0.0, 3.0) == pytest.approx(3.0486, abs=1e-4)

    def test_true_pairwise_examples(self):
        assert tr.true_pairwise_loss(0.0, 0.0) == pytest.approx(2 * math.log(2), abs=1e-15)
        assert tr.true_pairwise_loss(20.0, -20.0) < 1e-8
        for g in (-4.0, -0.3, 0.0, 2.5):
            assert tr.true_pairwise_loss(g, -g) == pytest.approx(2 * tr.pairwise_loss(g, 0.0), rel=1e-15)

    @pytest.mark.parametrize("bad", [math.nan, math.inf])
    def test_non_finite(self, bad):
        with pytest.raises(NumericError):
            tr.pairwise_loss(bad, 0.0)
        with pytest.raises(NumericError):
            tr.true_pairwise_loss(0.0, bad)

    def test_weights(self):
        assert tr.total_weight(3) == 1.0
        assert tr.total_weight(5) == 1.5
        assert tr.total_weight(4) == 1.25
        assert tr.total_weight(1) == 1.0
        ws = [tr.trip_quality_weight(r, 0.8) for r in range(1, 6)]
        assert ws == sorted(ws)

    @pytest.mark.parametrize("bad", [0, 6, 2.5])
    def test_rating_out_of_range(self, bad):
        with pytest.raises(ValidationError):
            tr.trip_quality_weight(bad)

    def test_weighted_loss(self):
        assert tr.weighted_loss(0.7, 1.0) == 0.7
        assert tr.weighted_loss(0.7, 2.0) == 1.4
        with pytest.raises(ValidationError):
            tr.weighted_loss(0.7, 0.9)

    def test_weighted_batch_oracle(self):
        r = rk.make_pairwise(4, 2, TOY, 1)
        log = [toy_impression(s, n=4, rating=1 + s % 5) for s in range(10)]
        total = 0.0
        for imp in log:
            w = tr.total_weight(imp.trip_rating)
            loss, _ = tr.impression_loss_and_grads(r, imp, [j for j in range(4) if j != imp.booked_index], w)
            total += loss
        oracle = 0.0
        for imp in log:
            s = r.logits(imp.inputs())
            for j in range(4):
                if j != imp.booked_index:
                    oracle += tr.weighted_loss(tr.pairwise_loss(s[imp.booked_index], s[j]),
                                               tr.total_weight(imp.trip_rating))
        assert total == pytest.approx(oracle, rel=1e-12)

    def test_weight_scales_gradients(self):
        r = rk.make_pairwise(4, 2, TOY, 2)
        imp = toy_impression(3)
        others = [j for j in range(3) if j != imp.booked_index]
        l1, g1 = tr.impression_loss_and_grads(r, imp, others, 1.0)
        l2, g2 = tr.impression_loss_and_grads(r, imp, others, 2.0)
        assert l2 == 2 * l1
        for a, b in zip(g1, g2):
            np.testing.assert_array_equal(2 * a, b)


def _loss_params(ranker, imp, weight):
    others = [j for j in range(imp.size) if j != imp.booked_index]
    return lambda: tr.impression_loss_and_grads(ranker, imp, others, weight, need_grads=False)[0], others


class TestGradientChecks:
    @pytest.mark.parametrize("variant", rk.VARIANTS)
    @pytest.mark.parametrize("seed", range(20))
    def test_end_to_end(self, variant, seed):
        imp = toy_impression(seed, n=3, rating=1 + seed % 5)
        ranker = rk.make_ranker(variant, 4, 2, TOY, seed)
        rng = np.random.default_rng(seed)
        for p in ranker.parameters():
            # move off the zero-initialised output layer so every path carries gradient
            p += rng.normal(scale=0.3, size=p.shape)
        weight = tr.total_weight(imp.trip_rating)
        loss_fn, others = _loss_params(ranker, imp, weight)
        _, analytic = tr.impression_loss_and_grads(ranker, imp, others, weight)
        numeric = nn.finite_difference_gradient(loss_fn, ranker.parameters(), eps=1e-5)
        assert nn.max_relative_error(analytic, numeric) < 1e-4

    def test_base_is_frozen(self):
        log = [toy_impression(s, n=4) for s in range(20)]
        r = rk.make_ranker(rk.ALL_PAIRWISE_APFN, 4, 2, TOY, 0)
        before = r.base.f.get_flat().copy()
        tr.fit(r, log, tr.TrainConfig(epochs=2))
        assert np.array_equal(before, r.base.f.get_flat())


class TestLoop:
    def test_zero_steps_is_init(self, small_log):
        pw = rk.make_pairwise(8, 2, TOY, 0)
        r = rk.make_ranker(rk.ALL_PAIRWISE_APFN, 8, 2, TOY, 0, base=pw)
        before = [p.copy() for p in r.parameters()]
        res = tr.fit(r, small_log, tr.TrainConfig(max_steps=0))
        assert res.steps == 0
        assert all(np.array_equal(a, b) for a, b in zip(before, r.parameters()))
        x = small_log[0].inputs()
        assert np.array_equal(np.argsort(-r.scores(x), kind="stable"), np.argsort(-pw.logits(x), kind="stable"))

    @pytest.mark.parametrize("variant", rk.VARIANTS)
    def test_bit_identical_reruns(self, small_log, variant):
        cfg = tr.TrainConfig(epochs=1, shuffle_seed=3)
        a = tr.train_variant(variant, small_log, cfg, TOY, init_seed=5).ranker
        b = tr.train_variant(variant, small_log, cfg, TOY, init_seed=5).ranker
        for p, q in zip(a.parameters(), b.parameters()):
            assert p.tobytes() == q.tobytes()

    def test_shuffle_seed_matters(self, small_log):
        a = tr.train_variant(rk.PAIRWISE, small_log, tr.TrainConfig(epochs=1, shuffle_seed=1), TOY).ranker
        b = tr.train_variant(rk.PAIRWISE, small_log, tr.TrainConfig(epochs=1, shuffle_seed=2), TOY).ranker
        assert not np.array_equal(a.f.get_flat(), b.f.get_flat())

    def test_loss_decreases_on_mnl_data(self):
        # frozen regression bound: final epoch mean loss below the first on lambda = 0 data
        pool = mk.generate_listings(600, seed=41)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            log = mk.generate_search_log(400, 10, pool, mk.ChoiceModelConfig(similarity_penalty=0.0), seed=42)
        res = tr.train_variant(rk.PAIRWISE, log, tr.TrainConfig(epochs=4), rk.ModelSize(hidden=(16,)))
        assert len(res.trace) == 4
        assert res.trace[-1].mean_loss < res.trace[0].mean_loss
        assert res.trace[0].pair_count == len(log) * 9

    def test_anticommutative_throughout(self, small_log):
        r = rk.make_ranker(rk.TRUE_PAIRWISE_GBT, 8, 2, TOY, 0)
        x = small_log[0].inputs()
        for _ in range(3):
            tr.fit(r, small_log, tr.TrainConfig(epochs=1, max_steps=20))
            g = r.logit_matrix(x)
            assert np.array_equal(g, -g.T)

    def test_empty(self):
        with pytest.raises(TrainingError):
            tr.train_variant(rk.PAIRWISE, [], tr.TrainConfig())
        with pytest.raises(TrainingError):
            tr.fit(rk.make_pairwise(4, 2, TOY), [toy_impression(0, n=1)], tr.TrainConfig())

    def test_divergence_names_step(self, small_log, monkeypatch):
        real = tr.impression_loss_and_grads
        calls = []

        def poisoned(*args, **kw):
            loss, grads = real(*args, **kw)
            calls.append(1)
            return (math.nan if len(calls) == 4 else loss), grads

        monkeypatch.setattr(tr, "impression_loss_and_grads", poisoned)
        with pytest.raises(DivergenceError) as info:
            tr.fit(rk.make_pairwise(8, 2, TOY, 0), small_log, tr.TrainConfig(epochs=1))
        assert info.value.step == 3 and "step 3" in str(info.value)

    def test_default_learning_rates(self):
        assert tr.default_learning_rate(rk.PAIRWISE) == 2e-3
        assert tr.default_learning_rate(rk.ALL_PAIRWISE_APFN) == tr.CONTEXT_LEARNING_RATE

    def test_loss_trace_csv(self, tmp_path):
        trace = [tr.EpochStats(0, 0.5, 10), tr.EpochStats(1, 0.25, 10)]
        p = tmp_path / "trace.csv"
        tr.write_loss_trace(trace, p)
        assert p.read_text().splitlines() == ["epoch,mean_loss,pair_count", "0,0.5,10", "1,0.25,10"]
