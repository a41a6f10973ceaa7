import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from ltrstack import aggregation as ag
from ltrstack.errors import NumericError, ShapeError


def literal_gbt(row):
    """1 / (1 + sum exp(-g)) at 50 significant digits."""
    with mpmath.workdps(50):
        return float(1 / (1 + mpmath.fsum(mpmath.exp(-mpmath.mpf(float(g))) for g in row)))


def antisymmetric(rng, n, scale=3.0):
    a = rng.normal(scale=scale, size=(n, n))
    g = np.triu(a, 1)
    return g - g.T


class TestGbt:
    def test_examples(self):
        assert ag.gbt_score(ag.PairLogitRow(0, [])) == 1.0
        assert ag.gbt_score(ag.PairLogitRow(0, [0.0])) == 0.5
        assert ag.gbt_score(ag.PairLogitRow(0, [0.0, 0.0, 0.0])) == 0.25

    @pytest.mark.parametrize("seed", range(20))
    def test_matches_literal_oracle_5x5(self, seed):
        g = antisymmetric(np.random.default_rng(seed), 5)
        for row in ag.rows_from_matrix(g):
            assert abs(ag.gbt_score(row) - literal_gbt(row.logits_vs_others)) < 1e-12
        vec = ag.gbt_scores(g)
        for i, row in enumerate(ag.rows_from_matrix(g)):
            assert abs(vec[i] - literal_gbt(row.logits_vs_others)) < 1e-12

    def test_extreme_logits_stay_finite(self):
        row = ag.PairLogitRow(0, [-800.0, -750.0, 3.0])
        s = ag.gbt_score(row)
        assert math.isfinite(s) and s >= 0.0
        assert s == pytest.approx(literal_gbt(row.logits_vs_others), rel=1e-12, abs=1e-320)
        pair = ag.gbt_scores(np.array([[0.0, -800.0], [800.0, 0.0]]))
        assert pair[0] == pytest.approx(literal_gbt([-800.0]), rel=1e-12, abs=1e-320)
        assert pair[1] == 1.0

    def test_non_finite(self):
        with pytest.raises(NumericError):
            ag.gbt_score(ag.PairLogitRow(0, [1.0, math.nan]))
        with pytest.raises(NumericError):
            ag.gbt_scores(np.array([[0.0, math.inf], [-math.inf, 0.0]]))

    def test_not_square(self):
        with pytest.raises(ShapeError):
            ag.gbt_scores(np.zeros((2, 3)))

    @given(hnp.arrays(np.float64, st.integers(1, 12), elements=st.floats(-50, 50)))
    def test_in_unit_interval_and_monotone(self, g):
        s = ag.gbt_score(ag.PairLogitRow(0, g))
        assert 0.0 < s <= 1.0
        bumped = g.copy()
        bumped[0] += 1.0
        assert ag.gbt_score(ag.PairLogitRow(0, bumped)) >= s

    @given(hnp.arrays(np.float64, st.integers(2, 10), elements=st.floats(-30, 30)), st.randoms())
    def test_order_of_peers_irrelevant(self, g, rnd):
        perm = list(range(g.size))
        rnd.shuffle(perm)
        a = ag.gbt_score(ag.PairLogitRow(0, g))
        b = ag.gbt_score(ag.PairLogitRow(0, g[perm]))
        assert a == pytest.approx(b, rel=1e-13)


class TestAvg:
    def test_examples(self):
        assert ag.avg_score(ag.PairLogitRow(0, [1.0, 2.0, 6.0])) == 3.0
        assert ag.avg_score(ag.PairLogitRow(0, [])) == 0.0

    @pytest.mark.parametrize("seed", range(5))
    def test_matrix_matches_rows(self, seed):
        g = antisymmetric(np.random.default_rng(seed), 7)
        vec = ag.avg_scores(g)
        for i, row in enumerate(ag.rows_from_matrix(g)):
            assert vec[i] == pytest.approx(ag.avg_score(row), rel=1e-14, abs=1e-15)

    @given(st.integers(2, 9), st.integers(0, 10_000))
    def test_antisymmetric_average_sums_to_zero(self, n, seed):
        g = antisymmetric(np.random.default_rng(seed), n)
        assert abs(ag.avg_scores(g).sum()) < 1e-10


class TestRanking:
    def test_ties_keep_index_order(self):
        assert ag.scores_to_ranking([0.5, 0.7, 0.5, 0.7]).tolist() == [1, 3, 0, 2]

    def test_non_finite(self):
        with pytest.raises(NumericError):
            ag.scores_to_ranking([0.1, math.nan])

    @given(hnp.arrays(np.float64, st.integers(1, 30), elements=st.floats(-1e6, 1e6)))
    def test_is_permutation_sorted_descending(self, s):
        order = ag.scores_to_ranking(s)
        assert sorted(order.tolist()) == list(range(s.size))
        assert np.all(np.diff(s[order]) <= 0)

    @given(st.integers(2, 6), st.integers(0, 10_000))
    def test_gbt_ranking_is_transitive(self, n, seed):
        # final scores are reals, so pairwise "ranked above" relations compose
        g = antisymmetric(np.random.default_rng(seed), n)
        s = ag.gbt_scores(g)
        order = ag.scores_to_ranking(s)
        pos = np.empty(n, dtype=int)
        pos[order] = np.arange(n)
        for a in range(n):
            for b in range(n):
                for c in range(n):
                    if pos[a] < pos[b] and pos[b] < pos[c]:
                        assert pos[a] < pos[c]
