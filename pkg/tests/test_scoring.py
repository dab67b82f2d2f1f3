import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from regionsearch.model import Alignment, QueryImage, ScoringParams, TiledImage
from regionsearch.mwcs import exact_mwcs
from regionsearch.scoring import (BoundMode, bg_distance, safe_positive_sum,
                                  score_matrix_actual, score_matrix_uniform,
                                  tars_threshold_matrix, tile_score, upper_bound)

P = ScoringParams(lam=1.0, c=23000.0)


def _query(bg, dim=2, seed=0):
    bg = np.asarray(bg, dtype=float)
    feats = np.random.default_rng(seed).normal(size=(*bg.shape, dim))
    return QueryImage(feats, bg)


class TestTileScore:
    @pytest.mark.parametrize("bg,r,want", [(0, 0, -23000), (24000, 500, 500),
                                           (24000, 1500, -500)])
    def test_substitution(self, bg, r, want):
        assert tile_score(bg, r, P) == want

    def test_negative_distance(self):
        with pytest.raises(ValueError):
            tile_score(1.0, -0.1, P)

    @settings(max_examples=200)
    @given(st.floats(0, 3e5), st.floats(0, 1e4), st.floats(1e-3, 1e4),
           st.floats(1e-6, 1e3))
    def test_strictly_monotone(self, bg, r, lam, step):
        p = ScoringParams(lam=lam)
        assert tile_score(bg, r + step, p) < tile_score(bg, r, p)
        assert tile_score(bg + step, r, p) > tile_score(bg, r, p)


class TestBackgroundDistance:
    def test_values(self):
        assert bg_distance(np.zeros((32, 32), np.uint8)) == 0
        assert bg_distance(np.full((32, 32), 255, np.uint8)) == 261120
        t = np.zeros((32, 32), np.uint8)
        t[5, 7] = 100
        assert bg_distance(t) == 100

    def test_wrong_shape(self):
        with pytest.raises(ValueError):
            bg_distance(np.zeros((32, 16)))


class TestMatrices:
    def test_overlap_shapes(self):
        q = _query(np.full((4, 4), 1e5))
        img = TiledImage(0, np.zeros((4, 4, 2)), np.zeros((4, 4)))
        assert score_matrix_actual(q, img, Alignment(0, 1, 1), P).scores.shape == (3, 3)
        small = _query(np.full((2, 2), 1e5))
        img3 = TiledImage(0, np.zeros((3, 3, 2)), np.zeros((3, 3)))
        m = score_matrix_actual(small, img3, Alignment(0, -1, -1), P)
        assert m.scores.shape == (1, 1)
        assert m.origin == (Alignment(0, -1, -1), 1, 1)

    def test_perfect_copy(self):
        q = _query([[30000, 0], [5000, 90000]])
        img = TiledImage(0, q.features.copy(), q.bg.copy())
        m = score_matrix_actual(q, img, Alignment(0, 0, 0), P)
        np.testing.assert_array_equal(m.scores, q.bg - 23000)

    def test_no_overlap(self):
        q = _query(np.ones((2, 2)))
        img = TiledImage(0, np.zeros((3, 3, 2)), np.zeros((3, 3)))
        with pytest.raises(ValueError):
            score_matrix_actual(q, img, Alignment(0, 5, 0), P)

    def test_uniform(self):
        q = _query([[30000, 5]])
        np.testing.assert_array_equal(score_matrix_uniform(q, 0, P).scores, q.bg - 23000)
        assert score_matrix_uniform(_query([[30000]]), 1000, P).scores.tolist() == [[6000]]

    def test_threshold_matrix(self):
        q = _query([[30000, 25000]])
        assert tars_threshold_matrix(q, [10, 20], P).scores.tolist() == [[6990, 1980]]
        np.testing.assert_array_equal(tars_threshold_matrix(q, [0, 0], P).scores,
                                      q.bg - 23000)
        with pytest.raises(ValueError):
            tars_threshold_matrix(q, [1, 2, 3], P)


class TestBounds:
    def test_examples(self):
        assert safe_positive_sum([[5, -1], [-2, 3]]) == 8
        assert safe_positive_sum([[-4, -2], [-7, -1]]) == -1

    def test_modes(self):
        q = _query([[23005, 22999], [23000 - 2, 23003]])
        m = score_matrix_uniform(q, 0, P)
        assert upper_bound(m, BoundMode.SAFE_POSITIVE_SUM) == 8
        assert upper_bound(m, "paper") == 7

    def test_parse(self):
        assert BoundMode.parse("SafePositiveSum") is BoundMode.SAFE_POSITIVE_SUM
        assert BoundMode.parse("paper-dp") is BoundMode.PAPER_DP
        with pytest.raises(ValueError):
            BoundMode.parse("optimistic")

    @settings(max_examples=200, deadline=None)
    @given(arrays(np.float64, st.tuples(st.integers(1, 4), st.integers(1, 4)),
                  elements=st.floats(-50, 50, allow_nan=False)))
    def test_safe_sum_dominates_exact(self, m):
        assert safe_positive_sum(m) >= exact_mwcs(m)[1] - 1e-9
