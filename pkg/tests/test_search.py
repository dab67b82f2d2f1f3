import math

import numpy as np
import pytest

from regionsearch.index import str_bulk_load
from regionsearch.model import (Alignment, QueryImage, RankedMatch, Region, ScoringParams,
                                TiledImage, TileRef)
from regionsearch.mwcs import dp_max_region
from regionsearch.scoring import BoundMode
from regionsearch.search import (ResultQueue, SearchStats, align_from_pair, all_alignment_count,
                                 compare_results, enumerate_alignments, get_max_sub_rg,
                                 linear_search, spars, tars)

P = ScoringParams()


def _match(score, image_id=0, drow=0, dcol=0):
    return RankedMatch(Alignment(image_id, drow, dcol), Region(frozenset({(0, 0)}), score))


def _catalog_index(images, capacity=8):
    pts, refs = [], []
    for im in images.values():
        for r in range(im.rows):
            for c in range(im.cols):
                pts.append(im.features[r, c])
                refs.append(TileRef(im.image_id, r, c))
    return str_bulk_load((np.array(pts), refs), capacity)


def _random_db(n_images=6, shape=(3, 4), dim=3, seed=0):
    rng = np.random.default_rng(seed)
    images = {}
    for i in range(n_images):
        feats = rng.integers(0, 4, size=(*shape, dim)).astype(float)
        bg = rng.choice([0.0, 20000.0, 30000.0, 60000.0], size=shape)
        images[i] = TiledImage(i, feats, bg, f"img{i}")
    return images


def _scores(results):
    return [m.score for m in results]


class TestResultQueue:
    def test_capacity_semantics(self):
        rq = ResultQueue(3)
        assert rq.head_score == -math.inf
        rq.insert(_match(3))
        assert len(rq) == 1
        for s in (5, 9):
            rq.insert(_match(s, drow=s))
        rq.insert(_match(4, drow=4))
        assert sorted(_scores(rq.results())) == [4, 5, 9]
        assert not rq.insert(_match(2, drow=2))
        assert rq.head_score == 4

    def test_ties_do_not_depend_on_order(self):
        ms = [_match(1.0, image_id=i) for i in range(5)]
        kept = []
        for perm in ([0, 1, 2, 3, 4], [4, 3, 2, 1, 0], [2, 4, 0, 3, 1]):
            rq = ResultQueue(2)
            for i in perm:
                rq.insert(ms[i])
            kept.append([m.alignment.image_id for m in rq.results()])
        assert kept == [[0, 1]] * 3

    def test_bad_k(self):
        with pytest.raises(ValueError):
            ResultQueue(0)


class TestAlignments:
    def test_counts(self):
        def img(r, c):
            return TiledImage(0, np.zeros((r, c, 1)), np.zeros((r, c)))

        def q(r, c):
            return QueryImage(np.zeros((r, c, 1)), np.zeros((r, c)))

        assert len(enumerate_alignments(q(4, 4), img(4, 4))) == 49
        assert len(enumerate_alignments(q(1, 1), img(3, 5))) == 15
        aligns = enumerate_alignments(q(2, 2), img(3, 3))
        assert len(aligns) == len(set(aligns)) == 16
        for a in aligns:
            assert any(0 <= i + a.drow < 3 and 0 <= j + a.dcol < 3
                       for i in range(2) for j in range(2))

    def test_pair_offset(self):
        assert align_from_pair((0, 0), TileRef(1, 0, 0)) == (1, 0, 0)
        assert align_from_pair((1, 2), TileRef(1, 3, 2)) == (1, 2, 0)


class TestLinear:
    def test_exact_copy_ranks_first(self):
        db = _random_db()
        q = QueryImage.from_image(db[3])
        top = linear_search(q, db, k=1, params=P)[0]
        assert top.alignment == (3, 0, 0)
        assert top.score == dp_max_region(db[3].bg - P.c)[1]

    def test_small_k_returns_everything(self):
        db = _random_db(n_images=1, shape=(2, 2))
        q = QueryImage.from_image(db[0])
        out = linear_search(q, db, k=100, params=P)
        assert len(out) == 9 == all_alignment_count(q, db)
        assert _scores(out) == sorted(_scores(out), reverse=True)

    def test_empty_database(self):
        q = QueryImage(np.zeros((1, 1, 2)), np.zeros((1, 1)))
        assert linear_search(q, {}, k=3) == []


@pytest.mark.parametrize("mode", list(BoundMode))
class TestPruningSearches:
    def test_agree_with_linear(self, mode):
        db = _random_db(n_images=8, seed=1)
        index = _catalog_index(db)
        rng = np.random.default_rng(2)
        for _ in range(5):
            src = db[int(rng.integers(8))]
            r, c = int(rng.integers(2)), int(rng.integers(2))
            q = QueryImage(src.features[r:r + 2, c:c + 3].copy(), src.bg[r:r + 2, c:c + 3].copy())
            ref = linear_search(q, db, 5, P)
            for algo in (tars, spars):
                out = algo(q, index, db, 5, P, mode)
                if mode is BoundMode.SAFE_POSITIVE_SUM:
                    assert compare_results(ref, out)["agree"]
                else:
                    assert len(out) == len(ref)

    def test_perfect_copy_top1(self, mode):
        db = _random_db(n_images=5, seed=3)
        index = _catalog_index(db)
        q = QueryImage.from_image(db[2])
        ref = linear_search(q, db, 1, P)[0]
        for algo in (tars, spars):
            stats = SearchStats()
            got = algo(q, index, db, 1, P, mode, stats)[0]
            assert got.score == ref.score
            assert stats.dp_evaluations < all_alignment_count(q, db)


def test_tars_stops_early_on_perfect_match():
    db = _random_db(n_images=10, shape=(4, 4), seed=4)
    index = _catalog_index(db)
    q = QueryImage.from_image(db[5])
    stats = SearchStats()
    # distances only lower the threshold once they outweigh pixel sums
    heavy = ScoringParams(lam=1e5)
    top = tars(q, index, db, 1, heavy, BoundMode.SAFE_POSITIVE_SUM, stats)[0]
    assert top.alignment == (5, 0, 0)
    assert stats.rounds < len(index) // 4
    assert all(b >= a for a, b in zip(stats.thresholds[1:], stats.thresholds))


def test_spars_popped_bounds_non_increasing():
    db = _random_db(n_images=10, seed=5)
    index = _catalog_index(db, capacity=4)
    q = QueryImage(db[1].features[:2, :2].copy(), db[1].bg[:2, :2].copy())
    for mode in BoundMode:
        stats = SearchStats()
        spars(q, index, db, 3, P, mode, stats)
        b = stats.popped_bounds
        assert all(y <= x for x, y in zip(b, b[1:]))


def test_explored_alignments_are_not_repeated():
    db = _random_db(n_images=2, shape=(3, 3), seed=6)
    index = _catalog_index(db)
    q = QueryImage.from_image(db[0])
    explored = set()
    eid = next(i for i, ref in enumerate(index.refs) if ref == (0, 1, 1))
    first = get_max_sub_rg(eid, 4, q, index, db, P, explored)
    assert first is not None and first.alignment == (0, 0, 0)
    assert first.score == dp_max_region(db[0].bg - P.c)[1]
    assert get_max_sub_rg(eid, 4, q, index, db, P, explored) is None
    # a different pairing that induces the same offset
    eid2 = next(i for i, ref in enumerate(index.refs) if ref == (0, 0, 0))
    assert get_max_sub_rg(eid2, 0, q, index, db, P, explored) is None


def test_dimension_mismatch():
    db = _random_db(n_images=2)
    index = _catalog_index(db)
    with pytest.raises(ValueError):
        tars(QueryImage(np.zeros((1, 1, 5)), np.zeros((1, 1))), index, db)


def test_compare_results_reports_mismatch():
    ref = [_match(5.0), _match(4.0, drow=1)]
    assert compare_results(ref, [_match(5.0), _match(4.0, dcol=3)])["agree"]
    report = compare_results(ref, [_match(5.0)])
    assert not report["agree"] and report["mismatches"][0][0] == 1


@pytest.mark.parametrize("algo", [tars, spars])
def test_each_alignment_evaluated_once(algo):
    db = _random_db(n_images=6, seed=7)
    index = _catalog_index(db, capacity=4)
    q = QueryImage(db[2].features[1:, :2].copy(), db[2].bg[1:, :2].copy())
    stats = SearchStats()
    algo(q, index, db, 4, P, BoundMode.SAFE_POSITIVE_SUM, stats)
    seen = [a for a, _, _ in stats.evaluations]
    assert len(seen) == len(set(seen)) == stats.dp_evaluations <= all_alignment_count(q, db)
