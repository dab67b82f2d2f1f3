"""Top-k region search: linear scan, TARS and SPARS.

All three strategies score an alignment the same way (actual score matrix,
then the four-corner DP) and keep the k best in a :class:`ResultQueue`.
TARS walks one nearest-neighbour stream per query tile and stops once a
threshold built from the current stream distances drops below the k-th
best score. SPARS walks the index once, best-first, bounding every pending
node or deferred (tile, query tile) pairing with a uniform-distance virtual
score matrix.
"""

from __future__ import annotations

import heapq
import itertools
import math
import time
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from .distance import distances
from .index import NnCursor, TileIndex, image_grid_lookup, mindist
from .model import (Alignment, QueryImage, RankedMatch, ScoringParams, TiledImage, TileRef,
                    overlap, rank_key)
from .mwcs import dp_max_region
from .scoring import (BoundMode, safe_positive_sum, score_matrix_actual,
                      score_matrix_uniform, tars_threshold_matrix, upper_bound)

Catalog = Mapping[int, TiledImage]


@dataclass
class SearchStats:
    """Counters filled in by a single query execution."""

    algorithm: str = ""
    dp_evaluations: int = 0
    cursor_pops: int = 0
    bq_pops: int = 0
    # index entries read out of popped leaf nodes (SPARS)
    leaf_entries: int = 0
    distance_evals: int = 0
    rounds: int = 0
    wall_time: float = 0.0
    dp_time: float = 0.0
    thresholds: list = field(default_factory=list)
    popped_bounds: list = field(default_factory=list)
    # (alignment, dp score, bound of the entity that produced it)
    evaluations: list = field(default_factory=list)
    final_bound: float = math.inf

    @property
    def nn_time(self) -> float:
        if self.algorithm == "linear":
            return 0.0
        return max(self.wall_time - self.dp_time, 0.0)

    @property
    def nn_ops(self) -> int:
        """Node expansions plus index entry retrievals."""
        return self.cursor_pops + self.bq_pops + self.leaf_entries


class ResultQueue:
    """Bounded top-k queue; the head is the current worst member.

    Below capacity every entry is accepted. At capacity an entry replaces the
    head when its score is higher, or equal and earlier in the global result
    order, so the retained set does not depend on arrival order.
    """

    def __init__(self, k: int):
        if k < 1:
            raise ValueError("k must be at least 1")
        self.k = k
        self._heap: list = []

    @staticmethod
    def _key(m: RankedMatch):
        a = m.alignment
        return (m.score, (-a.image_id, -a.drow, -a.dcol))

    def __len__(self) -> int:
        return len(self._heap)

    @property
    def full(self) -> bool:
        return len(self._heap) >= self.k

    @property
    def head(self) -> Optional[RankedMatch]:
        return self._heap[0][2] if self._heap else None

    @property
    def head_score(self) -> float:
        """Score to beat: the head's score once full, otherwise -inf."""
        return self._heap[0][2].score if self.full else -math.inf

    def insert(self, m: RankedMatch) -> bool:
        item = (*self._key(m), m)
        if not self.full:
            heapq.heappush(self._heap, item)
            return True
        if item[:2] > self._heap[0][:2]:
            heapq.heapreplace(self._heap, item)
            return True
        return False

    def results(self) -> list[RankedMatch]:
        return sorted((it[2] for it in self._heap), key=rank_key)


def rq_insert(rq: ResultQueue, m: RankedMatch) -> ResultQueue:
    rq.insert(m)
    return rq


def enumerate_alignments(query: QueryImage, image: TiledImage) -> list[Alignment]:
    return [Alignment(image.image_id, dr, dc)
            for dr in range(-(query.rows - 1), image.rows)
            for dc in range(-(query.cols - 1), image.cols)]


def align_from_pair(q_pos: tuple[int, int], tile: TileRef) -> Alignment:
    return Alignment(tile.image_id, tile.row - q_pos[0], tile.col - q_pos[1])


def evaluate_alignment(query: QueryImage, image: TiledImage, alignment: Alignment,
                       params: ScoringParams, metric: str = "l2",
                       stats: Optional[SearchStats] = None, bound: float = math.inf
                       ) -> RankedMatch:
    t0 = time.perf_counter()
    sm = score_matrix_actual(query, image, alignment, params, metric)
    region, _ = dp_max_region(sm.scores)
    match = RankedMatch(alignment, region)
    if stats is not None:
        stats.dp_time += time.perf_counter() - t0
        stats.dp_evaluations += 1
        stats.evaluations.append((alignment, match.score, bound))
    return match


def linear_search(query: QueryImage, db: Catalog, k: int = 10,
                  params: ScoringParams = ScoringParams(), metric: str = "l2",
                  stats: Optional[SearchStats] = None) -> list[RankedMatch]:
    stats = stats if stats is not None else SearchStats()
    stats.algorithm = "linear"
    t0 = time.perf_counter()
    rq = ResultQueue(k)
    for image_id in sorted(db):
        image = db[image_id]
        for a in enumerate_alignments(query, image):
            rq.insert(evaluate_alignment(query, image, a, params, metric, stats))
    stats.wall_time = time.perf_counter() - t0
    return rq.results()


def _query_points(query: QueryImage):
    pts = query.features.reshape(query.n, -1)
    positions = [divmod(i, query.cols) for i in range(query.n)]
    return pts, positions


def _check_index(query: QueryImage, index: TileIndex):
    if query.features.shape[2] != index.dim:
        raise ValueError(f"query features have dimension {query.features.shape[2]}, "
                         f"index has {index.dim}")


def tars(query: QueryImage, index: TileIndex, db: Catalog, k: int = 10,
         params: ScoringParams = ScoringParams(), mode=BoundMode.PAPER_DP,
         stats: Optional[SearchStats] = None) -> list[RankedMatch]:
    """Threshold-style search over one sorted NN stream per query tile."""
    mode = BoundMode.parse(mode)
    _check_index(query, index)
    stats = stats if stats is not None else SearchStats()
    stats.algorithm = "tars"
    t0 = time.perf_counter()
    pts, positions = _query_points(query)
    cursors = [NnCursor(index, p) for p in pts]
    rq = ResultQueue(k)
    explored: set = set()
    threshold = math.inf

    while threshold >= rq.head_score:
        fetched = [c.next() for c in cursors]
        if any(f is None for f in fetched):
            # every stream holds the same entries, so they run dry together
            break
        stats.rounds += 1
        for i, (_, eid) in enumerate(fetched):
            a = align_from_pair(positions[i], index.refs[eid])
            if a in explored:
                continue
            image, _ = image_grid_lookup(index.refs[eid], db)
            explored.add(a)
            rq.insert(evaluate_alignment(query, image, a, params, index.metric, stats,
                                         bound=threshold))
        sm = tars_threshold_matrix(query, [f[0] for f in fetched], params)
        threshold = upper_bound(sm, mode)
        stats.thresholds.append(threshold)

    stats.cursor_pops = sum(c.pops for c in cursors)
    stats.distance_evals = sum(c.distance_evals for c in cursors)
    stats.final_bound = threshold
    stats.wall_time = time.perf_counter() - t0
    return rq.results()


def get_max_sub_rg(eid: int, q_idx: int, query: QueryImage, index: TileIndex, db: Catalog,
                   params: ScoringParams, explored: set,
                   stats: Optional[SearchStats] = None, bound: float = math.inf
                   ) -> Optional[RankedMatch]:
    """Explore the alignment pairing query tile ``q_idx`` with index entry ``eid``.

    Returns None when that alignment was already explored in this query.
    """
    tile = index.refs[eid]
    image, _ = image_grid_lookup(tile, db)
    a = align_from_pair(divmod(q_idx, query.cols), tile)
    if a in explored:
        return None
    explored.add(a)
    return evaluate_alignment(query, image, a, params, index.metric, stats, bound)


_NODE, _DEFERRED = 0, 1


def spars(query: QueryImage, index: TileIndex, db: Catalog, k: int = 10,
          params: ScoringParams = ScoringParams(), mode=BoundMode.PAPER_DP,
          stats: Optional[SearchStats] = None) -> list[RankedMatch]:
    """Single best-first pass over the index tree."""
    mode = BoundMode.parse(mode)
    _check_index(query, index)
    stats = stats if stats is not None else SearchStats()
    stats.algorithm = "spars"
    t0 = time.perf_counter()
    pts, _ = _query_points(query)
    metric = index.metric
    rq = ResultQueue(k)
    explored: set = set()
    seq = itertools.count()

    def bound_at(d: float) -> float:
        return upper_bound(score_matrix_uniform(query, d, params), mode)

    # entries: (-key, seq, kind, payload, exact)
    # Paper-mode bounds are evaluated lazily: an entity first goes in keyed by
    # the cheaper positive-sum bound (never below the DP bound) and is re-keyed
    # with its DP bound when it reaches the top.
    def push(kind, payload, d, cap):
        if mode is BoundMode.SAFE_POSITIVE_SUM:
            key, exact = min(bound_at(d), cap), True
        else:
            key, exact = min(safe_positive_sum(score_matrix_uniform(query, d, params).scores),
                             cap), False
        heapq.heappush(bq, (-key, next(seq), kind, payload, exact, d, cap))

    bq = [(-math.inf, next(seq), _NODE, index.root, True, 0.0, math.inf)]
    while bq:
        negkey, _, kind, payload, exact, d, cap = bq[0]
        bound = -negkey
        if bound < rq.head_score:
            break
        heapq.heappop(bq)
        if not exact:
            heapq.heappush(bq, (-min(bound_at(d), cap), next(seq), kind, payload, True, d, cap))
            continue
        stats.bq_pops += 1
        stats.popped_bounds.append(bound)

        if kind == _NODE:
            node = payload
            if node.leaf:
                stats.leaf_entries += len(node.children)
                for eid in node.children:
                    ds = distances(pts, index.points[eid], metric)
                    stats.distance_evals += len(pts)
                    j = int(np.argmin(ds))
                    m = get_max_sub_rg(eid, j, query, index, db, params, explored, stats, bound)
                    if m is not None:
                        rq.insert(m)
                    for i in range(len(pts)):
                        if i != j:
                            push(_DEFERRED, (eid, i), float(ds[i]), bound)
            else:
                dmin = mindist(pts[:, None, :], node.child_lo[None], node.child_hi[None],
                               metric).min(axis=0)
                for child, d_child in zip(node.children, dmin.tolist()):
                    push(_NODE, child, d_child, bound)
        else:
            eid, i = payload
            m = get_max_sub_rg(eid, i, query, index, db, params, explored, stats, bound)
            if m is not None:
                rq.insert(m)

    stats.final_bound = -bq[0][0] if bq else -math.inf
    stats.wall_time = time.perf_counter() - t0
    return rq.results()


def all_alignment_count(query: QueryImage, db: Catalog) -> int:
    return sum((query.rows + im.rows - 1) * (query.cols + im.cols - 1) for im in db.values())


def compare_results(reference: list[RankedMatch], results: list[RankedMatch],
                    tol: float = 1e-9) -> dict:
    """Score-list agreement between two top-k answers.

    ``mismatches`` lists ``(rank, reference match, other score)`` for every
    rank whose scores differ by more than ``tol`` (relative to magnitude).
    """
    mismatches = []
    for rank in range(max(len(reference), len(results))):
        ref = reference[rank] if rank < len(reference) else None
        got = results[rank].score if rank < len(results) else None
        if ref is None or got is None or not math.isclose(ref.score, got, rel_tol=tol,
                                                          abs_tol=tol):
            mismatches.append((rank, ref, got))
    return {"agree": not mismatches, "mismatches": mismatches}


__all__ = [
    "SearchStats", "ResultQueue", "rq_insert", "enumerate_alignments", "align_from_pair",
    "evaluate_alignment", "linear_search", "tars", "spars", "get_max_sub_rg",
    "all_alignment_count", "compare_results", "overlap",
]
