"""Seeded benchmark setup for comparing the three search strategies.

Queries are crops taken from the interior of planted sprites, so every
query tile is textured.  Crops that include plain background give SPARS a
near-zero distance for every background tile in the database, which makes
its uniform bound useless; interior crops keep both pruning strategies honest.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .model import QueryImage, ScoringParams, TiledImage
from .pipeline import BuildConfig, SearchDatabase, build_database
from .scoring import BoundMode
from .search import SearchStats, compare_results, linear_search, spars, tars
from .synthetic import SyntheticSpec, generate

log = logging.getLogger(__name__)

QUERY_SIZES = ((2, 2), (2, 3), (3, 3), (3, 4), (4, 4))
# distances between reduced descriptors are O(1); this weight puts the
# distance term on the same scale as tile pixel sums (~1e5)
BENCH_LAMBDA = 30000.0


def benchmark_spec(seed: int = 1, images: int = 200, labels: int = 20) -> SyntheticSpec:
    return SyntheticSpec(seed=seed, images=images, labels=labels, compositions=0,
                         roi_tiles=[[4, 4], [4, 5], [5, 4]], rois_per_image=[1],
                         occlusions=[0.0, 0.25])


@dataclass
class Benchmark:
    db: SearchDatabase
    queries: list  # [(query_id, QueryImage)]
    params: ScoringParams


def crop_query(image: TiledImage, row: int, col: int, rows: int, cols: int) -> QueryImage:
    """Query made of an image's own tiles (features and pixel sums)."""
    if row < 0 or col < 0 or row + rows > image.rows or col + cols > image.cols:
        raise ValueError("crop falls outside the image")
    return QueryImage(image.features[row:row + rows, col:col + cols].copy(),
                      image.bg[row:row + rows, col:col + cols].copy())


def make_benchmark(spec: SyntheticSpec | None = None, n_queries: int = 20, query_seed: int = 5,
                   capacity: int = 64, lam: float = BENCH_LAMBDA, c: float = 23000.0,
                   sizes=QUERY_SIZES) -> Benchmark:
    spec = spec or benchmark_spec()
    corpus = generate(spec)
    db = build_database([(f"img_{im['image_id']:04d}", im["pixels"]) for im in corpus["images"]],
                        BuildConfig(capacity=capacity))
    rng = np.random.default_rng(query_seed)
    with_rois = [im for im in corpus["images"] if im["placements"]]
    queries = []
    for qi in range(n_queries):
        rec = with_rois[int(rng.integers(len(with_rois)))]
        r0, c0, ph, pw = rec["placements"][0]["bbox"]
        h, w = sizes[qi % len(sizes)]
        h, w = min(h, ph), min(w, pw)
        r = r0 + int(rng.integers(0, ph - h + 1))
        col = c0 + int(rng.integers(0, pw - w + 1))
        queries.append((f"b{qi:03d}", crop_query(db.images[rec["image_id"]], r, col, h, w)))
    return Benchmark(db, queries, ScoringParams(lam=lam, c=c))


def run_benchmark(bench: Benchmark, k: int = 10, modes=(BoundMode.SAFE_POSITIVE_SUM,)) -> dict:
    """Linear, TARS and SPARS on every benchmark query.

    Returns ``{"linear": {qid: (results, stats)}, (algo, mode): {qid: (results, stats)}}``.
    """
    db, params = bench.db, bench.params
    runs = {"linear": {}}
    for qid, q in bench.queries:
        stats = SearchStats()
        runs["linear"][qid] = (linear_search(q, db.images, k, params, db.index.metric, stats),
                               stats)
    for mode in modes:
        mode = BoundMode.parse(mode)
        for name, algo in (("tars", tars), ("spars", spars)):
            out = runs.setdefault((name, mode), {})
            for qid, q in bench.queries:
                stats = SearchStats()
                out[qid] = (algo(q, db.index, db.images, k, params, mode, stats), stats)
    return runs


def audit(runs: dict, mode=BoundMode.PAPER_DP, tol: float = 1e-9) -> dict:
    """Compare pruned searches under ``mode`` against linear search.

    Every rank whose score differs is logged with the reference alignment,
    both scores, and the bound at which the pruned search stopped.
    """
    mode = BoundMode.parse(mode)
    report = {"mode": mode.value, "queries": 0, "agreeing": 0, "disagreements": []}
    for name in ("tars", "spars"):
        for qid, (results, stats) in runs[(name, mode)].items():
            reference = runs["linear"][qid][0]
            cmp = compare_results(reference, results, tol)
            report["queries"] += 1
            report["agreeing"] += cmp["agree"]
            for rank, ref, got in cmp["mismatches"]:
                log.warning("%s/%s query %s rank %d: expected %s at %s, got %s (stopped at bound %s)",
                            name, mode.value, qid, rank + 1, ref and ref.score,
                            ref and tuple(ref.alignment), got, stats.final_bound)
                report["disagreements"].append({
                    "algorithm": name, "query_id": qid, "rank": rank + 1,
                    "alignment": list(ref.alignment) if ref else None,
                    "expected": ref.score if ref else None, "got": got,
                    "stop_bound": stats.final_bound})
    report["agreement_rate"] = report["agreeing"] / report["queries"] if report["queries"] else 1.0
    return report
