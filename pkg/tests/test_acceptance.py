"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The lines are also collected and repeated in the pytest terminal summary.
"""

import json
import math
import time

import numpy as np
import pytest
from scipy.spatial.distance import pdist

from conftest import UNCAPTURABLE, published
from regionsearch.benchmark import QUERY_SIZES, audit, run_benchmark
from regionsearch.cli import main
from regionsearch.distance import distances
from regionsearch.features import pca_fit, pca_project, pca_reconstruct
from regionsearch.index import NnCursor, mindist, str_bulk_load
from regionsearch.model import ScoringParams, TileRef
from regionsearch.mwcs import (Corner, TrstInstance, dp_corner_run, dp_max_region, exact_mwcs,
                               is_dp_capturable, trst_to_mwcs)
from regionsearch.oracles import steiner_length
from regionsearch.scoring import BoundMode, safe_positive_sum, tile_score
import dp_oracle

LINES = []


def report(n: int, ok: bool, detail: str):
    line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'} - {detail}"
    LINES.append(line)
    print(line)
    assert ok, line


def test_c01_dp_soundness():
    rng = np.random.default_rng(1)
    sizes = [(r, c) for r in range(2, 5) for c in range(2, 5)]
    t0 = time.perf_counter()
    violations = 0
    for t in range(1000):
        m = rng.integers(-10, 11, size=sizes[t % len(sizes)]).astype(float)
        violations += dp_max_region(m)[1] > exact_mwcs(m)[1]
    elapsed = time.perf_counter() - t0
    report(1, violations == 0 and elapsed < 60,
           f"{violations} violations over 1000 matrices in {elapsed:.1f}s")


def test_c02_pinned_instance():
    ex_region, ex = exact_mwcs(UNCAPTURABLE)
    bl_region, bl = dp_corner_run(UNCAPTURABLE, Corner.BOTTOM_LEFT)
    _, four = dp_max_region(UNCAPTURABLE)
    oracle_score, _ = dp_oracle.four_corner(UNCAPTURABLE)
    ok = (ex == 96 and ex_region.cells == published((3, 3), (2, 2), (2, 3), (2, 4), (1, 3))
          and bl == 61 and bl_region.cells == published((1, 3), (2, 2), (2, 3), (3, 3))
          and 61 <= four <= 96 and four == oracle_score == 95)
    report(2, ok, f"exact={ex:g} bottom-left={bl:g} four-corner={four:g} "
                  f"independent recurrence={oracle_score:g}")


def test_c03_shape_class():
    rects = [{(i, j) for i in range(h) for j in range(w)}
             for h in range(1, 5) for w in range(1, 5)]
    plus = {(1, 1), (0, 1), (2, 1), (1, 0), (1, 2)}
    cross = {(1, 1), (0, 0), (0, 2), (2, 0), (2, 2)}
    ok = all(map(is_dp_capturable, rects)) and not is_dp_capturable(plus) \
        and not is_dp_capturable(cross)
    report(3, ok, f"{len(rects)} rectangles capturable, plus and x rejected")


@pytest.fixture(scope="module")
def bench_runs(bench):
    t0 = time.perf_counter()
    runs = run_benchmark(bench, k=10, modes=(BoundMode.SAFE_POSITIVE_SUM, BoundMode.PAPER_DP))
    return runs, time.perf_counter() - t0


def test_c04_safe_mode_agreement(bench, bench_runs):
    runs, elapsed = bench_runs
    safe = audit(runs, BoundMode.SAFE_POSITIVE_SUM, tol=1e-9)
    sizes = sorted({q.n for _, q in bench.queries})
    ok = (len(bench.db.images) == 200 and len(bench.queries) == 20 and sizes[0] >= 4
          and sizes[-1] <= 16 and safe["agreeing"] == safe["queries"] == 40 and elapsed < 600)
    report(4, ok, f"{safe['agreeing']}/{safe['queries']} top-10 score lists identical to linear "
                  f"(query sizes {sizes}), {elapsed:.0f}s")


def test_c05_paper_mode_audit(bench_runs, tmp_path_factory):
    runs, _ = bench_runs
    rep = audit(runs, BoundMode.PAPER_DP)
    path = tmp_path_factory.mktemp("audit") / "paper_mode_audit.json"
    path.write_text(json.dumps(rep, indent=1))
    for d in rep["disagreements"]:
        print("  disagreement:", d)
    ok = rep["queries"] == 40 and path.exists() and \
        len(rep["disagreements"]) >= rep["queries"] - rep["agreeing"]
    report(5, ok, f"paper-mode agreement {rep['agreeing']}/{rep['queries']} "
                  f"({rep['agreement_rate']:.0%}), {len(rep['disagreements'])} logged rank "
                  f"mismatches")


def test_c06_pruning_and_crossover(bench, bench_runs):
    runs, _ = bench_runs
    safe = BoundMode.SAFE_POSITIVE_SUM
    lin = {q: s.dp_evaluations for q, (_, s) in runs["linear"].items()}
    frac = {}
    for name in ("tars", "spars"):
        evals = {q: s.dp_evaluations for q, (_, s) in runs[(name, safe)].items()}
        frac[name] = np.mean([evals[q] < lin[q] for q in lin])
    size_of = {qid: q.n for qid, q in bench.queries}
    smallest = min(h * w for h, w in QUERY_SIZES)
    largest = max(h * w for h, w in QUERY_SIZES)

    def mean_ops(name, n):
        return np.mean([s.nn_ops for q, (_, s) in runs[(name, safe)].items() if size_of[q] == n])

    small = mean_ops("tars", smallest), mean_ops("spars", smallest)
    large = mean_ops("tars", largest), mean_ops("spars", largest)
    ok = frac["tars"] >= 0.9 and frac["spars"] >= 0.9 and small[0] < small[1] \
        and large[1] < large[0]
    report(6, ok, f"pruned on tars {frac['tars']:.0%} / spars {frac['spars']:.0%} of queries; "
                  f"mean NN ops tars/spars n={smallest}: {small[0]:.0f}/{small[1]:.0f}, "
                  f"n={largest}: {large[0]:.0f}/{large[1]:.0f}")


def test_c07_index_correctness():
    rng = np.random.default_rng(7)
    pts = rng.normal(size=(500, 6))
    refs = [TileRef(i // 25, i % 25, 0) for i in range(500)]
    index = str_bulk_load((pts, refs), capacity=16)
    order_bad = 0
    for _ in range(100):
        q = rng.normal(size=6)
        d = distances(q, pts)
        expected = sorted(range(500), key=lambda i: (d[i], refs[i]))
        order_bad += [e for _, e in NnCursor(index, q)] != expected
    bound_bad = 0
    for _ in range(10_000):
        box = rng.normal(size=(2, 6))
        lo, hi = box.min(0), box.max(0)
        q = rng.normal(size=6) * 2
        p = rng.uniform(lo, hi)
        bound_bad += mindist(q, lo, hi) > distances(q, p) + 1e-12
    report(7, order_bad == 0 and bound_bad == 0,
           f"{order_bad} cursor-order and {bound_bad} mindist violations")


def test_c08_steiner_reduction():
    rng = np.random.default_rng(8)
    grid = [(x, y) for x in range(3) for y in range(3)]
    bad = 0
    for t in range(50):
        n = 2 + t % 2
        terms = frozenset(grid[i] for i in rng.choice(9, size=n, replace=False))
        inst = TrstInstance(3, terms, w=100)
        _, weight = exact_mwcs(trst_to_mwcs(inst), cell_cap=25)
        bad += weight != n * 100 - steiner_length(terms, 3)
    report(8, bad == 0, f"{bad} violations over 50 instances")


def test_c09_dp_runtime_scaling():
    sides = [8, 16, 24, 32, 48, 64]
    cells, times = [], []
    rng = np.random.default_rng(9)
    for s in sides:
        # all-positive grids are the worst case: every region grows to the full matrix
        m = rng.integers(1, 10, size=(s, s)).astype(float)
        reps = 3 if s <= 32 else 1
        best = math.inf
        for _ in range(reps):
            t0 = time.perf_counter()
            dp_max_region(m)
            best = min(best, time.perf_counter() - t0)
        cells.append(s * s)
        times.append(best)
    slope = np.polyfit(np.log(cells), np.log(times), 1)[0]
    report(9, 1.6 <= slope <= 2.4, f"log-log slope {slope:.2f} over {sides[0]}^2..{sides[-1]}^2")


def test_c10_quality(tmp_path):
    corpus = tmp_path / "corpus"
    assert main(["gen-synthetic", "--seed", "0", "--out", str(corpus)]) == 0
    assert main(["build-index", str(corpus / "images"), "--out", str(tmp_path / "db.idx"),
                 "--lambda", "1", "--c", "23000"]) == 0
    res = tmp_path / "res.jsonl"
    assert main(["query", "--index", str(tmp_path / "db.idx"), "--query", str(corpus / "queries"),
                 "--k", "5", "--out", str(res)]) == 0
    from regionsearch.evaluate import precision_at_k
    truth = json.loads((corpus / "ground_truth.json").read_text())
    records = [json.loads(line) for line in res.read_text().splitlines()]
    prec = precision_at_k(records, truth, 5)
    results = [r for r in records if r["type"] == "result"]
    labels = {q["query_id"]: q["labels"] for q in truth["queries"]}
    placements = {im["path"].split("/")[-1]: im["placements"] for im in truth["images"]}

    def touched(rec):
        tiles = {tuple(t) for t in rec["image_tiles"]}
        return [p for p in placements[rec["image_path"]]
                if tiles & {tuple(t) for t in p["tiles"]}]

    comp_id = next(q for q, ls in labels.items() if len(ls) > 1)
    composition = any({p["label"] for p in touched(r)} >= set(labels[comp_id])
                      for r in results if r["query_id"] == comp_id)
    no_background = True
    for r in results:
        if r["query_id"] == comp_id:
            continue  # its regions must bridge the gap between the two sprites
        cover = set()
        for p in placements[r["image_path"]]:
            cover |= {tuple(t) for t in p["tiles"] + p["occluded_tiles"]}
        no_background &= {tuple(t) for t in r["image_tiles"]} <= cover
    occluded = any(p["occlusion"] > 0 and p["label"] in labels[r["query_id"]]
                   for r in results for p in touched(r))
    n_queries = len(prec["per_query"])
    ok = n_queries == 10 and prec["precision"] >= 0.8 and composition and no_background \
        and occluded
    report(10, ok, f"top-5 precision {prec['precision']:.3f} over {n_queries} queries; "
                   f"composition={composition} background-free={no_background} "
                   f"occluded-hit={occluded}")


def test_c11_scoring_properties():
    rng = np.random.default_rng(11)
    mono_bad = 0
    for _ in range(10_000):
        bg, r = rng.uniform(0, 3e5), rng.uniform(0, 1e3)
        p = ScoringParams(lam=rng.uniform(1e-3, 1e4), c=rng.uniform(0, 5e4))
        step = rng.uniform(1e-3, 1e3)
        mono_bad += not tile_score(bg, r + step, p) < tile_score(bg, r, p)
        mono_bad += not tile_score(bg + step, r, p) > tile_score(bg, r, p)
    dom_bad = 0
    for _ in range(1000):
        shape = (int(rng.integers(1, 5)), int(rng.integers(1, 5)))
        m = rng.uniform(-20, 20, size=shape)
        dom_bad += safe_positive_sum(m) < exact_mwcs(m)[1] - 1e-9
    report(11, mono_bad == 0 and dom_bad == 0,
           f"{mono_bad} monotonicity and {dom_bad} dominance violations")


def test_c12_pca_identity():
    worst_rel = 0.0
    for seed in range(3):
        rng = np.random.default_rng(100 + seed)
        x = rng.normal(size=(500, 12)) @ rng.normal(size=(12, 12)) + rng.normal(size=12)
        model = pca_fit(x, 4)
        err = np.mean(np.sum((x - pca_reconstruct(model, pca_project(model, x))) ** 2, axis=1))
        discarded = model.total_variance - model.eigenvalues.sum()
        worst_rel = max(worst_rel, abs(err - discarded) / discarded)
    x = np.random.default_rng(200).normal(size=(80, 9))
    full = pca_fit(x, 9)
    iso = np.max(np.abs(pdist(pca_project(full, x)) - pdist(x)) / pdist(x))
    report(12, worst_rel <= 1e-6 and iso <= 1e-6,
           f"worst relative reconstruction gap {worst_rel:.1e}, isometry gap {iso:.1e}")
