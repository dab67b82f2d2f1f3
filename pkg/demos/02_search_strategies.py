"""Linear scan versus the two index-driven searches.

Builds a seeded synthetic database, crops queries from planted regions and
reports how many alignments each strategy scores and how much index work it
does.  With the safe bound all three return the same top-k scores.
"""

from regionsearch.benchmark import benchmark_spec, make_benchmark, run_benchmark
from regionsearch.scoring import BoundMode

bench = make_benchmark(benchmark_spec(images=60), n_queries=10)
runs = run_benchmark(bench, k=10, modes=(BoundMode.SAFE_POSITIVE_SUM,))
safe = BoundMode.SAFE_POSITIVE_SUM

print(f"{'query':<6}{'tiles':>6}{'linear':>8}{'tars':>7}{'spars':>7}"
      f"{'tars nn':>9}{'spars nn':>10}  agree")
for qid, q in bench.queries:
    lin_res, lin = runs["linear"][qid]
    t_res, t = runs[("tars", safe)][qid]
    s_res, s = runs[("spars", safe)][qid]
    same = [m.score for m in lin_res] == [m.score for m in t_res] == [m.score for m in s_res]
    print(f"{qid:<6}{q.n:>6}{lin.dp_evaluations:>8}{t.dp_evaluations:>7}{s.dp_evaluations:>7}"
          f"{t.nn_ops:>9}{s.nn_ops:>10}  {same}")
