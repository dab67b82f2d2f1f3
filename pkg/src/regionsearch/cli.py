"""Command-line entry point: ``regionsearch <command> ...``.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 oracle violation.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import indexfile
from .evaluate import GroundTruthError, precision_at_k
from .features import energy_retained
from .index import IntegrityError
from .mwcs import (CORNERS, Corner, TrstInstance, dp_corner_run, dp_max_region, exact_mwcs,
                   is_dp_capturable, trst_to_mwcs)
from .oracles import steiner_length
from .pgm import PgmError, read_pgm
from .pipeline import BuildConfig, build_database
from .scoring import BoundMode
from .search import SearchStats, all_alignment_count, linear_search, spars, tars
from .synthetic import SyntheticSpec, SyntheticSpecError, write_corpus

log = logging.getLogger("regionsearch")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_ORACLE = 0, 1, 2, 3
ALGORITHMS = ("linear", "tars", "spars")
TIMING_FIELDS = ("wall_time", "dp_time", "nn_time")

# the uncapturable example: optimum 96, bottom-left run 61
UNCAPTURABLE_EXAMPLE = np.array([[-1, -1, 10, -1],
                                 [-1, 10, 1, 35],
                                 [-1, -1, 40, -90]], dtype=np.float64)


class ConfigError(Exception):
    pass


class DataError(Exception):
    pass


def _load_config(path):
    if not path:
        return {}
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None


def _pick(args, cfg: dict, name: str, key: str, default):
    """Command-line flag, then config file, then built-in default."""
    value = getattr(args, name, None)
    if value is not None:
        return value
    return cfg.get(key, default)


def _build_config(args, cfg: dict) -> BuildConfig:
    d = BuildConfig()
    try:
        return BuildConfig(tile_size=int(_pick(args, cfg, "tile_size", "tile_size", d.tile_size)),
                           dim=int(_pick(args, cfg, "dim", "dim", d.dim)),
                           capacity=int(_pick(args, cfg, "capacity", "capacity", d.capacity)),
                           metric=str(_pick(args, cfg, "metric", "metric", d.metric)).lower(),
                           lam=float(_pick(args, cfg, "lam", "lambda", d.lam)),
                           c=float(_pick(args, cfg, "c", "c", d.c)))
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def _pgm_files(path) -> list[Path]:
    path = Path(path)
    if path.is_dir():
        return sorted(p for p in path.iterdir() if p.suffix.lower() in (".pgm", ".pnm"))
    return [path]


def _open_out(path):
    if not path or path == "-":
        return sys.stdout, False
    return open(path, "w", newline=""), True


# ---------------------------------------------------------------- build-index

def cmd_build_index(args) -> int:
    cfg_file = _load_config(args.config)
    cfg = _build_config(args, cfg_file)
    files = _pgm_files(args.image_dir)
    if not files:
        raise DataError(f"no PGM images in {args.image_dir}")
    images, skipped = [], 0
    for f in files:
        try:
            images.append((f.name, read_pgm(f)))
        except (OSError, PgmError) as exc:
            log.warning("skipping %s: %s", f, exc)
            skipped += 1
    if not images:
        raise DataError("no readable images")
    try:
        db = build_database(images, cfg)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    out = args.out or args.index
    if not out:
        raise ConfigError("build-index needs --out (or --index) for the index file")
    indexfile.save(db, out)
    print(f"tiles: {db.stats['tiles']}")
    print(f"images: {db.stats['images']} (skipped {skipped})")
    print(f"energy_retained: {db.stats['energy_retained']:.6f}")
    print(f"tree_depth: {db.stats['depth']}")
    return EXIT_OK


# ---------------------------------------------------------------------- query

def _load_index(path):
    if not path:
        raise ConfigError("--index is required")
    try:
        return indexfile.load(path)
    except OSError as exc:
        raise DataError(f"cannot read index {path}: {exc}") from None
    except indexfile.IndexFormatError as exc:
        raise DataError(f"bad index file {path}: {exc}") from None


def _check_against_header(args, db):
    cfg = db.config
    if args.dim is not None and args.dim != cfg.dim:
        raise ConfigError(f"--dim {args.dim} does not match index dimension {cfg.dim}")
    if args.metric is not None and args.metric.lower() != cfg.metric:
        raise ConfigError(f"--metric {args.metric} does not match index metric {cfg.metric}")
    if args.tile_size is not None and args.tile_size != cfg.tile_size:
        raise ConfigError(f"--tile-size {args.tile_size} does not match index tile size "
                          f"{cfg.tile_size}")


def run_query(db, query, algo: str, k: int, params, mode: BoundMode):
    stats = SearchStats()
    if algo == "linear":
        results = linear_search(query, db.images, k, params, db.index.metric, stats)
    elif algo == "tars":
        results = tars(query, db.index, db.images, k, params, mode, stats)
    elif algo == "spars":
        results = spars(query, db.index, db.images, k, params, mode, stats)
    else:
        raise ConfigError(f"unknown algorithm {algo!r}")
    return results, stats


def result_records(query_id: str, results, db) -> list[dict]:
    records = []
    for rank, m in enumerate(results, start=1):
        a = m.alignment
        records.append({
            "type": "result", "query_id": query_id, "rank": rank, "image_id": a.image_id,
            "image_path": db.images[a.image_id].path, "drow": a.drow, "dcol": a.dcol,
            "score": m.score, "region": [list(c) for c in m.region.sorted_cells()],
            "image_tiles": [list(c) for c in m.image_tiles()],
            "query_tiles": [list(c) for c in m.query_tiles()],
        })
    return records


def stats_record(query_id: str, algo: str, query, stats: SearchStats, db) -> dict:
    return {"type": "stats", "query_id": query_id, "algorithm": algo, "query_tiles": query.n,
            "alignments_evaluated": stats.dp_evaluations,
            "alignments_total": all_alignment_count(query, db.images),
            "cursor_pops": stats.cursor_pops, "bq_pops": stats.bq_pops,
            "wall_time": stats.wall_time, "dp_time": stats.dp_time, "nn_time": stats.nn_time}


def _dump(rec: dict) -> str:
    return json.dumps(rec, sort_keys=True, separators=(",", ":"))


def cmd_query(args) -> int:
    db = _load_index(args.index)
    _check_against_header(args, db)
    cfg_file = _load_config(args.config)
    k = int(_pick(args, cfg_file, "k", "k", 10))
    algo = str(_pick(args, cfg_file, "algo", "algo", "spars"))
    if algo not in ALGORITHMS:
        raise ConfigError(f"unknown algorithm {algo!r}")
    try:
        mode = BoundMode.parse(_pick(args, cfg_file, "mode", "mode", "paper"))
        params = db.config.params.__class__(
            lam=float(_pick(args, cfg_file, "lam", "lambda", db.config.lam)),
            c=float(_pick(args, cfg_file, "c", "c", db.config.c)))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if k < 1:
        raise ConfigError("--k must be at least 1")
    if not args.query:
        raise ConfigError("--query is required")
    files = _pgm_files(args.query)
    if not files:
        raise DataError(f"no query images in {args.query}")

    out, close = _open_out(args.out)
    try:
        out.write(_dump({"type": "header", "format": "regionsearch-results/1", "algo": algo,
                         "mode": mode.value, "k": k, "lambda": params.lam, "c": params.c,
                         "metric": db.config.metric, "dim": db.config.dim,
                         "tile_size": db.config.tile_size}) + "\n")
        for f in files:
            try:
                pixels = read_pgm(f)
            except (OSError, PgmError) as exc:
                raise DataError(f"cannot read query {f}: {exc}") from None
            query = db.query_from_pixels(pixels)
            results, stats = run_query(db, query, algo, k, params, mode)
            for rec in result_records(f.stem, results, db):
                out.write(_dump(rec) + "\n")
            out.write(_dump(stats_record(f.stem, algo, query, stats, db)) + "\n")
    finally:
        if close:
            out.close()
    return EXIT_OK


# --------------------------------------------------------------- gen-synthetic

def cmd_gen_synthetic(args) -> int:
    raw = _load_config(args.config)
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.tile_size is not None:
        raw["tile_size"] = args.tile_size
    try:
        spec = SyntheticSpec.from_dict(raw)
    except (SyntheticSpecError, TypeError) as exc:
        raise ConfigError(f"bad synthetic spec: {exc}") from None
    if not args.out:
        raise ConfigError("gen-synthetic needs --out")
    truth = write_corpus(spec, args.out)
    print(f"images: {len(truth['images'])}")
    print(f"queries: {len(truth['queries'])}")
    print(f"placements: {sum(len(im['placements']) for im in truth['images'])}")
    return EXIT_OK


# -------------------------------------------------------------- eval-precision

def read_records(path) -> list[dict]:
    records = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records


def cmd_eval_precision(args) -> int:
    try:
        records = read_records(args.results)
        with open(args.truth) as fh:
            truth = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(str(exc)) from None
    try:
        report = precision_at_k(records, truth, args.k)
    except (GroundTruthError, KeyError) as exc:
        raise DataError(f"cannot resolve results against ground truth: {exc}") from None
    for qid, p in report["per_query"].items():
        print(f"{qid}\t{p:.3f}")
    print(f"precision@{args.k}\t{report['precision']:.4f}")
    return EXIT_OK


# ----------------------------------------------------------------------- bench

BENCH_FIELDS = ["query_id", "query_tiles", "algorithm", "mode", "wall_time", "nn_time", "dp_time",
                "nn_share", "dp_share", "alignments_evaluated", "alignments_total", "nn_ops"]


def bench_rows(db, queries, algos, k, params, mode) -> list[dict]:
    rows = []
    for qid, query in queries:
        for algo in algos:
            _, stats = run_query(db, query, algo, k, params, mode)
            wall = stats.wall_time or 1e-12
            rows.append({"query_id": qid, "query_tiles": query.n, "algorithm": algo,
                         "mode": mode.value, "wall_time": stats.wall_time,
                         "nn_time": stats.nn_time, "dp_time": stats.dp_time,
                         "nn_share": stats.nn_time / wall, "dp_share": stats.dp_time / wall,
                         "alignments_evaluated": stats.dp_evaluations,
                         "alignments_total": all_alignment_count(query, db.images),
                         "nn_ops": stats.nn_ops})
    return rows


def cmd_bench(args) -> int:
    db = _load_index(args.index)
    _check_against_header(args, db)
    algos = [a.strip() for a in (args.algo or ",".join(ALGORITHMS)).split(",") if a.strip()]
    for a in algos:
        if a not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {a!r}")
    if not args.query:
        raise ConfigError("--query is required")
    try:
        mode = BoundMode.parse(args.mode or "paper")
        params = db.config.params.__class__(lam=args.lam if args.lam is not None else db.config.lam,
                                            c=args.c if args.c is not None else db.config.c)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    queries = []
    for f in _pgm_files(args.query):
        try:
            queries.append((f.stem, db.query_from_pixels(read_pgm(f))))
        except (OSError, PgmError) as exc:
            raise DataError(f"cannot read query {f}: {exc}") from None
    rows = bench_rows(db, queries, algos, args.k or 10, params, mode)
    out, close = _open_out(args.out)
    try:
        writer = csv.DictWriter(out, fieldnames=BENCH_FIELDS)
        writer.writeheader()
        writer.writerows(rows)
    finally:
        if close:
            out.close()
    return EXIT_OK


# ---------------------------------------------------------------- oracle-check

def _parse_sizes(text: str) -> list[tuple[int, int]]:
    sizes = []
    for part in text.split(","):
        try:
            r, c = part.lower().split("x")
            sizes.append((int(r), int(c)))
        except ValueError:
            raise ConfigError(f"bad size {part!r}; expected e.g. 4x4") from None
    return sizes


def oracle_report(sizes, trials: int, seed: int, trst_instances: int = 20) -> dict:
    """DP-vs-exact soundness, capturability attainment, and Steiner reduction checks."""
    for r, c in sizes:
        if r * c > 16:
            raise ConfigError(f"{r}x{c} exceeds the 16-cell limit of the exact solver")
    rng = np.random.default_rng(seed)
    violations, capturable, attained = 0, 0, 0
    for t in range(trials):
        r, c = sizes[t % len(sizes)]
        m = rng.integers(-10, 11, size=(r, c)).astype(np.float64)
        exact_region, exact = exact_mwcs(m)
        _, dp = dp_max_region(m)
        if dp > exact + 1e-9 or dp < m.max() - 1e-9:
            violations += 1
        if is_dp_capturable(exact_region.cells):
            capturable += 1
            attained += dp >= exact - 1e-9

    _, ex_score = exact_mwcs(UNCAPTURABLE_EXAMPLE)
    _, bl_score = dp_corner_run(UNCAPTURABLE_EXAMPLE, Corner.BOTTOM_LEFT)

    trst_bad = 0
    for _ in range(trst_instances):
        n = int(rng.integers(2, 4))
        picks = rng.choice(9, size=n, replace=False)
        terms = frozenset(divmod(int(p), 3) for p in picks)
        inst = TrstInstance(3, terms, w=100.0)
        _, weight = exact_mwcs(trst_to_mwcs(inst), cell_cap=25)
        if abs(weight - (n * 100 - steiner_length(terms, 3))) > 1e-9:
            trst_bad += 1
    return {"trials": trials, "soundness_violations": violations,
            "capturable_optima": capturable, "dp_attained_on_capturable": attained,
            "attainment_rate": attained / capturable if capturable else None,
            "example_exact": ex_score, "example_bottom_left": bl_score,
            "example_four_corner": dp_max_region(UNCAPTURABLE_EXAMPLE)[1],
            "trst_instances": trst_instances, "trst_violations": trst_bad}


def cmd_oracle_check(args) -> int:
    sizes = _parse_sizes(args.sizes)
    report = oracle_report(sizes, args.trials, args.seed if args.seed is not None else 0,
                           args.trst)
    for key, value in report.items():
        print(f"{key}: {value}")
    bad = report["soundness_violations"] or report["trst_violations"] or \
        report["example_exact"] != 96 or report["example_bottom_left"] != 61
    return EXIT_ORACLE if bad else EXIT_OK


# ----------------------------------------------------------------------- main

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="regionsearch",
                                     description="Top-k connected subregion search over tiled images")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, *names):
        if "index" in names:
            p.add_argument("--index", help="index file")
        if "query" in names:
            p.add_argument("--query", help="query PGM file or directory")
        if "k" in names:
            p.add_argument("--k", type=int, default=None)
        if "algo" in names:
            p.add_argument("--algo", default=None)
        if "mode" in names:
            p.add_argument("--mode", default=None, help="paper | safe")
        if "params" in names:
            p.add_argument("--lambda", dest="lam", type=float, default=None)
            p.add_argument("--c", type=float, default=None)
        if "build" in names:
            p.add_argument("--dim", type=int, default=None)
            p.add_argument("--tile-size", type=int, default=None)
            p.add_argument("--capacity", type=int, default=None)
            p.add_argument("--metric", default=None, help="l2 | l1")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None)
        p.add_argument("--config", default=None, help="JSON config file")

    p = sub.add_parser("build-index", help="ingest a directory of PGM images")
    p.add_argument("image_dir")
    common(p, "index", "params", "build")
    p.set_defaults(func=cmd_build_index)

    p = sub.add_parser("query", help="run top-k queries against an index")
    common(p, "index", "query", "k", "algo", "mode", "params", "build")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("gen-synthetic", help="write a seeded synthetic corpus")
    common(p, "build")
    p.set_defaults(func=cmd_gen_synthetic)

    p = sub.add_parser("eval-precision", help="top-k precision of query results")
    p.add_argument("results")
    p.add_argument("truth")
    p.add_argument("--k", type=int, default=5)
    p.set_defaults(func=cmd_eval_precision)

    p = sub.add_parser("bench", help="time the search algorithms on a query set")
    common(p, "index", "query", "k", "algo", "mode", "params", "build")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("oracle-check", help="cross-check the DP against exact oracles")
    p.add_argument("--sizes", default="2x2,3x3,4x4")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--trst", type=int, default=20, help="number of Steiner reduction instances")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_oracle_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, IntegrityError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
