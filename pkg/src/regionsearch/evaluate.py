"""Top-k precision against synthetic ground truth.

A returned region is a true match when it shares at least one image tile
with a visible tile of a ground-truth placement on the same image whose
label is one of the query's labels.
"""

from __future__ import annotations

import os
from collections import defaultdict


class GroundTruthError(LookupError):
    pass


def _image_key(path: str) -> str:
    return os.path.basename(path)


def truth_tables(truth: dict):
    """``(placements by image key, labels by query id)``."""
    placements = {}
    for im in truth["images"]:
        placements[_image_key(im["path"])] = im["placements"]
    labels = {q["query_id"]: set(q["labels"]) for q in truth["queries"]}
    return placements, labels


def is_true_match(record: dict, query_labels: set, placements: dict) -> bool:
    key = _image_key(record["image_path"])
    if key not in placements:
        raise GroundTruthError(f"result image {record['image_path']!r} is not in the ground truth")
    tiles = {tuple(t) for t in record["image_tiles"]}
    for pl in placements[key]:
        if pl["label"] in query_labels and tiles & {tuple(t) for t in pl["tiles"]}:
            return True
    return False


def precision_at_k(records: list[dict], truth: dict, k: int = 5) -> dict:
    """Mean top-k precision over the queries present in ``records``.

    Result records need ``query_id``, ``rank``, ``image_path`` and
    ``image_tiles``; anything else (headers, timings) is ignored.
    """
    placements, labels = truth_tables(truth)
    by_query = defaultdict(list)
    for rec in records:
        if rec.get("type", "result") != "result":
            continue
        by_query[rec["query_id"]].append(rec)
    per_query = {}
    for qid, recs in sorted(by_query.items()):
        if qid not in labels:
            raise GroundTruthError(f"query {qid!r} has no ground truth")
        top = sorted(recs, key=lambda r: r["rank"])[:k]
        hits = sum(is_true_match(r, labels[qid], placements) for r in top)
        per_query[qid] = hits / k
    mean = sum(per_query.values()) / len(per_query) if per_query else 0.0
    return {"precision": mean, "per_query": per_query, "k": k}
