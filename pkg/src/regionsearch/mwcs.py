"""Maximal weighted connected subregions of a score matrix.

The heuristic runs a four-case recurrence from each matrix corner.  At cell
C the best region ending there is one of: C alone, C plus the best region of
its horizontal predecessor, C plus that of its vertical predecessor, or C
plus both (their overlap counted once).  Each corner fixes which neighbours
count as predecessors.

``exact_mwcs`` solves the same problem exhaustively for small matrices and
``trst_to_mwcs`` builds hard instances from thumbnail rectilinear Steiner
tree problems.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable

import numpy as np

from .model import Cell, Region, ScoreMatrix


class Corner(Enum):
    # value: (row step, col step) of the two scan moves
    BOTTOM_LEFT = (1, 1)
    BOTTOM_RIGHT = (1, -1)
    TOP_LEFT = (-1, 1)
    TOP_RIGHT = (-1, -1)

    @property
    def moves(self) -> tuple[Cell, Cell]:
        """The horizontal and vertical move of this corner's scan."""
        dr, dc = self.value
        return (0, dc), (dr, 0)


CORNERS = (Corner.BOTTOM_LEFT, Corner.BOTTOM_RIGHT, Corner.TOP_LEFT, Corner.TOP_RIGHT)


def _as_array(m) -> np.ndarray:
    scores = m.scores if isinstance(m, ScoreMatrix) else np.asarray(m, dtype=np.float64)
    if scores.ndim != 2 or scores.size == 0:
        raise ValueError("score matrix must be a non-empty 2-D array")
    return scores


def _cells_of(flat_ids: Iterable[int], cols: int) -> list[Cell]:
    return sorted(divmod(k, cols) for k in flat_ids)


def _better(score, cells, best_score, best_cells, cols) -> bool:
    """Tie order: higher score, then fewer cells, then smallest sorted cell list."""
    if score != best_score:
        return score > best_score
    if len(cells) != len(best_cells):
        return len(cells) < len(best_cells)
    return _cells_of(cells, cols) < _cells_of(best_cells, cols)


def dp_corner_run(m, corner: Corner) -> tuple[Region, float]:
    """One corner run of the recurrence; returns the best region over all cells."""
    scores = _as_array(m)
    rows, cols = scores.shape
    flat = scores.ravel().tolist()
    dr, dc = corner.value
    row_order = range(rows) if dr > 0 else range(rows - 1, -1, -1)
    col_order = range(cols) if dc > 0 else range(cols - 1, -1, -1)

    S = [0.0] * (rows * cols)
    R: list = [None] * (rows * cols)
    best_score, best_cells = -np.inf, None

    for i in row_order:
        pi = i - dr
        for j in col_order:
            pj = j - dc
            k = i * cols + j
            s = flat[k]
            h = i * cols + pj if 0 <= pj < cols else -1
            v = pi * cols + j if 0 <= pi < rows else -1

            # (score, size, predecessors whose regions are merged)
            cands = [(s, 1, ())]
            if h >= 0:
                cands.append((s + S[h], len(R[h]) + 1, (h,)))
            if v >= 0:
                cands.append((s + S[v], len(R[v]) + 1, (v,)))
            if h >= 0 and v >= 0:
                inter = R[h] & R[v]
                cands.append((s + S[h] + S[v] - sum(map(flat.__getitem__, inter)),
                              len(R[h]) + len(R[v]) - len(inter) + 1, (h, v)))
            top = max(cands, key=lambda c: (c[0], -c[1]))
            tied = [c for c in cands if c[0] == top[0] and c[1] == top[1]]
            if len(tied) > 1:
                top = min(tied, key=lambda c: _cells_of(_merge(R, c[2], k), cols))
            region = _merge(R, top[2], k)
            S[k] = top[0]
            R[k] = region

            if best_cells is None or _better(top[0], region, best_score, best_cells, cols):
                best_score, best_cells = top[0], region

    cells = frozenset(divmod(k, cols) for k in best_cells)
    return Region(cells, float(best_score)), float(best_score)


def _merge(R, preds, k) -> frozenset:
    region = frozenset((k,))
    for p in preds:
        region = region | R[p]
    return region


def dp_max_region(m) -> tuple[Region, float]:
    """Best region over the four corner runs.

    Never exceeds the exact optimum and never falls below the largest entry.
    """
    scores = _as_array(m)
    best = None
    for corner in CORNERS:
        region, _ = dp_corner_run(scores, corner)
        if best is None or (region.score, -len(region.cells)) > (best.score, -len(best.cells)) or (
                region.score == best.score and len(region.cells) == len(best.cells)
                and region.sorted_cells() < best.sorted_cells()):
            best = region
    return best, best.score


class MatrixTooLarge(ValueError):
    pass


def exact_mwcs(m, cell_cap: int = 16) -> tuple[Region, float]:
    """Exact maximum-weight connected cell set by exhaustive enumeration.

    Every connected set is generated once (rooted at its smallest cell,
    extended through a candidate frontier with an exclusion set). Branches
    whose score plus all still-reachable positive mass cannot reach the
    incumbent are cut; that cut never drops a tie.
    """
    scores = _as_array(m)
    rows, cols = scores.shape
    n = rows * cols
    if n > cell_cap:
        raise MatrixTooLarge(f"{rows}x{cols} matrix exceeds cell cap {cell_cap}")
    w = scores.ravel().tolist()
    pos = [x if x > 0 else 0.0 for x in w]
    adj = []
    for k in range(n):
        i, j = divmod(k, cols)
        nb = []
        if i > 0:
            nb.append(k - cols)
        if i < rows - 1:
            nb.append(k + cols)
        if j > 0:
            nb.append(k - 1)
        if j < cols - 1:
            nb.append(k + 1)
        adj.append(nb)

    best = {"score": -np.inf, "cells": None}

    def consider(members, total):
        b = best["cells"]
        if b is None or total > best["score"] or (total == best["score"] and (
                len(members) < len(b)
                or (len(members) == len(b) and sorted(members) < sorted(b)))):
            best["score"] = total
            best["cells"] = frozenset(members)

    def extend(members, total, frontier, excluded, avail):
        consider(members, total)
        frontier = sorted(frontier)
        excluded = set(excluded)
        while frontier:
            if total + avail < best["score"]:
                return
            u = frontier.pop()
            excluded.add(u)
            avail -= pos[u]
            grown = set(frontier)
            for x in adj[u]:
                if x not in members and x not in excluded:
                    grown.add(x)
            members.add(u)
            extend(members, total + w[u], grown, excluded, avail)
            members.discard(u)

    total_pos = sum(pos)
    for root in range(n):
        excluded = set(range(root + 1))
        avail = total_pos - sum(pos[:root + 1])
        frontier = {x for x in adj[root] if x > root}
        extend({root}, w[root], frontier, excluded, avail)

    cells = frozenset(divmod(k, cols) for k in best["cells"])
    score = float(sum(w[k] for k in sorted(best["cells"])))
    return Region(cells, score), score


def sinks(p: Iterable[Cell], end: Cell, corner: Corner) -> bool:
    """True iff ``end`` is reachable from every cell of ``p`` with the corner's moves."""
    p = set(map(tuple, p))
    end = tuple(end)
    if end not in p:
        raise ValueError(f"end cell {end} is not in the shape")
    (hr, hc), (vr, vc) = corner.moves
    # walk the moves backwards from the end cell
    seen = {end}
    todo = [end]
    while todo:
        i, j = todo.pop()
        for prev in ((i - hr, j - hc), (i - vr, j - vc)):
            if prev in p and prev not in seen:
                seen.add(prev)
                todo.append(prev)
    return len(seen) == len(p)


def is_dp_capturable(p: Iterable[Cell]) -> bool:
    """True iff some cell of the shape sinks all of it under one corner's moves.

    Disconnected shapes can never be sunk and return False.
    """
    p = set(map(tuple, p))
    if not p:
        raise ValueError("shape must be non-empty")
    return any(sinks(p, end, corner) for corner in CORNERS for end in p)


@dataclass(frozen=True)
class TrstInstance:
    """Thumbnail rectilinear Steiner tree instance on an ``m x m`` grid."""

    m: int
    terminals: frozenset
    w: float = 100.0
    l: float = 0.0

    def __post_init__(self):
        terms = frozenset(map(tuple, self.terminals))
        object.__setattr__(self, "terminals", terms)
        if self.m < 1 or not terms:
            raise ValueError("need m >= 1 and at least one terminal")
        for x, y in terms:
            if not (0 <= x < self.m and 0 <= y < self.m):
                raise ValueError(f"terminal {(x, y)} lies off the {self.m}x{self.m} grid")


def trst_to_mwcs(inst: TrstInstance) -> ScoreMatrix:
    """Grid points at even/even cells (w on terminals, 0 elsewhere), -1 on the
    half-grid connectors, and a prohibitive sentinel on the odd/odd holes."""
    size = 2 * inst.m - 1
    n = len(inst.terminals)
    sentinel = -(n * inst.w + inst.l + 1)
    scores = np.full((size, size), sentinel, dtype=np.float64)
    for i in range(size):
        for j in range(size):
            if i % 2 == 0 and j % 2 == 0:
                scores[i, j] = inst.w if (i // 2, j // 2) in inst.terminals else 0.0
            elif (i + j) % 2 == 1:
                scores[i, j] = -1.0
    return ScoreMatrix(scores)
