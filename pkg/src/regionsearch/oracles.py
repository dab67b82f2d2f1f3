"""Brute-force references used to cross-check the solvers.

Deliberately naive: subset enumeration with an explicit connectivity test,
and rectilinear Steiner trees as the best rectilinear MST over terminals
plus any subset of grid Steiner points.
"""

from __future__ import annotations

import itertools

import numpy as np

from .model import is_connected


def naive_mwcs(m) -> float:
    """Best connected-subset sum by trying all 2^N subsets (N <= 20)."""
    m = np.asarray(m, dtype=np.float64)
    cells = [(i, j) for i in range(m.shape[0]) for j in range(m.shape[1])]
    if len(cells) > 20:
        raise ValueError("too many cells for subset enumeration")
    best = -np.inf
    for mask in range(1, 1 << len(cells)):
        subset = [cells[b] for b in range(len(cells)) if mask >> b & 1]
        total = sum(m[c] for c in subset)
        if total > best and is_connected(subset):
            best = total
    return float(best)


def rectilinear_mst(points) -> int:
    """Prim's MST under the L1 metric."""
    points = list(points)
    if len(points) <= 1:
        return 0
    in_tree = {0}
    dist = {i: abs(points[i][0] - points[0][0]) + abs(points[i][1] - points[0][1])
            for i in range(1, len(points))}
    total = 0
    while dist:
        nxt = min(dist, key=lambda i: (dist[i], i))
        total += dist.pop(nxt)
        in_tree.add(nxt)
        for i in dist:
            d = abs(points[i][0] - points[nxt][0]) + abs(points[i][1] - points[nxt][1])
            if d < dist[i]:
                dist[i] = d
    return total


def steiner_length(terminals, m: int) -> int:
    """Minimum rectilinear Steiner tree length for terminals on an m x m grid."""
    terminals = sorted(set(map(tuple, terminals)))
    others = [(x, y) for x in range(m) for y in range(m) if (x, y) not in terminals]
    best = rectilinear_mst(terminals)
    for size in range(1, max(len(terminals) - 1, 1)):
        for extra in itertools.combinations(others, size):
            best = min(best, rectilinear_mst(terminals + list(extra)))
    return best
