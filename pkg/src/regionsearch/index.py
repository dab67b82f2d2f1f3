"""STR-packed R-tree over tile feature vectors.

Leaf entries point back to their image grid position, and each image keeps
its tiles as a grid, so a nearest-neighbour hit can be turned into an
alignment directly.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Optional, Sequence

import numpy as np

from .distance import check_metric, distances
from .model import TiledImage, TileRef


class IntegrityError(LookupError):
    """A leaf entry refers to an image or grid position that does not exist."""


@dataclass(frozen=True)
class LeafEntry:
    features: np.ndarray
    tile: TileRef


@dataclass(eq=False)
class IndexNode:
    lo: np.ndarray
    hi: np.ndarray
    children: list = field(default_factory=list)  # IndexNode objects, or entry ids at leaf level
    leaf: bool = False
    # stacked child boxes, filled for internal nodes
    child_lo: Optional[np.ndarray] = None
    child_hi: Optional[np.ndarray] = None

    def depth(self) -> int:
        return 1 if self.leaf else 1 + max(c.depth() for c in self.children)

    def iter_nodes(self) -> Iterator["IndexNode"]:
        yield self
        if not self.leaf:
            for c in self.children:
                yield from c.iter_nodes()


@dataclass(eq=False)
class TileIndex:
    root: IndexNode
    points: np.ndarray  # (N, dim)
    refs: list  # TileRef per entry id
    capacity: int
    metric: str = "l2"

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return len(self.refs)

    def entry(self, eid: int) -> LeafEntry:
        return LeafEntry(self.points[eid], self.refs[eid])

    def leaves(self) -> list[IndexNode]:
        return [n for n in self.root.iter_nodes() if n.leaf]

    def depth(self) -> int:
        return self.root.depth()


def _slice_order(points: np.ndarray) -> list[int]:
    """Dimensions by decreasing variance, ties by dimension index."""
    var = points.var(axis=0) if len(points) > 1 else np.zeros(points.shape[1])
    return sorted(range(points.shape[1]), key=lambda d: (-var[d], d))


def _str_groups(ids: np.ndarray, centers: np.ndarray, capacity: int,
                dims: Sequence[int]) -> list[np.ndarray]:
    """Sort-Tile-Recursive packing of ``ids`` into runs of at most ``capacity``."""
    n = len(ids)
    if n <= capacity:
        return [ids]
    key = centers[ids, dims[0]]
    ids = ids[np.lexsort((ids, key))]
    if len(dims) == 1:
        return [ids[i:i + capacity] for i in range(0, n, capacity)]
    pages = math.ceil(n / capacity)
    slabs = math.ceil(pages ** (1.0 / len(dims)))
    slab_size = capacity * math.ceil(pages / slabs)
    groups = []
    for start in range(0, n, slab_size):
        groups.extend(_str_groups(ids[start:start + slab_size], centers, capacity, dims[1:]))
    return groups


def _boxed(node: IndexNode) -> IndexNode:
    if not node.leaf:
        node.child_lo = np.stack([c.lo for c in node.children])
        node.child_hi = np.stack([c.hi for c in node.children])
    return node


def str_bulk_load(entries: Iterable[LeafEntry] | tuple[np.ndarray, Sequence[TileRef]],
                  capacity: int = 64, metric: str = "l2") -> TileIndex:
    """Bulk-load an index. ``entries`` is LeafEntry objects or ``(points, refs)``."""
    if capacity < 2:
        raise ValueError("capacity must be at least 2")
    metric = check_metric(metric)
    if isinstance(entries, tuple):
        points, refs = entries
        points = np.asarray(points, dtype=np.float64)
        refs = [TileRef(*r) for r in refs]
    else:
        entries = list(entries)
        points = np.array([e.features for e in entries], dtype=np.float64)
        refs = [TileRef(*e.tile) for e in entries]
    if len(refs) == 0:
        raise ValueError("cannot build an index over no entries")
    if points.ndim != 2 or len(points) != len(refs):
        raise ValueError("points must be (N, dim) with one ref per point")
    if not np.all(np.isfinite(points)):
        raise ValueError("feature vectors must be finite")

    dims = _slice_order(points)
    # entry ids ordered by tile ref so equal keys pack deterministically
    order = np.array(sorted(range(len(refs)), key=lambda i: refs[i]), dtype=np.int64)
    groups = _str_groups(np.arange(len(refs)), points[order], capacity, dims)
    level = []
    for g in groups:
        eids = sorted(int(order[i]) for i in g)
        pts = points[eids]
        level.append(IndexNode(pts.min(axis=0), pts.max(axis=0), eids, leaf=True))

    while len(level) > 1:
        centers = np.array([(nd.lo + nd.hi) / 2 for nd in level])
        groups = _str_groups(np.arange(len(level)), centers, capacity, dims)
        parents = []
        for g in groups:
            kids = [level[i] for i in g]
            parents.append(_boxed(IndexNode(np.min([k.lo for k in kids], axis=0),
                                            np.max([k.hi for k in kids], axis=0), kids)))
        level = parents
    return TileIndex(level[0], points, refs, capacity, metric)


def mindist(q, lo, hi, metric: str = "l2"):
    """Distance from ``q`` to the nearest point of box(es) ``[lo, hi]``."""
    q = np.asarray(q, dtype=np.float64)
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    if q.shape[-1] != lo.shape[-1] or lo.shape != hi.shape:
        raise ValueError("query and box dimensions differ")
    gap = np.maximum(np.maximum(lo - q, q - hi), 0.0)
    if metric == "l2":
        return np.sqrt(np.sum(gap * gap, axis=-1))
    if metric == "l1":
        return np.sum(gap, axis=-1)
    raise ValueError(f"unknown metric {metric!r}")


class NnCursor:
    """Incremental nearest neighbours of one query point (best-first browsing).

    Entries come out in non-decreasing distance; equal distances in
    ``(image_id, row, col)`` order.  ``pops`` counts priority-queue pops and
    ``distance_evals`` point-to-point or point-to-box distance computations.
    """

    def __init__(self, index: TileIndex, q):
        self.index = index
        self.q = np.asarray(q, dtype=np.float64)
        if self.q.shape != (index.dim,):
            raise ValueError(f"query point must have dimension {index.dim}")
        self.pops = 0
        self.emitted = 0
        self.distance_evals = 1
        self._seq = itertools.count()
        root = index.root
        d = float(mindist(self.q, root.lo, root.hi, index.metric))
        self._heap = [(d, 0, next(self._seq), root)]

    def __iter__(self):
        return self

    def __next__(self) -> tuple[float, int]:
        item = self.next()
        if item is None:
            raise StopIteration
        return item

    def next(self) -> Optional[tuple[float, int]]:
        """Next ``(distance, entry id)``, or None once exhausted."""
        heap = self._heap
        index = self.index
        while heap:
            item = heapq.heappop(heap)
            self.pops += 1
            if item[1] == 1:
                self.emitted += 1
                return item[0], item[3]
            node = item[3]
            if node.leaf:
                eids = node.children
                ds = distances(self.q, index.points[eids], index.metric)
                self.distance_evals += len(eids)
                for d, eid in zip(ds.tolist(), eids):
                    heapq.heappush(heap, (d, 1, index.refs[eid], eid))
            else:
                ds = mindist(self.q, node.child_lo, node.child_hi, index.metric)
                self.distance_evals += len(node.children)
                for d, child in zip(ds.tolist(), node.children):
                    heapq.heappush(heap, (d, 0, next(self._seq), child))
        return None


def nn_cursor(index: TileIndex, q) -> NnCursor:
    return NnCursor(index, q)


def image_grid_lookup(tile: TileRef, catalog: Mapping[int, TiledImage]):
    """Owning image and grid position of a leaf entry's tile."""
    image = catalog.get(tile.image_id)
    if image is None:
        raise IntegrityError(f"no image with id {tile.image_id}")
    if not (0 <= tile.row < image.rows and 0 <= tile.col < image.cols):
        raise IntegrityError(f"tile {tile} outside the {image.rows}x{image.cols} grid")
    return image, (tile.row, tile.col)
