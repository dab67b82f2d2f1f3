"""Single-file binary persistence of a :class:`SearchDatabase`.

Layout (all little-endian, explicit lengths)::

    header    magic "SUBRSRCH", version, metric id, tile size, bins, window,
              raw dim, reduced dim, lambda, c, image count, tile count,
              leaf capacity
    pca       mean[raw], components[reduced x raw], eigenvalues[reduced],
              total variance
    catalog   per image: id, rows, cols, path (length-prefixed utf-8),
              bg[rows x cols]
    entries   refs[tiles x (image, row, col)] as u32, vectors[tiles x reduced]
    tree      pre-order nodes: leaf flag, child count, lo[reduced],
              hi[reduced], entry ids (leaf nodes only)
"""

from __future__ import annotations

import io
import os
import struct

import numpy as np

from .features import PcaModel, energy_retained
from .index import IndexNode, TileIndex, _boxed
from .model import TiledImage, TileRef
from .pipeline import BuildConfig, SearchDatabase

MAGIC = b"SUBRSRCH"
VERSION = 1
_METRIC_IDS = {"l2": 0, "l1": 1}
_HEADER = struct.Struct("<8sIBIIIIIddIII")


class IndexFormatError(ValueError):
    pass


def _f8(a) -> bytes:
    return np.ascontiguousarray(a, dtype="<f8").tobytes()


def _u4(a) -> bytes:
    return np.ascontiguousarray(a, dtype="<u4").tobytes()


def dumps(db: SearchDatabase) -> bytes:
    cfg, pca, index = db.config, db.pca, db.index
    out = io.BytesIO()
    out.write(_HEADER.pack(MAGIC, VERSION, _METRIC_IDS[index.metric], cfg.tile_size, cfg.bins,
                           cfg.window, pca.in_dim, pca.out_dim, cfg.lam, cfg.c, len(db.images),
                           len(index), index.capacity))
    out.write(_f8(pca.mean) + _f8(pca.components) + _f8(pca.eigenvalues)
              + _f8([pca.total_variance]))
    for image_id in sorted(db.images):
        im = db.images[image_id]
        path = im.path.encode("utf-8")
        out.write(_u4([image_id, im.rows, im.cols, len(path)]) + path + _f8(im.bg))
    out.write(_u4(np.array(index.refs, dtype=np.int64).reshape(-1, 3)))
    out.write(_f8(index.points))

    def write_node(node: IndexNode):
        out.write(struct.pack("<BI", int(node.leaf), len(node.children)))
        out.write(_f8(node.lo) + _f8(node.hi))
        if node.leaf:
            out.write(_u4(node.children))
        else:
            for child in node.children:
                write_node(child)

    write_node(index.root)
    return out.getvalue()


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise IndexFormatError("index file is truncated")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def f8(self, *shape) -> np.ndarray:
        count = int(np.prod(shape)) if shape else 1
        return np.frombuffer(self.take(8 * count), dtype="<f8").astype(np.float64).reshape(shape)

    def u4(self, count: int) -> np.ndarray:
        return np.frombuffer(self.take(4 * count), dtype="<u4").astype(np.int64)


def loads(data: bytes) -> SearchDatabase:
    rd = _Reader(data)
    (magic, version, metric_id, tile_size, bins, window, raw_dim, dim, lam, c, n_images,
     n_tiles, capacity) = _HEADER.unpack(rd.take(_HEADER.size))
    if magic != MAGIC:
        raise IndexFormatError("not an index file (bad magic)")
    if version != VERSION:
        raise IndexFormatError(f"unsupported index format version {version}")
    metric = {v: k for k, v in _METRIC_IDS.items()}.get(metric_id)
    if metric is None:
        raise IndexFormatError(f"unknown metric id {metric_id}")
    cfg = BuildConfig(tile_size=tile_size, dim=dim, capacity=capacity, metric=metric, lam=lam,
                      c=c, bins=bins, window=window)
    pca = PcaModel(rd.f8(raw_dim), rd.f8(dim, raw_dim), rd.f8(dim), float(rd.f8()[()]))

    shapes = {}
    for _ in range(n_images):
        image_id, rows, cols, plen = (int(x) for x in rd.u4(4))
        path = rd.take(plen).decode("utf-8")
        shapes[image_id] = (rows, cols, path, rd.f8(rows, cols))
    refs = [TileRef(*map(int, r)) for r in rd.u4(3 * n_tiles).reshape(-1, 3)]
    points = rd.f8(n_tiles, dim)

    grids = {i: np.zeros((r, cc, dim)) for i, (r, cc, _, _) in shapes.items()}
    filled = {i: np.zeros((r, cc), dtype=bool) for i, (r, cc, _, _) in shapes.items()}
    for eid, ref in enumerate(refs):
        if ref.image_id not in grids:
            raise IndexFormatError(f"entry {eid} refers to unknown image {ref.image_id}")
        grids[ref.image_id][ref.row, ref.col] = points[eid]
        filled[ref.image_id][ref.row, ref.col] = True
    if not all(f.all() for f in filled.values()):
        raise IndexFormatError("catalog grid is not fully covered by leaf entries")
    images = {i: TiledImage(i, grids[i], bg, path) for i, (_, _, path, bg) in shapes.items()}

    seen = []

    def read_node() -> IndexNode:
        leaf, count = struct.unpack("<BI", rd.take(5))
        lo, hi = rd.f8(dim), rd.f8(dim)
        if leaf:
            eids = [int(x) for x in rd.u4(count)]
            seen.extend(eids)
            return IndexNode(lo, hi, eids, leaf=True)
        return _boxed(IndexNode(lo, hi, [read_node() for _ in range(count)]))

    root = read_node()
    if rd.pos != len(data):
        raise IndexFormatError("trailing bytes after tree block")
    if sorted(seen) != list(range(n_tiles)):
        raise IndexFormatError("tree does not reference every entry exactly once")
    index = TileIndex(root, points, refs, capacity, metric)
    return SearchDatabase(cfg, pca, images, index,
                          {"images": n_images, "tiles": n_tiles,
                           "energy_retained": energy_retained(pca), "depth": root.depth()})


def save(db: SearchDatabase, path: str | os.PathLike) -> None:
    with open(path, "wb") as fh:
        fh.write(dumps(db))


def load(path: str | os.PathLike) -> SearchDatabase:
    with open(path, "rb") as fh:
        return loads(fh.read())
