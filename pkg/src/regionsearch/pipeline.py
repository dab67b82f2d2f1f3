"""Image ingestion: tiles -> descriptors -> PCA -> STR index."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .features import (DescriptorConfig, PcaModel, csd_descriptors, energy_retained, pca_fit,
                       pca_project, tile_bg_distances, tile_image)
from .index import TileIndex, str_bulk_load
from .model import QueryImage, ScoringParams, TiledImage, TileRef

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class BuildConfig:
    tile_size: int = 32
    dim: int = 6
    capacity: int = 64
    metric: str = "l2"
    lam: float = 1.0
    c: float = 23000.0
    bins: int = 64
    window: int = 8

    @property
    def descriptor(self) -> DescriptorConfig:
        return DescriptorConfig(tile_size=self.tile_size, bins=self.bins, window=self.window)

    @property
    def params(self) -> ScoringParams:
        return ScoringParams(lam=self.lam, c=self.c)


@dataclass(eq=False)
class SearchDatabase:
    config: BuildConfig
    pca: PcaModel
    images: dict  # image_id -> TiledImage
    index: TileIndex
    stats: dict = field(default_factory=dict)

    def query_from_pixels(self, pixels) -> QueryImage:
        return make_query(pixels, self.pca, self.config)


def describe(pixels, cfg: BuildConfig):
    """Raw descriptors ``(rows, cols, 256)`` and pixel sums ``(rows, cols)``."""
    tiles = tile_image(pixels, cfg.descriptor)
    return csd_descriptors(tiles, cfg.descriptor), tile_bg_distances(tiles)


def make_query(pixels, pca: PcaModel, cfg: BuildConfig) -> QueryImage:
    raw, bg = describe(pixels, cfg)
    return QueryImage(pca_project(pca, raw), bg)


def build_database(images: Sequence[tuple[str, np.ndarray]],
                   cfg: BuildConfig = BuildConfig()) -> SearchDatabase:
    """Ingest ``(path, pixels)`` pairs; image ids follow input order."""
    if not images:
        raise ValueError("no images to index")
    raws, bgs = [], []
    for _, pixels in images:
        raw, bg = describe(pixels, cfg)
        raws.append(raw)
        bgs.append(bg)
    stacked = np.concatenate([r.reshape(-1, r.shape[-1]) for r in raws])
    if len(stacked) < 2:
        raise ValueError("need at least two tiles to fit PCA")
    pca = pca_fit(stacked, cfg.dim)

    catalog = {}
    points, refs = [], []
    for image_id, ((path, _), raw, bg) in enumerate(zip(images, raws, bgs)):
        reduced = pca_project(pca, raw)
        catalog[image_id] = TiledImage(image_id, reduced, bg, str(path))
        rows, cols = bg.shape
        for r in range(rows):
            for c in range(cols):
                points.append(reduced[r, c])
                refs.append(TileRef(image_id, r, c))
    index = str_bulk_load((np.array(points), refs), cfg.capacity, cfg.metric)
    stats = {"images": len(catalog), "tiles": len(refs),
             "energy_retained": energy_retained(pca), "depth": index.depth()}
    log.info("indexed %(tiles)d tiles from %(images)d images", stats)
    return SearchDatabase(cfg, pca, catalog, index, stats)
