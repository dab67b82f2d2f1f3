"""Discriminator scores and score matrices.

A query tile q matched to a database tile at feature distance r scores
``bg(q) - lam * r - c`` where ``bg(q)`` is the tile's distance from the
background (its raw pixel sum).  Tiles carrying little foreground score
negatively no matter how good the match.
"""

from __future__ import annotations

from enum import Enum
from typing import Sequence

import numpy as np

from .distance import distances
from .model import (Alignment, QueryImage, ScoreMatrix, ScoringParams, TiledImage,
                    overlap)
from .mwcs import dp_max_region


class BoundMode(Enum):
    PAPER_DP = "paper"
    SAFE_POSITIVE_SUM = "safe"

    @classmethod
    def parse(cls, value) -> "BoundMode":
        if isinstance(value, cls):
            return value
        value = str(value).lower().replace("-", "_")
        aliases = {"paper": cls.PAPER_DP, "paper_dp": cls.PAPER_DP, "paperdp": cls.PAPER_DP,
                   "safe": cls.SAFE_POSITIVE_SUM, "safe_positive_sum": cls.SAFE_POSITIVE_SUM,
                   "safepositivesum": cls.SAFE_POSITIVE_SUM}
        try:
            return aliases[value]
        except KeyError:
            raise ValueError(f"unknown bound mode {value!r}") from None


def tile_score(bg_distance: float, r: float, params: ScoringParams) -> float:
    if r < 0:
        raise ValueError("distance must be non-negative")
    return bg_distance - params.lam * r - params.c


def bg_distance(raw_tile, tile_size: int = 32) -> float:
    """Distance of a raw 8-bit tile from the all-black background: its pixel sum."""
    tile = np.asarray(raw_tile)
    if tile.shape != (tile_size, tile_size):
        raise ValueError(f"expected a {tile_size}x{tile_size} tile, got {tile.shape}")
    return float(tile.astype(np.int64).sum())


def score_matrix_actual(query: QueryImage, image: TiledImage, alignment: Alignment,
                        params: ScoringParams, metric: str = "l2") -> ScoreMatrix:
    ov = overlap(query.shape, image.shape, alignment.drow, alignment.dcol)
    if ov is None:
        raise ValueError(f"alignment {alignment} does not overlap the image")
    r0, c0, rows, cols = ov
    q = query.features[r0:r0 + rows, c0:c0 + cols]
    t = image.features[r0 + alignment.drow:r0 + alignment.drow + rows,
                       c0 + alignment.dcol:c0 + alignment.dcol + cols]
    d = distances(q, t, metric)
    scores = query.bg[r0:r0 + rows, c0:c0 + cols] - params.lam * d - params.c
    return ScoreMatrix(np.asarray(scores, dtype=np.float64), (alignment, r0, c0))


def matrix_from_distances(query: QueryImage, dist, params: ScoringParams) -> ScoreMatrix:
    """Query-shaped matrix from a per-tile distance grid (or a scalar)."""
    dist = np.broadcast_to(np.asarray(dist, dtype=np.float64), query.shape)
    if np.any(dist < 0):
        raise ValueError("distances must be non-negative")
    return ScoreMatrix(query.bg - params.lam * dist - params.c)


def score_matrix_uniform(query: QueryImage, d: float, params: ScoringParams) -> ScoreMatrix:
    """Every query tile aligned with a virtual tile at distance ``d``."""
    if d < 0:
        raise ValueError("distance must be non-negative")
    return matrix_from_distances(query, d, params)


def tars_threshold_matrix(query: QueryImage, per_tile_distance: Sequence[float],
                          params: ScoringParams) -> ScoreMatrix:
    """Per-tile distances are given in row-major query order."""
    dist = np.asarray(per_tile_distance, dtype=np.float64)
    if dist.size != query.n:
        raise ValueError(f"expected {query.n} distances, got {dist.size}")
    return matrix_from_distances(query, dist.reshape(query.shape), params)


def safe_positive_sum(scores) -> float:
    scores = np.asarray(scores, dtype=np.float64)
    positive = scores[scores > 0]
    if positive.size:
        return float(positive.sum())
    return float(scores.max())


def upper_bound(m: ScoreMatrix, mode: BoundMode = BoundMode.PAPER_DP) -> float:
    mode = BoundMode.parse(mode)
    if mode is BoundMode.PAPER_DP:
        return dp_max_region(m.scores)[1]
    return safe_positive_sum(m.scores)
