"""Tiling, tile descriptors and PCA reduction.

The descriptor is a structure histogram in the spirit of colour-structure
descriptors: an 8x8 window slides over the tile at stride 8 and, for each of
64 grey-level bins, we count how many window positions contain that bin.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class DescriptorConfig:
    tile_size: int = 32
    bins: int = 64
    window: int = 8
    output_dim: int = 256

    def __post_init__(self):
        if self.tile_size % self.window:
            raise ValueError("tile size must be a multiple of the window size")
        if self.bins > self.output_dim or 256 % self.bins:
            raise ValueError("bins must divide 256 and fit in the output dimension")

    @property
    def positions(self) -> int:
        return (self.tile_size // self.window) ** 2


def tile_image(pixels, cfg: DescriptorConfig = DescriptorConfig()) -> np.ndarray:
    """Split an image into a ``(rows, cols, tile, tile)`` grid.

    Partial tiles on the far edges are padded with black.
    """
    pixels = np.asarray(pixels)
    if pixels.ndim != 2 or pixels.size == 0:
        raise ValueError("expected a non-empty 2-D grayscale image")
    ts = cfg.tile_size
    h, w = pixels.shape
    rows, cols = -(-h // ts), -(-w // ts)
    padded = np.zeros((rows * ts, cols * ts), dtype=pixels.dtype)
    padded[:h, :w] = pixels
    return padded.reshape(rows, ts, cols, ts).swapaxes(1, 2)


def csd_descriptors(tiles, cfg: DescriptorConfig = DescriptorConfig()) -> np.ndarray:
    """Descriptors for a stack of tiles, shape ``(..., tile, tile) -> (..., output_dim)``."""
    tiles = np.asarray(tiles)
    ts, w = cfg.tile_size, cfg.window
    if tiles.shape[-2:] != (ts, ts):
        raise ValueError(f"tiles must be {ts}x{ts}, got {tiles.shape[-2:]}")
    lead = tiles.shape[:-2]
    flat = tiles.reshape(-1, ts, ts).astype(np.int64)
    if flat.size and (flat.min() < 0 or flat.max() > 255):
        raise ValueError("tiles must hold 8-bit intensities")
    n, nw = flat.shape[0], ts // w
    q = flat // (256 // cfg.bins)
    # (n, window positions, pixels per window)
    q = q.reshape(n, nw, w, nw, w).transpose(0, 1, 3, 2, 4).reshape(n, nw * nw, w * w)
    present = np.zeros((n, nw * nw, cfg.bins), dtype=bool)
    present[np.arange(n)[:, None, None], np.arange(nw * nw)[None, :, None], q] = True
    out = np.zeros((n, cfg.output_dim))
    out[:, :cfg.bins] = present.sum(axis=1)
    return out.reshape(*lead, cfg.output_dim)


def csd_descriptor(tile, cfg: DescriptorConfig = DescriptorConfig()) -> np.ndarray:
    tile = np.asarray(tile)
    if tile.shape != (cfg.tile_size, cfg.tile_size):
        raise ValueError(f"expected a {cfg.tile_size}x{cfg.tile_size} tile, got {tile.shape}")
    return csd_descriptors(tile, cfg)


def tile_bg_distances(tiles) -> np.ndarray:
    """Pixel sums of a ``(..., tile, tile)`` stack."""
    return np.asarray(tiles).astype(np.int64).sum(axis=(-2, -1)).astype(np.float64)


@dataclass(frozen=True, eq=False)
class PcaModel:
    mean: np.ndarray
    components: np.ndarray  # (out_dim, in_dim), orthonormal rows
    eigenvalues: np.ndarray  # kept eigenvalues, non-increasing
    total_variance: float

    @property
    def in_dim(self) -> int:
        return self.mean.shape[0]

    @property
    def out_dim(self) -> int:
        return self.components.shape[0]


def pca_fit(vectors, out_dim: int) -> PcaModel:
    x = np.asarray(vectors, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("need at least two vectors")
    if not 1 <= out_dim <= x.shape[1]:
        raise ValueError(f"out_dim must be in [1, {x.shape[1]}]")
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / x.shape[0]
    vals, vecs = np.linalg.eigh(cov)
    order = np.argsort(vals, kind="stable")[::-1]
    vals = np.clip(vals[order], 0.0, None)
    vecs = vecs[:, order].T
    # deterministic sign: largest-magnitude coordinate positive
    pivots = np.argmax(np.abs(vecs), axis=1)
    signs = np.sign(vecs[np.arange(len(vecs)), pivots])
    signs[signs == 0] = 1.0
    vecs = vecs * signs[:, None]
    return PcaModel(mean, vecs[:out_dim].copy(), vals[:out_dim].copy(), float(vals.sum()))


def pca_project(model: PcaModel, v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.shape[-1] != model.in_dim:
        raise ValueError(f"expected dimension {model.in_dim}, got {v.shape[-1]}")
    return (v - model.mean) @ model.components.T


def pca_reconstruct(model: PcaModel, coords) -> np.ndarray:
    return np.asarray(coords) @ model.components + model.mean


def energy_retained(model: PcaModel) -> float:
    if model.total_variance <= 0:
        return 1.0
    return float(min(1.0, model.eigenvalues.sum() / model.total_variance))
