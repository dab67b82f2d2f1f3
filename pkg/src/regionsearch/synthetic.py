"""Seeded synthetic corpora: textured regions of interest on plain backgrounds.

Every label owns one sprite (a tile-aligned, 4-connected mask filled with a
label-specific texture).  Images place sprites on a black or gray canvas,
optionally occluding a fraction of the sprite's tiles with a solid block,
and a few images hold a two-sprite composition.  Queries render each sprite
(and each composition) on black with a one-tile margin.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .pgm import write_pgm

BACKGROUNDS = {"black": 0, "gray": 128}
OCCLUDER = 200


class SyntheticSpecError(ValueError):
    pass


@dataclass
class SyntheticSpec:
    seed: int = 0
    images: int = 50
    canvas_tiles: tuple = (6, 6)
    tile_size: int = 32
    labels: int = 9
    roi_tiles: list = field(default_factory=lambda: [[2, 2], [2, 3], [3, 2]])
    rois_per_image: list = field(default_factory=lambda: [1, 2])
    backgrounds: list = field(default_factory=lambda: ["black", "gray"])
    occlusions: list = field(default_factory=lambda: [0.0, 0.25, 0.5])
    compositions: int = 3
    noise: int = 2
    margin: int = 1

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticSpec":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise SyntheticSpecError(f"unknown synthetic spec keys: {sorted(unknown)}")
        spec = cls(**d)
        spec.canvas_tiles = tuple(spec.canvas_tiles)
        spec.validate()
        return spec

    def validate(self):
        ch, cw = self.canvas_tiles
        for h, w in self.roi_tiles:
            if h > ch or w > cw:
                raise SyntheticSpecError(f"ROI of {h}x{w} tiles does not fit a {ch}x{cw} canvas")
        for b in self.backgrounds:
            if b not in BACKGROUNDS:
                raise SyntheticSpecError(f"unknown background {b!r}")
        if any(not 0 <= f < 1 for f in self.occlusions):
            raise SyntheticSpecError("occlusion fractions must lie in [0, 1)")
        if self.labels < 1 or self.images < 1:
            raise SyntheticSpecError("need at least one label and one image")
        if self.compositions and self.labels < 2:
            raise SyntheticSpecError("compositions need two labels")


@dataclass
class Sprite:
    label: int
    mask: np.ndarray  # (h, w) bool, tile units
    pixels: np.ndarray  # (h*ts, w*ts) uint8, masked-out tiles are 0


def _connected(mask: np.ndarray) -> bool:
    from .model import is_connected
    return is_connected(list(zip(*np.nonzero(mask))))


def make_sprite(label: int, shape, ts: int, rng: np.random.Generator) -> Sprite:
    h, w = shape
    mask = np.ones((h, w), dtype=bool)
    if h * w >= 6 and rng.random() < 0.5:
        r = rng.choice([0, h - 1])
        c = rng.choice([0, w - 1])
        mask[r, c] = False
        if not _connected(mask):
            mask[r, c] = True
    yy, xx = np.mgrid[0:ts, 0:ts]
    pixels = np.zeros((h * ts, w * ts), dtype=np.uint8)
    kind = label % 5
    for r in range(h):
        for c in range(w):
            if not mask[r, c]:
                continue
            lo = int(rng.integers(40, 110))
            hi = int(rng.integers(150, 250))
            period = int(rng.choice([2, 4, 8]))
            if kind == 0:
                on = (yy // period) % 2 == 0
            elif kind == 1:
                on = (xx // period) % 2 == 0
            elif kind == 2:
                on = ((yy // period) + (xx // period)) % 2 == 0
            elif kind == 3:
                on = ((yy + xx) // period) % 2 == 0
            else:
                on = ((yy % (2 * period)) < period) & ((xx % (2 * period)) < period)
            tile = np.where(on, hi, lo)
            pixels[r * ts:(r + 1) * ts, c * ts:(c + 1) * ts] = tile
    return Sprite(label, mask, pixels)


def _paste(canvas, sprite: Sprite, r0: int, c0: int, ts: int):
    for r, c in zip(*np.nonzero(sprite.mask)):
        canvas[(r0 + r) * ts:(r0 + r + 1) * ts, (c0 + c) * ts:(c0 + c + 1) * ts] = \
            sprite.pixels[r * ts:(r + 1) * ts, c * ts:(c + 1) * ts]


def _noisy(pixels, noise: int, rng) -> np.ndarray:
    if noise <= 0:
        return pixels.astype(np.uint8)
    jitter = rng.integers(-noise, noise + 1, size=pixels.shape)
    return np.clip(pixels.astype(np.int64) + jitter, 0, 255).astype(np.uint8)


def generate(spec: SyntheticSpec) -> dict:
    """Build the corpus in memory.

    Returns ``{"images": [...], "queries": [...], "sprites": [...]}`` where
    each image/query record carries its pixels under ``"pixels"``.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    ts = spec.tile_size
    ch, cw = spec.canvas_tiles
    sprites = [make_sprite(lab, spec.roi_tiles[int(rng.integers(len(spec.roi_tiles)))], ts, rng)
               for lab in range(spec.labels)]
    pair = (0, 1) if spec.compositions else None
    if pair:
        a, b = sprites[pair[0]], sprites[pair[1]]
        if max(a.mask.shape[0], b.mask.shape[0]) > ch or \
                a.mask.shape[1] + 1 + b.mask.shape[1] > cw:
            raise SyntheticSpecError("composition does not fit the canvas")

    images = []
    next_label = 0
    for image_id in range(spec.images):
        bg_name = spec.backgrounds[int(rng.integers(len(spec.backgrounds)))]
        canvas = np.full((ch * ts, cw * ts), BACKGROUNDS[bg_name], dtype=np.uint8)
        taken = np.zeros((ch, cw), dtype=bool)
        placements = []
        if pair and image_id < spec.compositions:
            a, b = sprites[pair[0]], sprites[pair[1]]
            r0 = int(rng.integers(0, ch - max(a.mask.shape[0], b.mask.shape[0]) + 1))
            span = a.mask.shape[1] + 1 + b.mask.shape[1]
            c0 = int(rng.integers(0, cw - span + 1))
            plan = [(a, r0, c0, 0.0), (b, r0, c0 + a.mask.shape[1] + 1, 0.0)]
        else:
            count = int(rng.choice(spec.rois_per_image))
            plan = []
            for _ in range(count):
                sp = sprites[next_label % spec.labels]
                next_label += 1
                h, w = sp.mask.shape
                spots = [(r, c) for r in range(ch - h + 1) for c in range(cw - w + 1)
                         if not taken[max(r - 1, 0):r + h + 1, max(c - 1, 0):c + w + 1].any()]
                if not spots:
                    continue
                r, c = spots[int(rng.integers(len(spots)))]
                taken[r:r + h, c:c + w] = True
                occ = float(spec.occlusions[int(rng.integers(len(spec.occlusions)))])
                plan.append((sp, r, c, occ))
        for sp, r, c, occ in plan:
            _paste(canvas, sp, r, c, ts)
            tiles = [(int(r + i), int(c + j)) for i, j in zip(*np.nonzero(sp.mask))]
            n_occ = int(round(occ * len(tiles)))
            n_occ = min(n_occ, len(tiles) - 1)
            hidden = []
            if n_occ:
                picks = rng.choice(len(tiles), size=n_occ, replace=False)
                hidden = sorted(tiles[int(p)] for p in picks)
                for i, j in hidden:
                    canvas[i * ts:(i + 1) * ts, j * ts:(j + 1) * ts] = OCCLUDER
            visible = [t for t in tiles if t not in hidden]
            placements.append({"label": sp.label, "bbox": [int(r), int(c), *map(int, sp.mask.shape)],
                               "tiles": [list(t) for t in visible],
                               "occluded_tiles": [list(t) for t in hidden],
                               "occlusion": occ})
        images.append({"image_id": image_id, "background": bg_name,
                       "placements": placements, "pixels": _noisy(canvas, spec.noise, rng)})

    queries = []
    m = spec.margin
    groups = [[lab] for lab in range(spec.labels)]
    if pair:
        groups.append(list(pair))
    for qid, labels in enumerate(groups):
        parts = [sprites[lab] for lab in labels]
        h = max(p.mask.shape[0] for p in parts)
        w = sum(p.mask.shape[1] for p in parts) + len(parts) - 1
        canvas = np.zeros(((h + 2 * m) * ts, (w + 2 * m) * ts), dtype=np.uint8)
        col = m
        for p in parts:
            _paste(canvas, p, m, col, ts)
            col += p.mask.shape[1] + 1
        true = sorted({(im["image_id"], pl["label"]) for im in images
                       for pl in im["placements"] if pl["label"] in labels})
        queries.append({"query_id": f"q{qid:03d}", "labels": labels,
                        "true": [list(t) for t in true],
                        "pixels": _noisy(canvas, spec.noise, rng)})
    return {"images": images, "queries": queries, "sprites": sprites}


def write_corpus(spec: SyntheticSpec, out_dir: str | os.PathLike) -> dict:
    """Write images, queries and ``ground_truth.json``; returns the ground truth."""
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    (out / "queries").mkdir(parents=True, exist_ok=True)
    corpus = generate(spec)
    truth = {"spec": {**asdict(spec), "canvas_tiles": list(spec.canvas_tiles)},
             "images": [], "queries": []}
    for im in corpus["images"]:
        name = f"images/img_{im['image_id']:04d}.pgm"
        write_pgm(out / name, im["pixels"])
        truth["images"].append({k: v for k, v in im.items() if k != "pixels"} | {"path": name})
    for q in corpus["queries"]:
        name = f"queries/{q['query_id']}.pgm"
        write_pgm(out / name, q["pixels"])
        truth["queries"].append({k: v for k, v in q.items() if k != "pixels"} | {"path": name})
    with open(out / "ground_truth.json", "w") as fh:
        json.dump(truth, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return truth
