"""Domain types shared by the scoring, MWCS, index and search modules.

Feature vectors are plain 1-D numpy float arrays; tile grids are stored as
``(rows, cols, dim)`` arrays. Matrix cells are ``(row, col)`` pairs with
row 0 at the bottom of the matrix.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Optional

import numpy as np

Cell = tuple[int, int]


class TileRef(NamedTuple):
    image_id: int
    row: int
    col: int


class Alignment(NamedTuple):
    """Offset of query cell (0, 0) relative to image tile (0, 0)."""

    image_id: int
    drow: int
    dcol: int


@dataclass(frozen=True, eq=False)
class TiledImage:
    """A database image as a grid of tile feature vectors.

    ``bg`` holds the per-tile background distance (pixel sum) so the same
    object can serve as a query.
    """

    image_id: int
    features: np.ndarray  # (rows, cols, dim)
    bg: np.ndarray  # (rows, cols)
    path: str = ""

    def __post_init__(self):
        if self.features.ndim != 3 or self.features.shape[0] < 1 or self.features.shape[1] < 1:
            raise ValueError("tile grid must be (rows>=1, cols>=1, dim)")
        if self.bg.shape != self.features.shape[:2]:
            raise ValueError("bg grid shape does not match tile grid")
        if not np.all(np.isfinite(self.features)):
            raise ValueError("feature vectors must be finite")

    @property
    def rows(self) -> int:
        return self.features.shape[0]

    @property
    def cols(self) -> int:
        return self.features.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.features.shape[0], self.features.shape[1]


@dataclass(frozen=True, eq=False)
class QueryImage:
    """Query tiles: reduced feature vectors plus raw-pixel background distances."""

    features: np.ndarray  # (rows, cols, dim)
    bg: np.ndarray  # (rows, cols)

    def __post_init__(self):
        if self.features.ndim != 3 or self.features.shape[0] < 1 or self.features.shape[1] < 1:
            raise ValueError("query grid must be (rows>=1, cols>=1, dim)")
        if self.bg.shape != self.features.shape[:2]:
            raise ValueError("bg grid shape does not match query grid")
        if np.any(self.bg < 0):
            raise ValueError("background distances must be non-negative")

    @property
    def rows(self) -> int:
        return self.features.shape[0]

    @property
    def cols(self) -> int:
        return self.features.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.features.shape[0], self.features.shape[1]

    @property
    def n(self) -> int:
        return self.rows * self.cols

    @classmethod
    def from_image(cls, image: TiledImage) -> "QueryImage":
        return cls(image.features.copy(), image.bg.copy())


@dataclass(frozen=True)
class ScoringParams:
    """Discriminator parameters: ``score = bg - lam * r - c``.

    ``background`` is the reference background pixel value; 0 is pure black.
    """

    lam: float = 1.0
    c: float = 23000.0
    background: int = 0

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lambda must be positive")


@dataclass(frozen=True, eq=False)
class ScoreMatrix:
    """Scores for one alignment (or a virtual/bound alignment when origin is None).

    ``origin`` is ``(alignment, q_row0, q_col0)``: matrix cell (i, j) scores
    query tile ``(q_row0 + i, q_col0 + j)`` against image tile
    ``(q_row0 + i + drow, q_col0 + j + dcol)``.
    """

    scores: np.ndarray
    origin: Optional[tuple[Alignment, int, int]] = None

    def __post_init__(self):
        if self.scores.ndim != 2 or self.scores.size == 0:
            raise ValueError("score matrix must be a non-empty 2-D array")

    @property
    def rows(self) -> int:
        return self.scores.shape[0]

    @property
    def cols(self) -> int:
        return self.scores.shape[1]


@dataclass(frozen=True)
class Region:
    cells: frozenset
    score: float

    def __post_init__(self):
        if not self.cells:
            raise ValueError("a region needs at least one cell")

    def sorted_cells(self) -> list[Cell]:
        return sorted(self.cells)


@dataclass(frozen=True)
class RankedMatch:
    alignment: Alignment
    region: Region

    @property
    def score(self) -> float:
        return self.region.score

    def image_tiles(self) -> list[tuple[int, int]]:
        """Image tile positions covered by the region."""
        r0 = max(self.alignment.drow, 0)
        c0 = max(self.alignment.dcol, 0)
        return sorted((i + r0, j + c0) for i, j in self.region.cells)

    def query_tiles(self) -> list[tuple[int, int]]:
        r0 = max(-self.alignment.drow, 0)
        c0 = max(-self.alignment.dcol, 0)
        return sorted((i + r0, j + c0) for i, j in self.region.cells)


def rank_key(m: RankedMatch) -> tuple:
    """Global result order: score desc, then image id, drow, dcol ascending."""
    a = m.alignment
    return (-m.score, a.image_id, a.drow, a.dcol)


def region_sum(matrix: ScoreMatrix | np.ndarray, cells: Iterable[Cell]) -> float:
    scores = matrix.scores if isinstance(matrix, ScoreMatrix) else np.asarray(matrix)
    rows, cols = scores.shape
    total = 0.0
    for i, j in cells:
        if not (0 <= i < rows and 0 <= j < cols):
            raise IndexError(f"cell {(i, j)} outside {rows}x{cols} matrix")
        total += float(scores[i, j])
    return total


def neighbors4(cell: Cell) -> tuple[Cell, Cell, Cell, Cell]:
    i, j = cell
    return (i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)


def is_connected(cells: Iterable[Cell]) -> bool:
    """True iff the cell set is 4-connected."""
    cells = set(map(tuple, cells))
    if not cells:
        raise ValueError("is_connected needs a non-empty cell set")
    start = next(iter(cells))
    seen = {start}
    todo = deque([start])
    while todo:
        for nb in neighbors4(todo.popleft()):
            if nb in cells and nb not in seen:
                seen.add(nb)
                todo.append(nb)
    return len(seen) == len(cells)


def overlap(query_shape: tuple[int, int], image_shape: tuple[int, int],
            drow: int, dcol: int) -> Optional[tuple[int, int, int, int]]:
    """Overlap of a query grid translated by (drow, dcol) over an image grid.

    Returns ``(q_row0, q_col0, rows, cols)`` or None when nothing overlaps.
    """
    qr, qc = query_shape
    ir, ic = image_shape
    r0, r1 = max(0, -drow), min(qr, ir - drow)
    c0, c1 = max(0, -dcol), min(qc, ic - dcol)
    if r1 <= r0 or c1 <= c0:
        return None
    return r0, c0, r1 - r0, c1 - c0
