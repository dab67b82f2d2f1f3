import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

# The non-capturable example grid, stored with row 0 at the bottom and
# 0-based indices (published cell (r, c) is stored at (r-1, c-1)).
UNCAPTURABLE = np.array([[-1, -1, 10, -1],
                         [-1, 10, 1, 35],
                         [-1, -1, 40, -90]], dtype=float)


def published(*cells):
    """Convert 1-based published cell labels to stored indices."""
    return frozenset((r - 1, c - 1) for r, c in cells)


@pytest.fixture
def uncapturable():
    return UNCAPTURABLE.copy()


@pytest.fixture(scope="session")
def small_db():
    """20 synthetic images with the library defaults (λ=1, c=23000)."""
    from regionsearch.pipeline import BuildConfig, build_database
    from regionsearch.synthetic import SyntheticSpec, generate

    corpus = generate(SyntheticSpec(seed=11, images=20, labels=6, compositions=1))
    db = build_database([(f"img_{im['image_id']:04d}.pgm", im["pixels"])
                         for im in corpus["images"]], BuildConfig(capacity=16))
    return db, corpus


@pytest.fixture(scope="session")
def bench():
    from regionsearch.benchmark import make_benchmark
    return make_benchmark()


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    lines = getattr(acceptance, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
