"""Feature-space metrics.

Every distance in the package goes through :func:`distances` so that a
query/tile pair gets bit-identical values whether it is computed in a
nearest-neighbour cursor or while filling a score matrix.
"""

import numpy as np

METRICS = ("l2", "l1")


def check_metric(metric: str) -> str:
    metric = metric.lower()
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")
    return metric


def distances(a, b, metric="l2"):
    """Broadcast distance between vectors along the last axis."""
    diff = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    if metric == "l2":
        return np.sqrt(np.sum(diff * diff, axis=-1))
    if metric == "l1":
        return np.sum(np.abs(diff), axis=-1)
    raise ValueError(f"unknown metric {metric!r}")


def distance(a, b, metric="l2") -> float:
    return float(distances(a, b, metric))


def pairwise(x, y, metric="l2"):
    """(len(x), len(y)) distance table."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    return distances(x[:, None, :], y[None, :, :], metric)
