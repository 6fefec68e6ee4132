"""Seeded Gaussian-mixture benchmark data."""

from __future__ import annotations

import numpy as np

from .errors import ParamError
from .graph import Dataset

__all__ = ["gaussian_mixture", "benchmark"]


def gaussian_mixture(n_clusters: int = 5, n_points: int = 2000, dim: int = 50,
                     sigma: float = 1.0, separation: float = 10.0, seed: int = 0) -> Dataset:
    """Isotropic Gaussian clusters around random centres.

    Centres are drawn as ``separation * N(0, I)``; points are split as evenly
    as possible between clusters and labelled ``0 .. n_clusters - 1``.
    """
    if n_clusters < 1 or n_points < n_clusters or dim < 1:
        raise ParamError("need n_points >= n_clusters >= 1 and dim >= 1")
    if not (sigma > 0 and separation >= 0):
        raise ParamError("sigma must be > 0 and separation >= 0")
    rng = np.random.default_rng(seed)
    centres = separation * rng.standard_normal((n_clusters, dim))
    labels = np.arange(n_points) % n_clusters
    X = centres[labels] + sigma * rng.standard_normal((n_points, dim))
    return Dataset(X, labels)


def benchmark(seed: int = 0) -> Dataset:
    """Five touching but linearly separable clusters, 2000 points in 50 dimensions.

    The centre scale is small enough that the k-NN graph keeps some
    inter-cluster edges, so the relative placement of clusters is encoded
    in the graph rather than left to the initialisation.
    """
    return gaussian_mixture(5, 2000, 50, 1.0, 0.7, seed)
