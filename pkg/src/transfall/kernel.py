"""Gaussian kernel primitives.

The kernel is ``k(x, y) = exp(-||x - y||^2 / (2 * bandwidth^2))`` throughout
the package.  Feature maps are never built; everything goes through Gram
matrices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist, pdist, squareform

from .errors import DataError, DimensionMismatch

MAX_BANDWIDTH_PAIRS = 10**6
EXHAUSTIVE_LIMIT = 1000


@dataclass(frozen=True)
class KernelConfig:
    bandwidth: float

    def __post_init__(self):
        if not (math.isfinite(self.bandwidth) and self.bandwidth > 0):
            raise ValueError(f"bandwidth must be finite and > 0, got {self.bandwidth}")

    @property
    def gamma(self) -> float:
        return 1.0 / (2.0 * self.bandwidth**2)


def _as_matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2:
        raise DimensionMismatch(f"expected a 2-D matrix, got shape {X.shape}")
    return X


def eval(cfg: KernelConfig, x, y) -> float:  # noqa: A001 - mirrors k(x, y)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise DimensionMismatch(f"{x.shape} vs {y.shape}")
    diff = x - y
    return float(np.exp(-cfg.gamma * np.dot(diff, diff)))


def gram(cfg: KernelConfig, X) -> np.ndarray:
    """Symmetric Gram matrix of the rows of ``X`` with unit diagonal."""
    X = _as_matrix(X)
    if X.shape[0] == 0:
        raise DataError("gram of an empty matrix")
    # pdist visits each unordered pair once, so symmetry is exact
    K = squareform(np.exp(-cfg.gamma * pdist(X, "sqeuclidean")))
    np.fill_diagonal(K, 1.0)
    return K


def cross(cfg: KernelConfig, X, Y) -> np.ndarray:
    """Kernel values between rows of ``X`` (rows of the result) and ``Y``."""
    X, Y = _as_matrix(X), _as_matrix(Y)
    if X.shape[1] != Y.shape[1]:
        raise DimensionMismatch(f"d={X.shape[1]} vs d={Y.shape[1]}")
    return np.exp(-cfg.gamma * cdist(X, Y, "sqeuclidean"))


def kappa(cfg: KernelConfig, Xs, Xt) -> np.ndarray:
    """Kernel expansion ``kappa_i = (N_s / N_t) * sum_j k(xs_i, xt_j)``."""
    Xs, Xt = _as_matrix(Xs), _as_matrix(Xt)
    if Xt.shape[0] == 0:
        raise DataError("empty target set")
    return (Xs.shape[0] / Xt.shape[0]) * cross(cfg, Xs, Xt).sum(axis=1)


def median_bandwidth(X, seed: int = 0) -> float:
    """Median pairwise Euclidean distance between rows of ``X``.

    All ``i < j`` pairs are used when there are at most 1000 rows; beyond
    that, 10**6 pairs of distinct indices are drawn with ``seed``.
    """
    X = _as_matrix(X)
    n = X.shape[0]
    if n < 2:
        raise DataError("median heuristic needs at least two rows")
    if n <= EXHAUSTIVE_LIMIT:
        dist = pdist(X)
    else:
        rng = np.random.default_rng(seed)
        m = min(n * n, MAX_BANDWIDTH_PAIRS)
        i = rng.integers(0, n, size=m)
        j = (i + rng.integers(1, n, size=m)) % n
        dist = np.sqrt(np.sum((X[i] - X[j]) ** 2, axis=1))
    med = float(np.median(dist))
    if med <= 0.0:
        raise DataError("median pairwise distance is zero; rows are (mostly) identical")
    return med
