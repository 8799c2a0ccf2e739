"""Per-dimension moment matching of a target matrix onto source statistics.

Each column is treated as an independent normal variable; the target
column is mapped linearly so its mean and variance equal the source's.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, DimensionMismatch

SIGMA_FLOOR = 1e-8


@dataclass(frozen=True, eq=False)
class DomainStats:
    """Population mean and variance of every column."""

    means: np.ndarray
    variances: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.means)

    @property
    def stds(self) -> np.ndarray:
        return np.sqrt(self.variances)


def fit_stats(X) -> DomainStats:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise DataError(f"need a nonempty 2-D matrix, got shape {X.shape}")
    return DomainStats(X.mean(axis=0), X.var(axis=0))


def transform(Xt, source: DomainStats, target: DomainStats) -> np.ndarray:
    """Map each column of ``Xt`` from ``target`` moments onto ``source`` moments.

    ``x -> (x - mu_t) / sd_t * sd_s + mu_s``.  Columns whose target standard
    deviation is below :data:`SIGMA_FLOOR` are only shifted by
    ``mu_s - mu_t``.
    """
    Xt = np.asarray(Xt, dtype=float)
    if Xt.ndim != 2 or not (Xt.shape[1] == source.dim == target.dim):
        raise DimensionMismatch(
            f"matrix {Xt.shape} vs source d={source.dim}, target d={target.dim}"
        )
    sd_t = target.stds
    sd_s = source.stds
    ok = sd_t >= SIGMA_FLOOR
    scale = np.where(ok, sd_s / np.where(ok, sd_t, 1.0), 1.0)
    return (Xt - target.means) * scale + source.means


def match(Xs, Xt) -> np.ndarray:
    """Convenience: ``transform(Xt, fit_stats(Xs), fit_stats(Xt))``."""
    return transform(Xt, fit_stats(Xs), fit_stats(Xt))
