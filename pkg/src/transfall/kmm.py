"""Importance weights by kernel mean matching.

Solves

    minimize    1/2 b^T (K + jitter I) b - kappa^T b + shrinkage/2 ||b - 1||^2
    subject to  0 <= b_i <= cap,   |mean(b) - 1| <= epsilon

with projected gradient descent.  With a Gaussian kernel of median-heuristic
width, K is numerically singular and the plain objective is minimised by
weights that pile onto a handful of samples; the shrinkage term pulls the
solution toward uniform weights, so identical domains still get b = 1
exactly.  ``shrinkage=0`` gives the unregularised problem.

The projection onto the intersection of the box and the mean band is
computed exactly: it is ``clip(v - tau, 0, cap)`` for the scalar ``tau``
that puts the sum on the violated band edge.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernel
from .errors import DimensionMismatch

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class QpSettings:
    """Solver settings; ``epsilon=None`` means ``(sqrt(N) - 1) / sqrt(N)``."""

    epsilon: float | None = None
    cap: float = 1000.0
    max_iters: int = 20000
    tol: float = 1e-6
    jitter: float = 1e-8
    shrinkage: float = 1.0

    def __post_init__(self):
        if self.epsilon is not None and not (math.isfinite(self.epsilon) and self.epsilon >= 0):
            raise ValueError("epsilon must be finite and >= 0")
        if not (math.isfinite(self.cap) and self.cap > 0):
            raise ValueError("cap must be finite and > 0")
        if not (math.isfinite(self.tol) and self.tol > 0):
            raise ValueError("tol must be finite and > 0")
        if not (math.isfinite(self.jitter) and self.jitter >= 0):
            raise ValueError("jitter must be finite and >= 0")
        if not (math.isfinite(self.shrinkage) and self.shrinkage >= 0):
            raise ValueError("shrinkage must be finite and >= 0")
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")

    def band(self, n: int) -> float:
        if self.epsilon is not None:
            return self.epsilon
        return (math.sqrt(n) - 1.0) / math.sqrt(n)


@dataclass(eq=False)
class KMMResult:
    """Weights plus solver diagnostics.

    ``converged`` is False when ``max_iters`` ran out first; ``beta`` then
    holds the last (feasible) iterate.
    """

    beta: np.ndarray
    converged: bool
    iterations: int
    kkt_residual: float
    epsilon: float
    objectives: list[float] = field(default_factory=list)
    residuals: list[float] = field(default_factory=list)

    @property
    def objective(self) -> float:
        return self.objectives[-1]


def objective(K, kappa, beta, jitter: float = 0.0, shrinkage: float = 0.0) -> float:
    beta = np.asarray(beta, dtype=float)
    dev = beta - 1.0
    return float(
        0.5 * beta @ (K @ beta)
        + 0.5 * jitter * beta @ beta
        - kappa @ beta
        + 0.5 * shrinkage * dev @ dev
    )


def project(v: np.ndarray, lo: float, hi: float, cap: float) -> np.ndarray:
    """Euclidean projection onto ``{0 <= b <= cap, lo <= sum(b) <= hi}``."""
    b = np.clip(v, 0.0, cap)
    s = b.sum()
    if lo <= s <= hi:
        return b
    goal = hi if s > hi else lo
    if goal > cap * len(v) or goal < 0:
        raise ValueError("empty feasible set: band not reachable inside the box")

    # g(t) = sum(clip(v - t, 0, cap)) is nonincreasing and piecewise linear
    # with kinks at v_i and v_i - cap.
    bps = np.unique(np.concatenate([v, v - cap]))

    def g(t):
        return np.clip(v - t, 0.0, cap).sum()

    i, j = 0, len(bps) - 1
    while j - i > 1:
        mid = (i + j) // 2
        if g(bps[mid]) >= goal:
            i = mid
        else:
            j = mid
    t0, t1 = bps[i], bps[j]
    g0, g1 = g(t0), g(t1)
    tau = t0 if g0 == g1 else t0 + (g0 - goal) * (t1 - t0) / (g0 - g1)
    return np.clip(v - tau, 0.0, cap)


def solve_kmm(K, kappa, settings: QpSettings | None = None) -> KMMResult:
    """Projected gradient descent for the KMM quadratic program.

    The step is ``1/L`` with ``L`` the largest absolute row sum of the
    regularised ``K``, an upper bound on its spectral norm, so the objective
    never increases.  Iteration stops once the gradient-mapping norm
    ``L * ||b - P(b - grad / L)||`` falls below ``settings.tol``; that norm
    is reported as the KKT residual.
    """
    settings = settings or QpSettings()
    K = np.asarray(K, dtype=float)
    kappa = np.asarray(kappa, dtype=float)
    n = len(kappa)
    if K.shape != (n, n):
        raise DimensionMismatch(f"K has shape {K.shape}, kappa has length {n}")
    if n == 0:
        raise ValueError("empty problem")
    if not (np.all(np.isfinite(K)) and np.all(np.isfinite(kappa))):
        raise ValueError("non-finite entries in K or kappa")

    eps = settings.band(n)
    lo, hi = n * max(0.0, 1.0 - eps), n * (1.0 + eps)
    # fold jitter and shrinkage into one quadratic: 1/2 b'Ab - c'b + const
    rho = settings.shrinkage
    A = K + (settings.jitter + rho) * np.eye(n)
    c = kappa + rho
    const = 0.5 * rho * n
    lip = float(np.max(np.abs(A).sum(axis=1)))
    if lip <= 0:
        lip = 1.0
    step = 1.0 / lip

    beta = project(np.ones(n), lo, hi, settings.cap)
    grad = A @ beta - c
    objs = [float(0.5 * beta @ (grad - c)) + const]
    resids = []
    converged = False
    it = 0
    while True:
        nxt = project(beta - step * grad, lo, hi, settings.cap)
        resid = lip * float(np.linalg.norm(nxt - beta))
        resids.append(resid)
        if resid < settings.tol:
            converged = True
            break
        if it >= settings.max_iters:
            break
        beta = nxt
        grad = A @ beta - c
        objs.append(float(0.5 * beta @ (grad - c)) + const)
        it += 1

    if not converged:
        logger.warning("KMM stopped after %d iterations, KKT residual %.3g", it, resids[-1])
    return KMMResult(
        beta=beta,
        converged=converged,
        iterations=it,
        kkt_residual=resids[-1],
        epsilon=eps,
        objectives=objs,
        residuals=resids,
    )


def kmm_weights(Xs, Xt, cfg: kernel.KernelConfig, settings: QpSettings | None = None) -> KMMResult:
    return solve_kmm(kernel.gram(cfg, Xs), kernel.kappa(cfg, Xs, Xt), settings)


def dump_diagnostics(result: KMMResult, path: str | Path) -> None:
    """Write ``iteration,objective,residual`` rows, one per iterate."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "objective", "residual"])
        for i, (obj, res) in enumerate(zip(result.objectives, result.residuals)):
            w.writerow([i, repr(obj), repr(res)])
