"""Target label estimation by importance-weighted kernel ridge regression.

One regressor per class is fitted on the source set with indicator targets
``y_i = [label_i == m]``.  The coefficients solve

    (lam * diag(beta)^-1 + K) alpha_m = y_m

and a target point receives the class with the largest kernel expansion
``sum_j alpha_m[j] k(xs_j, x)``.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg

from . import kernel, kmm, vertical
from .data import read_feature_cache, write_feature_cache
from .errors import DataError, DimensionMismatch, SolverError
from .textio import format_header, format_row, parse_header, parse_row

logger = logging.getLogger(__name__)

BETA_FLOOR = 1e-6
DEFAULT_LAMBDA = 0.1


@dataclass(eq=False)
class RidgeModel:
    alphas: np.ndarray
    lam: float
    kernel: kernel.KernelConfig
    support: np.ndarray
    beta: np.ndarray

    @property
    def num_classes(self) -> int:
        return self.alphas.shape[0]

    def system_matrix(self, K: np.ndarray | None = None) -> np.ndarray:
        if K is None:
            K = kernel.gram(self.kernel, self.support)
        return K + np.diag(self.lam / self.beta)


def indicator_targets(labels, num_classes: int) -> np.ndarray:
    labels = np.asarray(labels)
    return (labels[:, None] == np.arange(num_classes)[None, :]).astype(float)


def fit_ridge(
    K,
    beta,
    labels,
    num_classes: int,
    lam: float = DEFAULT_LAMBDA,
    *,
    support=None,
    kernel_cfg: kernel.KernelConfig | None = None,
) -> RidgeModel:
    """Solve the weighted ridge normal equations for every class.

    Parameters
    ----------
    K : (N_s, N_s) array
        Source Gram matrix.
    beta : (N_s,) array
        Importance weights; entries below 1e-6 are raised to 1e-6 so the
        diagonal weight matrix can be inverted.
    labels : (N_s,) int array
        Source class ids in ``[0, num_classes)``.
    lam : float
        Ridge penalty, > 0.
    support, kernel_cfg
        Source features and kernel, stored on the model for :func:`predict`.

    Raises
    ------
    DataError
        A class in ``[0, num_classes)`` has no source sample.
    SolverError
        The system matrix is not positive definite.
    """
    K = np.asarray(K, dtype=float)
    n = K.shape[0]
    beta = np.asarray(beta, dtype=float)
    labels = np.asarray(labels, dtype=np.int64)
    if K.shape != (n, n) or beta.shape != (n,) or labels.shape != (n,):
        raise DimensionMismatch(f"K {K.shape}, beta {beta.shape}, labels {labels.shape}")
    if not lam > 0:
        raise ValueError("lambda must be > 0")
    missing = sorted(set(range(num_classes)) - set(labels.tolist()))
    if missing:
        raise DataError(f"classes {missing} have no source samples")

    beta = np.maximum(beta, BETA_FLOOR)
    A = K + np.diag(lam / beta)
    Y = indicator_targets(labels, num_classes)
    try:
        factor = scipy.linalg.cho_factor(A, lower=True, check_finite=True)
    except np.linalg.LinAlgError:
        cond = np.linalg.cond(A)
        raise SolverError(f"ridge system is not positive definite (condition ~ {cond:.3g})") from None
    alpha = scipy.linalg.cho_solve(factor, Y)
    # one step of iterative refinement
    alpha += scipy.linalg.cho_solve(factor, Y - A @ alpha)

    if support is not None:
        support = np.asarray(support, dtype=float)
        if support.shape[0] != n:
            raise DimensionMismatch(f"support has {support.shape[0]} rows, K has {n}")
    return RidgeModel(alphas=alpha.T.copy(), lam=float(lam), kernel=kernel_cfg,
                      support=support, beta=beta)


def argmax_rows(scores: np.ndarray) -> np.ndarray:
    # np.argmax returns the first maximum, i.e. the smaller class id on ties
    return np.argmax(scores, axis=1).astype(np.int64)


def decision_scores(model: RidgeModel, Xt) -> np.ndarray:
    if model.support is None or model.kernel is None:
        raise ValueError("model has no support set / kernel attached")
    Xt = np.asarray(Xt, dtype=float)
    if Xt.ndim != 2 or Xt.shape[1] != model.support.shape[1]:
        raise DimensionMismatch(f"target {Xt.shape} vs support d={model.support.shape[1]}")
    return kernel.cross(model.kernel, Xt, model.support) @ model.alphas.T


def predict(model: RidgeModel, Xt) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(labels, scores)`` with ``scores[i, m] = sum_j alpha_m[j] k(xs_j, xt_i)``."""
    scores = decision_scores(model, Xt)
    return argmax_rows(scores), scores


@dataclass(frozen=True)
class TransferConfig:
    """Which adaptation stages run and with what settings.

    ``bandwidth=None`` selects the median heuristic on the stacked source
    and (transformed) target features.
    """

    vertical: bool = True
    reweight: bool = True
    lam: float = DEFAULT_LAMBDA
    bandwidth: float | None = None
    qp: kmm.QpSettings = field(default_factory=kmm.QpSettings)
    seed: int = 0


@dataclass(eq=False)
class LabelEstimate:
    labels: np.ndarray
    scores: np.ndarray
    beta: np.ndarray
    target_features: np.ndarray
    model: RidgeModel
    kmm: kmm.KMMResult | None
    diagnostics: dict = field(default_factory=dict)


def estimate_labels(Xs, ys, Xt, cfg: TransferConfig | None = None,
                    num_classes: int | None = None) -> LabelEstimate:
    """Full label-estimation layer: moment matching, KMM weights, weighted ridge.

    ``target_features`` on the result is the matrix the labels refer to,
    after moment matching when that stage is enabled.
    """
    cfg = cfg or TransferConfig()
    Xs = np.asarray(Xs, dtype=float)
    Xt = np.asarray(Xt, dtype=float)
    ys = np.asarray(ys, dtype=np.int64)
    if Xs.ndim != 2 or Xt.ndim != 2 or Xs.shape[1] != Xt.shape[1]:
        raise DimensionMismatch(f"source {Xs.shape} vs target {Xt.shape}")
    L = int(num_classes if num_classes is not None else ys.max() + 1)
    timings = {}

    t0 = time.perf_counter()
    Xt_tilde = vertical.match(Xs, Xt) if cfg.vertical else Xt
    timings["vertical"] = 1e3 * (time.perf_counter() - t0)

    t0 = time.perf_counter()
    bw = cfg.bandwidth or kernel.median_bandwidth(np.vstack([Xs, Xt_tilde]), seed=cfg.seed)
    kcfg = kernel.KernelConfig(bw)
    K = kernel.gram(kcfg, Xs)
    timings["gram"] = 1e3 * (time.perf_counter() - t0)

    t0 = time.perf_counter()
    result = None
    if cfg.reweight:
        result = kmm.solve_kmm(K, kernel.kappa(kcfg, Xs, Xt_tilde), cfg.qp)
        beta = result.beta
    else:
        beta = np.ones(len(Xs))
    timings["kmm"] = 1e3 * (time.perf_counter() - t0)

    t0 = time.perf_counter()
    model = fit_ridge(K, beta, ys, L, cfg.lam, support=Xs, kernel_cfg=kcfg)
    labels, scores = predict(model, Xt_tilde)
    timings["ridge"] = 1e3 * (time.perf_counter() - t0)

    diag = {
        "bandwidth": bw,
        "beta_min": float(beta.min()),
        "beta_max": float(beta.max()),
        "beta_mean": float(beta.mean()),
        "kmm_converged": None if result is None else result.converged,
        "kmm_iterations": None if result is None else result.iterations,
        "kmm_kkt_residual": None if result is None else result.kkt_residual,
        "timings_ms": timings,
    }
    return LabelEstimate(labels, scores, beta, Xt_tilde, model, result, diag)


RIDGE_KIND = "transfall-ridge-v1"


def save_ridge(model: RidgeModel, path: str | Path, support_path: str | Path | None = None) -> None:
    """Write the model as text; the support matrix goes to a binary feature cache.

    ``support_path`` defaults to ``<path>.support.bin`` and is stored in the
    header relative to the model file's directory.
    """
    path = Path(path)
    support_path = Path(support_path) if support_path else path.with_suffix(path.suffix + ".support.bin")
    write_feature_cache(support_path, model.support)
    L, n = model.alphas.shape
    lines = [
        format_header(RIDGE_KIND, L=L, N_s=n, **{"lambda": model.lam},
                      bandwidth=model.kernel.bandwidth),
        f"support={support_path.name if support_path.parent == path.parent else support_path}",
        "beta " + format_row(model.beta),
        *("alpha " + format_row(row) for row in model.alphas),
    ]
    path.write_text("\n".join(lines) + "\n")


def load_ridge(path: str | Path) -> RidgeModel:
    path = Path(path)
    lines = path.read_text().splitlines()
    head = parse_header(lines[0], RIDGE_KIND)
    L, n = int(head["L"]), int(head["N_s"])
    ref = lines[1].partition("=")[2]
    ref_path = Path(ref) if Path(ref).is_absolute() else path.parent / ref
    support = read_feature_cache(ref_path)
    beta = parse_row(lines[2].removeprefix("beta "))
    alphas = np.stack([parse_row(l.removeprefix("alpha ")) for l in lines[3:3 + L]])
    if alphas.shape != (L, n) or support.shape[0] != n or beta.shape != (n,):
        raise DataError(f"{path}: inconsistent model dimensions")
    return RidgeModel(alphas, float(head["lambda"]), kernel.KernelConfig(float(head["bandwidth"])),
                      support, beta)
