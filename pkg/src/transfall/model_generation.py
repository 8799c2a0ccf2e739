"""Downstream classifiers: multinomial logistic regression and 1-NN.

The logistic model is what gets trained on the target windows with their
estimated labels.  The nearest-neighbour classifier is a comparison
baseline for label transfer.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, DimensionMismatch, SolverError
from .textio import format_header, format_row, parse_header, parse_row


@dataclass(frozen=True)
class LogisticHyper:
    lr: float = 0.1
    l2: float = 1e-4
    max_iters: int = 5000
    tol: float = 1e-6


@dataclass(eq=False)
class LogisticModel:
    """Weights act on standardised features; ``mean``/``scale`` undo that.

    ``weights`` is ``L x (d + 1)`` with the bias in the last column.
    """

    weights: np.ndarray
    mean: np.ndarray
    scale: np.ndarray
    iters: int = 0
    losses: list[float] = field(default_factory=list)

    @property
    def final_loss(self) -> float:
        return self.losses[-1] if self.losses else float("nan")

    @property
    def num_classes(self) -> int:
        return self.weights.shape[0]

    def folded(self) -> tuple[np.ndarray, np.ndarray]:
        """``(W, b)`` such that raw-feature scores are ``X @ W.T + b``."""
        W = self.weights[:, :-1] / self.scale
        b = self.weights[:, -1] - W @ self.mean
        return W, b


def _augment(Z: np.ndarray) -> np.ndarray:
    return np.hstack([Z, np.ones((Z.shape[0], 1))])


def _log_softmax(S: np.ndarray) -> np.ndarray:
    S = S - S.max(axis=1, keepdims=True)
    return S - np.log(np.exp(S).sum(axis=1, keepdims=True))


def loss_and_grad(W, Xaug, Y, l2: float) -> tuple[float, np.ndarray]:
    """Mean cross-entropy plus ``l2/2 * ||W||^2`` (bias column unpenalised)."""
    logp = _log_softmax(Xaug @ W.T)
    n = Xaug.shape[0]
    penal = W.copy()
    penal[:, -1] = 0.0
    loss = -np.sum(Y * logp) / n + 0.5 * l2 * np.sum(penal**2)
    grad = (np.exp(logp) - Y).T @ Xaug / n + l2 * penal
    return float(loss), grad


def fit_logistic(X, y, num_classes: int, hyper: LogisticHyper | None = None) -> LogisticModel:
    """Full-batch gradient descent on the L2-regularised softmax loss.

    Features are standardised with the training moments (constant columns
    keep scale 1).  The step is ``min(lr, 1/M)`` where ``M`` bounds the
    loss curvature, ``0.5 * lambda_max(Xa^T Xa / N) + l2``; this keeps the
    loss sequence nonincreasing.  Classes absent from ``y`` are allowed;
    estimated label sets do not always cover every class.
    """
    hyper = hyper or LogisticHyper()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise DimensionMismatch(f"X {X.shape} vs y {y.shape}")
    if X.shape[0] == 0:
        raise DataError("no training samples")
    if y.min() < 0 or y.max() >= num_classes:
        raise DataError(f"labels outside [0, {num_classes})")

    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale < 1e-12] = 1.0
    Xa = _augment((X - mean) / scale)
    Y = np.eye(num_classes)[y]

    curvature = 0.5 * np.linalg.eigvalsh(Xa.T @ Xa / Xa.shape[0])[-1] + hyper.l2
    step = min(hyper.lr, 1.0 / curvature)

    W = np.zeros((num_classes, Xa.shape[1]))
    loss, grad = loss_and_grad(W, Xa, Y, hyper.l2)
    losses = [loss]
    it = 0
    while it < hyper.max_iters and np.linalg.norm(grad) >= hyper.tol:
        W = W - step * grad
        loss, grad = loss_and_grad(W, Xa, Y, hyper.l2)
        it += 1
        if not np.isfinite(loss):
            raise SolverError(f"non-finite loss at iteration {it}")
        losses.append(loss)
    return LogisticModel(W, mean, scale, it, losses)


def logistic_scores(model: LogisticModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != len(model.mean):
        raise DimensionMismatch(f"X {X.shape} vs model d={len(model.mean)}")
    return _augment((X - model.mean) / model.scale) @ model.weights.T


def predict_logistic(model: LogisticModel, X) -> np.ndarray:
    # softmax is monotone, so the argmax of the raw scores is the same
    return np.argmax(logistic_scores(model, X), axis=1).astype(np.int64)


def fit_predict_nn(Xtrain, ytrain, Xtest, chunk: int = 512) -> np.ndarray:
    """1-nearest-neighbour labels; equal distances go to the lower train index."""
    Xtrain = np.asarray(Xtrain, dtype=float)
    Xtest = np.asarray(Xtest, dtype=float)
    ytrain = np.asarray(ytrain)
    if Xtrain.shape[0] == 0:
        raise DataError("empty training set")
    if Xtrain.ndim != 2 or Xtest.ndim != 2 or Xtrain.shape[1] != Xtest.shape[1]:
        raise DimensionMismatch(f"train {Xtrain.shape} vs test {Xtest.shape}")
    out = np.empty(Xtest.shape[0], dtype=ytrain.dtype)
    for lo in range(0, Xtest.shape[0], chunk):
        block = Xtest[lo:lo + chunk]
        # explicit differences rather than the |a|^2 + |b|^2 - 2ab expansion,
        # so exact duplicates really are at distance zero
        d2 = np.sum((block[:, None, :] - Xtrain[None, :, :]) ** 2, axis=2)
        out[lo:lo + chunk] = ytrain[np.argmin(d2, axis=1)]
    return out


LOGISTIC_KIND = "transfall-logistic-v1"


def save_logistic(model: LogisticModel, path: str | Path) -> None:
    L, cols = model.weights.shape
    lines = [
        format_header(LOGISTIC_KIND, L=L, d=cols - 1, iters=model.iters,
                      final_loss=float(model.final_loss)),
        "mean " + format_row(model.mean),
        "scale " + format_row(model.scale),
        *("weights " + format_row(row) for row in model.weights),
    ]
    Path(path).write_text("\n".join(lines) + "\n")


def load_logistic(path: str | Path) -> LogisticModel:
    lines = Path(path).read_text().splitlines()
    head = parse_header(lines[0], LOGISTIC_KIND)
    L, d = int(head["L"]), int(head["d"])
    mean = parse_row(lines[1].removeprefix("mean "))
    scale = parse_row(lines[2].removeprefix("scale "))
    W = np.stack([parse_row(l.removeprefix("weights ")) for l in lines[3:3 + L]])
    if W.shape != (L, d + 1) or mean.shape != (d,) or scale.shape != (d,):
        raise DataError(f"{path}: inconsistent model dimensions")
    return LogisticModel(W, mean, scale, int(head["iters"]), [float(head["final_loss"])])
