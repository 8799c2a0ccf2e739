"""Scenario execution: select source/target windows, estimate target labels,
train the downstream classifier, score both against target ground truth.

Target ground truth is read only for validation (every target class must
exist in the source) and scoring, except in the ``upper`` pipeline, whose
whole point is training on it.
"""

from __future__ import annotations

import dataclasses
import logging
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .. import data as data_mod
from .. import kmm, label_transfer, model_generation
from ..data import LabeledDataset
from ..errors import ConfigError, DataError
from .config import DatasetConfig, ScenarioConfig

logger = logging.getLogger(__name__)

ADAPTIVE = {
    "transfall": (True, True),
    "no_adaptation": (False, False),
    "kmm_only": (False, True),
    "vertical_only": (True, False),
}


@dataclass(eq=False)
class RunReport:
    name: str
    group: str
    pipeline: str
    labeling_accuracy: float
    classification_accuracy: float
    per_class_recall: list[float | None]
    majority_rate: float
    n_source: int
    n_target: int
    classes: list[str]
    eval_mode: str
    config: dict
    diagnostics: dict = field(default_factory=dict)
    stage_timings: dict = field(default_factory=dict)
    # in-memory only; written to predictions.csv / model files
    predictions: dict = field(default_factory=dict, repr=False)
    artifacts: dict = field(default_factory=dict, repr=False)

    ok = True

    def to_dict(self) -> dict:
        """Serializable fields; timings and artifacts are excluded so the
        result is reproducible bit for bit."""
        return {
            "name": self.name,
            "group": self.group,
            "pipeline": self.pipeline,
            "labeling_accuracy": self.labeling_accuracy,
            "classification_accuracy": self.classification_accuracy,
            "per_class_recall": self.per_class_recall,
            "majority_rate": self.majority_rate,
            "n_source": self.n_source,
            "n_target": self.n_target,
            "classes": self.classes,
            "eval_mode": self.eval_mode,
            "downstream_protocol": (
                "logistic model trained on all target windows with estimated labels, "
                "scored on the same windows"
                if self.eval_mode == "same_window"
                else "logistic model trained on a seeded target split with estimated labels, "
                "scored on the held-out remainder"
            ),
            "config": self.config,
            "diagnostics": self.diagnostics,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunReport":
        names = {f.name for f in dataclasses.fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})


@dataclass(eq=False)
class RunFailure:
    name: str
    group: str
    pipeline: str
    error: str
    config: dict = field(default_factory=dict)

    ok = False


_corpus_lock = threading.Lock()
_corpus_cache: dict[tuple, LabeledDataset] = {}


def load_corpus(data_root: str | Path, dataset: DatasetConfig | None = None,
                window: int = data_mod.DEFAULT_WINDOW,
                overlap: float = data_mod.DEFAULT_OVERLAP,
                use_cache: bool = True) -> LabeledDataset:
    """Window and featurize every CSV under ``data_root`` matching the globs.

    Files are read in sorted path order; row ``i`` of the result is window
    id ``i``.
    """
    dataset = dataset or DatasetConfig()
    root = Path(data_root)
    key = (str(root.resolve()), dataset, window, overlap)
    if use_cache:
        with _corpus_lock:
            if key in _corpus_cache:
                return _corpus_cache[key]
    if not root.is_dir():
        raise DataError(f"data directory not found: {root}")
    files = sorted({p for pattern in dataset.files for p in root.glob(pattern) if p.is_file()})
    if not files:
        raise DataError(f"no files matching {list(dataset.files)} under {root}")

    streams = [data_mod.load_csv(p, dataset.columns, dataset.classes) for p in files]
    if dataset.classes is not None:
        alphabet = tuple(dataset.classes)
    else:
        alphabet = data_mod._sort_labels({c for s in streams for c in s.classes})
    index = {c: i for i, c in enumerate(alphabet)}
    windows = []
    for s in streams:
        remap = np.array([index[c] for c in s.classes], dtype=np.int64)
        s = dataclasses.replace(s, labels=remap[s.labels], classes=alphabet)
        windows += data_mod.window(s, window, overlap)
    corpus = data_mod.windows_to_dataset(windows, alphabet)
    if use_cache:
        with _corpus_lock:
            _corpus_cache[key] = corpus
    return corpus


def clear_corpus_cache() -> None:
    with _corpus_lock:
        _corpus_cache.clear()


def _mask(corpus: LabeledDataset, selector) -> np.ndarray:
    return np.array(
        [selector.matches(s, d, ds) for s, d, ds in
         zip(corpus.subjects, corpus.devices, corpus.datasets)],
        dtype=bool,
    )


def _qp_settings(h) -> kmm.QpSettings:
    return kmm.QpSettings(epsilon=h.epsilon, cap=h.cap, max_iters=h.max_iters,
                          tol=h.tol, shrinkage=h.shrinkage)


def run_scenario(cfg: ScenarioConfig, data_root: str | Path | None = None,
                 dataset: DatasetConfig | None = None,
                 corpus: LabeledDataset | None = None) -> RunReport:
    """Execute one scenario end to end and score it."""
    h = cfg.hyper
    timings: dict[str, float] = {}
    t0 = time.perf_counter()
    if corpus is None:
        if data_root is None:
            raise ValueError("need either data_root or a preloaded corpus")
        corpus = load_corpus(data_root, dataset, h.window, h.overlap)
    timings["ingest"] = 1e3 * (time.perf_counter() - t0)

    src_mask = _mask(corpus, cfg.source)
    tgt_mask = _mask(corpus, cfg.target)
    if not src_mask.any():
        raise DataError(f"{cfg.name}: source selector matches no windows")
    if not tgt_mask.any():
        raise DataError(f"{cfg.name}: target selector matches no windows")
    if not cfg.allow_overlap:
        pairs = lambda m: set(zip(corpus.subjects[m], corpus.devices[m]))  # noqa: E731
        shared = pairs(src_mask) & pairs(tgt_mask)
        if shared:
            raise ConfigError(
                f"{cfg.name}: source and target share (subject, device) pairs "
                f"{sorted(shared)[:3]}; set allow_overlap to permit this"
            )

    src = corpus.subset(src_mask)
    tgt = corpus.subset(tgt_mask)
    tgt_ids = np.flatnonzero(tgt_mask)
    present = np.unique(src.labels)
    unseen = sorted(set(np.unique(tgt.labels)) - set(present))
    if unseen:
        names = [corpus.classes[i] for i in unseen]
        raise DataError(f"{cfg.name}: target classes {names} are absent from the source")
    local = np.full(corpus.num_classes, -1, dtype=np.int64)
    local[present] = np.arange(len(present))
    L = len(present)
    ys = local[src.labels]

    Xs, Xt = src.features, tgt.features
    if h.standardize:
        mu = Xs.mean(axis=0)
        sd = Xs.std(axis=0)
        sd[sd < 1e-12] = 1.0
        Xs, Xt = (Xs - mu) / sd, (Xt - mu) / sd

    lr_hyper = model_generation.LogisticHyper(max_iters=h.logistic_iters)
    diag: dict = {}
    t0 = time.perf_counter()
    artifacts: dict = {}
    if cfg.pipeline in ADAPTIVE:
        vert, reweight = ADAPTIVE[cfg.pipeline]
        tcfg = label_transfer.TransferConfig(
            vertical=vert, reweight=reweight, lam=h.lam, bandwidth=h.bandwidth,
            qp=_qp_settings(h), seed=h.seed,
        )
        est = label_transfer.estimate_labels(Xs, ys, Xt, tcfg, num_classes=L)
        estimated, train_X = est.labels, est.target_features
        stage = dict(est.diagnostics)
        timings.update({f"label_{k}": v for k, v in stage.pop("timings_ms").items()})
        diag.update(stage)
        artifacts["ridge"] = est.model
        if est.kmm is not None:
            artifacts["kmm"] = est.kmm
            if not est.kmm.converged:
                logger.warning("%s: KMM did not converge", cfg.name)
    elif cfg.pipeline == "nn":
        estimated, train_X = model_generation.fit_predict_nn(Xs, ys, Xt), Xt
    elif cfg.pipeline == "lr":
        m = model_generation.fit_logistic(Xs, ys, L, lr_hyper)
        estimated, train_X = model_generation.predict_logistic(m, Xt), Xt
    elif cfg.pipeline == "upper":
        estimated, train_X = local[tgt.labels], Xt
    else:  # guarded by ScenarioConfig
        raise ConfigError(f"unknown pipeline {cfg.pipeline!r}")
    timings["label_estimation"] = 1e3 * (time.perf_counter() - t0)

    n_t = len(tgt_ids)
    if h.eval_mode == "holdout":
        order = np.random.default_rng(h.seed).permutation(n_t)
        n_train = min(n_t - 1, max(1, int(round(h.holdout_fraction * n_t))))
        split = np.full(n_t, "test", dtype=object)
        split[order[:n_train]] = "train"
    else:
        split = np.full(n_t, "test", dtype=object)
    train = split == "train" if h.eval_mode == "holdout" else np.ones(n_t, dtype=bool)
    test = split == "test"

    t0 = time.perf_counter()
    clf = model_generation.fit_logistic(train_X[train], estimated[train], L, lr_hyper)
    predicted = model_generation.predict_logistic(clf, train_X)
    timings["model_generation"] = 1e3 * (time.perf_counter() - t0)
    artifacts["logistic"] = clf
    diag["logistic_iters"] = clf.iters
    diag["logistic_final_loss"] = clf.final_loss

    est_g = present[estimated]
    pred_g = present[predicted]
    truth = tgt.labels
    labeling = float(np.mean(est_g == truth))
    classification = float(np.mean(pred_g[test] == truth[test]))
    recall = []
    for c in range(corpus.num_classes):
        m = truth == c
        recall.append(float(np.mean(est_g[m] == c)) if m.any() else None)
    counts = np.bincount(truth, minlength=corpus.num_classes)

    return RunReport(
        name=cfg.name,
        group=cfg.group,
        pipeline=cfg.pipeline,
        labeling_accuracy=labeling,
        classification_accuracy=classification,
        per_class_recall=recall,
        majority_rate=float(counts.max() / counts.sum()),
        n_source=int(src_mask.sum()),
        n_target=n_t,
        classes=list(corpus.classes),
        eval_mode=h.eval_mode,
        config=cfg.to_dict(),
        diagnostics=diag,
        stage_timings=timings,
        predictions={
            "window_id": tgt_ids,
            "true_label": np.array([corpus.classes[i] for i in truth], dtype=object),
            "estimated_label": np.array([corpus.classes[i] for i in est_g], dtype=object),
            "predicted_label": np.array([corpus.classes[i] for i in pred_g], dtype=object),
            "split": split,
        },
        artifacts=artifacts,
    )


def _safe_run(cfg, data_root, dataset, corpus):
    try:
        return run_scenario(cfg, data_root, dataset, corpus)
    except Exception as exc:  # reported per run, never aborts the matrix
        logger.error("%s [%s] failed: %s", cfg.name, cfg.pipeline, exc)
        return RunFailure(cfg.name, cfg.group, cfg.pipeline,
                          f"{type(exc).__name__}: {exc}", cfg.to_dict())


@dataclass(eq=False)
class MatrixResult:
    runs: list
    summary: list[dict]


def run_matrix(cfgs: Sequence[ScenarioConfig], data_root: str | Path,
               dataset: DatasetConfig | None = None, workers: int = 1) -> MatrixResult:
    """Run every scenario; results keep config order whatever the schedule."""
    corpora = {}
    for cfg in cfgs:
        key = (cfg.hyper.window, cfg.hyper.overlap)
        if key not in corpora:
            try:
                corpora[key] = load_corpus(data_root, dataset, *key)
            except Exception as exc:
                corpora[key] = exc

    def job(cfg):
        corpus = corpora[(cfg.hyper.window, cfg.hyper.overlap)]
        if isinstance(corpus, Exception):
            return RunFailure(cfg.name, cfg.group, cfg.pipeline,
                              f"{type(corpus).__name__}: {corpus}", cfg.to_dict())
        return _safe_run(cfg, data_root, dataset, corpus)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(job, cfgs))
    else:
        runs = [job(c) for c in cfgs]
    return MatrixResult(runs, summarize(runs))


SUMMARY_FIELDS = (
    "group", "pipeline", "runs", "failed",
    "labeling_mean", "labeling_p25", "labeling_p75",
    "classification_mean", "classification_p25", "classification_p75",
)


def summarize(runs: Sequence) -> list[dict]:
    """Mean and quartiles of both accuracies per (group, pipeline)."""
    buckets: dict[tuple[str, str], list] = {}
    for r in runs:
        buckets.setdefault((r.group, r.pipeline), []).append(r)
    rows = []
    for (group, pipe), members in buckets.items():
        good = [r for r in members if r.ok]
        row = {"group": group, "pipeline": pipe, "runs": len(good),
               "failed": len(members) - len(good)}
        for metric in ("labeling", "classification"):
            vals = np.array([getattr(r, f"{metric}_accuracy") for r in good], dtype=float)
            if len(vals):
                row[f"{metric}_mean"] = float(np.mean(vals))
                row[f"{metric}_p25"] = float(np.percentile(vals, 25))
                row[f"{metric}_p75"] = float(np.percentile(vals, 75))
            else:
                row.update({f"{metric}_{s}": None for s in ("mean", "p25", "p75")})
        rows.append(row)
    return rows
