"""On-disk layout of experiment outputs.

::

    <out>/summary.csv
    <out>/failures.csv                  (only when some run failed)
    <out>/figures/{labeling,classification}_accuracy.png
    <out>/runs/<NNN>-<slug>/report.json
    <out>/runs/<NNN>-<slug>/predictions.csv
    <out>/runs/<NNN>-<slug>/timings.json
    <out>/runs/<NNN>-<slug>/logistic.txt, ridge.txt, ridge.txt.support.bin
    <out>/runs/<NNN>-<slug>/kmm_trace.csv (with hyper.kmm_trace)

Everything except ``timings.json`` is a deterministic function of the
config, data and seed.
"""

from __future__ import annotations

import csv
import json
import logging
import re
from pathlib import Path
from typing import Sequence

import numpy as np

from .. import kmm, label_transfer, model_generation
from ..errors import DataError
from .plotting import accuracy_boxplots
from .runner import SUMMARY_FIELDS, RunFailure, RunReport, summarize

logger = logging.getLogger(__name__)

PRED_FIELDS = ("window_id", "true_label", "estimated_label", "predicted_label", "split")


def _slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", text).strip("_") or "run"


def _dump_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n")


def write_run(run, run_dir: Path) -> None:
    run_dir.mkdir(parents=True, exist_ok=True)
    if not run.ok:
        _dump_json({"name": run.name, "group": run.group, "pipeline": run.pipeline,
                    "error": run.error, "config": run.config}, run_dir / "failure.json")
        return
    _dump_json(run.to_dict(), run_dir / "report.json")
    _dump_json(run.stage_timings, run_dir / "timings.json")
    with (run_dir / "predictions.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(PRED_FIELDS)
        w.writerows(zip(*(run.predictions[k] for k in PRED_FIELDS)))
    if "logistic" in run.artifacts:
        model_generation.save_logistic(run.artifacts["logistic"], run_dir / "logistic.txt")
    if "ridge" in run.artifacts:
        label_transfer.save_ridge(run.artifacts["ridge"], run_dir / "ridge.txt")
    if "kmm" in run.artifacts and run.config.get("hyper", {}).get("kmm_trace"):
        kmm.dump_diagnostics(run.artifacts["kmm"], run_dir / "kmm_trace.csv")


def write_summary(rows: Sequence[dict], path: Path) -> None:
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SUMMARY_FIELDS)
        w.writeheader()
        for row in rows:
            w.writerow({k: "" if row[k] is None else (repr(row[k]) if isinstance(row[k], float)
                                                      else row[k]) for k in SUMMARY_FIELDS})


def render(runs: Sequence, out_dir: Path) -> list[dict]:
    """(Re)write summary.csv, failures.csv and the figures from ``runs``."""
    rows = summarize(runs)
    write_summary(rows, out_dir / "summary.csv")
    failed = [r for r in runs if not r.ok]
    fail_path = out_dir / "failures.csv"
    if failed:
        with fail_path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["name", "group", "pipeline", "error"])
            w.writerows((r.name, r.group, r.pipeline, r.error) for r in failed)
    elif fail_path.exists():
        fail_path.unlink()
    fig_dir = out_dir / "figures"
    fig_dir.mkdir(exist_ok=True)
    for metric in ("labeling", "classification"):
        accuracy_boxplots(runs, metric, fig_dir / f"{metric}_accuracy.png")
    return rows


def write_outputs(runs: Sequence, out_dir: str | Path) -> list[dict]:
    out_dir = Path(out_dir)
    (out_dir / "runs").mkdir(parents=True, exist_ok=True)
    for i, run in enumerate(runs):
        write_run(run, out_dir / "runs" / f"{i:03d}-{_slug(run.name)}-{run.pipeline}")
    return render(runs, out_dir)


def read_predictions(path: Path) -> dict[str, np.ndarray]:
    with path.open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {k: np.array([r[k] for r in rows], dtype=object) for k in PRED_FIELDS}


def recompute(pred: dict[str, np.ndarray]) -> tuple[float, float]:
    """(labeling, classification) accuracy from a predictions table."""
    truth = pred["true_label"]
    labeling = float(np.mean(pred["estimated_label"] == truth))
    test = pred["split"] == "test"
    classification = float(np.mean(pred["predicted_label"][test] == truth[test]))
    return labeling, classification


def read_outputs(in_dir: str | Path, check: bool = True) -> list:
    """Load every run under ``<in_dir>/runs`` in directory order.

    With ``check``, accuracies are recomputed from predictions.csv and a
    mismatch with report.json raises :class:`DataError`.
    """
    run_root = Path(in_dir) / "runs"
    if not run_root.is_dir():
        raise DataError(f"no runs/ directory under {in_dir}")
    runs = []
    for run_dir in sorted(p for p in run_root.iterdir() if p.is_dir()):
        if (run_dir / "failure.json").exists():
            d = json.loads((run_dir / "failure.json").read_text())
            runs.append(RunFailure(d["name"], d["group"], d["pipeline"], d["error"], d["config"]))
            continue
        rep = RunReport.from_dict(json.loads((run_dir / "report.json").read_text()))
        if check:
            lab, cls = recompute(read_predictions(run_dir / "predictions.csv"))
            if lab != rep.labeling_accuracy or cls != rep.classification_accuracy:
                raise DataError(
                    f"{run_dir}: report says ({rep.labeling_accuracy}, "
                    f"{rep.classification_accuracy}), predictions give ({lab}, {cls})"
                )
        runs.append(rep)
    return runs


def format_table(rows: Sequence[dict]) -> str:
    head = ("group", "pipeline", "runs", "failed", "label_mean", "label_p25", "label_p75",
            "clf_mean", "clf_p25", "clf_p75")
    keys = SUMMARY_FIELDS
    body = []
    for row in rows:
        body.append([
            "-" if row[k] is None else (f"{row[k]:.3f}" if isinstance(row[k], float) else str(row[k]))
            for k in keys
        ])
    widths = [max(len(h), *(len(r[i]) for r in body)) for i, h in enumerate(head)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(head, widths))]
    lines += ["  ".join(c.ljust(w) for c, w in zip(r, widths)) for r in body]
    return "\n".join(lines)
