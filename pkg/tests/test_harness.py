import csv
import dataclasses
import json
import statistics
from pathlib import Path

import numpy as np
import pytest
import yaml

from transfall import cli, kernel, label_transfer, synthetic
from transfall.data import LabeledDataset
from transfall.errors import ConfigError, DataError
from transfall.harness import (
    Hyper,
    ScenarioConfig,
    Selector,
    load_config,
    load_corpus,
    parse_config,
    round_robin,
    run_matrix,
    run_scenario,
    summarize,
)
from transfall.harness.report import read_outputs, read_predictions, recompute, write_outputs

FAST = Hyper(logistic_iters=200)


def scenario(pipe, src, tgt, hyper=FAST, **kw):
    return ScenarioConfig(kw.pop("name", "s"), pipe, Selector.from_dict(src),
                          Selector.from_dict(tgt), hyper=hyper, **kw)


@pytest.fixture(scope="module")
def corpus(corpus_dir):
    return load_corpus(corpus_dir)


# -- config -----------------------------------------------------------------

def test_parse_config_full():
    raw = {
        "schema_version": 1,
        "dataset": {"files": "*.csv", "classes": ["sit", "walk"]},
        "defaults": {"lambda": 0.5, "bandwidth": "median", "window": 64},
        "scenarios": [{"name": "p", "pipelines": ["transfall", "nn"],
                       "source": {"device": "s3_1"}, "target": {"device": ["x", "y"]},
                       "hyper": {"cap": 5}}],
        "matrix": [{"key": "subject", "values": ["a", "b", "c"], "pipelines": ["lr"],
                    "group": "cs", "fixed": {"device": ["s3_1"]}}],
    }
    exp = parse_config(raw)
    assert exp.dataset.files == ("*.csv",)
    assert exp.dataset.classes == ("sit", "walk")
    assert [s.pipeline for s in exp.scenarios[:2]] == ["transfall", "nn"]
    first = exp.scenarios[0]
    assert first.hyper.lam == 0.5 and first.hyper.cap == 5 and first.hyper.bandwidth is None
    assert first.target.device == ("x", "y")
    rr = exp.scenarios[2:]
    assert len(rr) == 6 and rr[0].name == "cs:a->b" and rr[0].hyper.window == 64
    assert rr[0].source.device == ("s3_1",) and rr[0].source.subject == ("a",)


@pytest.mark.parametrize("raw, match", [
    ({"schema_version": 2, "scenarios": []}, "schema_version"),
    ({"schema_version": 1, "bogus": 1}, "top-level"),
    ({"schema_version": 1}, "no scenarios"),
    ({"schema_version": 1, "scenarios": [{"name": "x", "pipeline": "magic"}]}, "pipeline"),
    ({"schema_version": 1, "defaults": {"lambda": 0}, "scenarios": [{"name": "x"}]}, "lambda"),
    ({"schema_version": 1, "defaults": {"gamma": 1}, "scenarios": [{"name": "x"}]}, "gamma"),
    ({"schema_version": 1, "scenarios": [{"name": "x", "source": {"phone": 1}}]}, "selector"),
    ({"schema_version": 1, "matrix": [{"key": "subject", "values": ["a"]}]}, "two distinct"),
    ({"schema_version": 1, "defaults": {"eval_mode": "cv"}, "scenarios": [{"name": "x"}]}, "eval_mode"),
])
def test_parse_config_errors(raw, match):
    with pytest.raises(ConfigError, match=match):
        parse_config(raw)


def test_load_config_missing_and_malformed(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "nope.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("schema_version: [1\n")
    with pytest.raises(ConfigError):
        load_config(bad)


def test_round_robin_count():
    cfgs = round_robin("subject", [str(i) for i in range(9)], ["transfall"])
    assert len(cfgs) == 72
    assert len({(c.source.subject, c.target.subject) for c in cfgs}) == 72
    assert all(c.source.subject != c.target.subject for c in cfgs)


# -- runner -----------------------------------------------------------------

def test_round_robin_matrix_mean(tmp_path):
    subjects = [f"u{i}" for i in range(9)]
    synthetic.write_corpus(tmp_path, subjects, ["s3_1"], seconds_per_activity=4.0)
    cfgs = round_robin("subject", subjects, ["nn"], group="rr", hyper=Hyper(logistic_iters=20))
    res = run_matrix(cfgs, tmp_path)
    assert len(res.runs) == 72 and all(r.ok for r in res.runs)
    (row,) = res.summary
    assert row["runs"] == 72 and row["failed"] == 0
    want = statistics.fmean(r.labeling_accuracy for r in res.runs)
    assert row["labeling_mean"] == pytest.approx(want, abs=1e-12)
    assert row["labeling_p25"] <= row["labeling_p75"]
    names = [r.name for r in res.runs]
    assert names == [c.name for c in cfgs]


def test_identity_split_equals_ridge_train_accuracy(corpus):
    sel = {"subject": "a", "device": "s3_1"}
    rep = run_scenario(scenario("no_adaptation", sel, sel, allow_overlap=True), corpus=corpus)
    # independent recomputation of the training accuracy
    ds = corpus.subset(np.array([s == "a" and d == "s3_1"
                                 for s, d in zip(corpus.subjects, corpus.devices)]))
    X = (ds.features - ds.features.mean(0)) / ds.features.std(0)
    present = np.unique(ds.labels)
    y = np.searchsorted(present, ds.labels)
    cfg = kernel.KernelConfig(kernel.median_bandwidth(np.vstack([X, X])))
    m = label_transfer.fit_ridge(kernel.gram(cfg, X), np.ones(len(X)), y, len(present),
                                 support=X, kernel_cfg=cfg)
    train_acc = float(np.mean(label_transfer.predict(m, X)[0] == y))
    assert rep.labeling_accuracy == train_acc


def test_overlap_rejected(corpus):
    sel = {"subject": "a", "device": "s3_1"}
    with pytest.raises(ConfigError, match="allow_overlap"):
        run_scenario(scenario("transfall", sel, sel), corpus=corpus)


def test_empty_selector(corpus):
    with pytest.raises(DataError, match="source selector"):
        run_scenario(scenario("transfall", {"subject": "zzz"}, {"subject": "a"}), corpus=corpus)


@pytest.mark.parametrize("pipe", ["transfall", "kmm_only", "nn", "lr"])
def test_target_labels_do_not_leak(corpus, pipe):
    src, tgt = {"subject": "b", "device": "s3_1"}, {"subject": "b", "device": "nexus4_1"}
    cfg = scenario(pipe, src, tgt)
    base = run_scenario(cfg, corpus=corpus)
    tmask = np.array([s == "b" and d == "nexus4_1" for s, d in zip(corpus.subjects, corpus.devices)])
    labels = corpus.labels.copy()
    idx = np.flatnonzero(tmask)
    labels[idx] = labels[np.random.default_rng(0).permutation(idx)]
    scrambled = LabeledDataset(corpus.features, labels, corpus.num_classes, corpus.subjects,
                               corpus.devices, corpus.datasets, corpus.classes)
    other = run_scenario(cfg, corpus=scrambled)
    for key in ("estimated_label", "predicted_label"):
        np.testing.assert_array_equal(other.predictions[key], base.predictions[key])
    if "ridge" in base.artifacts:
        assert other.artifacts["ridge"].alphas.tobytes() == base.artifacts["ridge"].alphas.tobytes()
    assert other.artifacts["logistic"].weights.tobytes() == base.artifacts["logistic"].weights.tobytes()


def test_transfall_beats_no_adaptation_cross_device(corpus):
    gains = []
    for s in "abc":
        src, tgt = {"subject": s, "device": "s3_1"}, {"subject": s, "device": "nexus4_1"}
        tf = run_scenario(scenario("transfall", src, tgt), corpus=corpus)
        na = run_scenario(scenario("no_adaptation", src, tgt), corpus=corpus)
        assert tf.labeling_accuracy >= tf.majority_rate
        assert tf.classification_accuracy >= tf.majority_rate
        gains.append(tf.labeling_accuracy - na.labeling_accuracy)
    assert np.mean(gains) >= 0.10


def test_upper_pipeline_uses_truth(corpus):
    rep = run_scenario(scenario("upper", {"device": "s3_1"}, {"device": "nexus4_1"}), corpus=corpus)
    assert rep.labeling_accuracy == 1.0


def test_absent_source_class(tmp_path):
    synthetic.write_corpus(tmp_path, ["a"], ["s3_1"], activities=["sit", "walk"],
                           seconds_per_activity=4.0)
    synthetic.write_corpus(tmp_path, ["a"], ["nexus4_1"], activities=["sit", "walk", "run"],
                           seconds_per_activity=4.0)
    c = load_corpus(tmp_path, use_cache=False)
    with pytest.raises(DataError, match="run"):
        run_scenario(scenario("transfall", {"device": "s3_1"}, {"device": "nexus4_1"}), corpus=c)
    # the other direction is fine; the class missing from the target has no recall
    rep = run_scenario(scenario("transfall", {"device": "nexus4_1"}, {"device": "s3_1"}), corpus=c)
    assert rep.per_class_recall[c.classes.index("run")] is None


def test_holdout_mode(corpus):
    h = Hyper(logistic_iters=200, eval_mode="holdout", holdout_fraction=0.3, seed=4)
    rep = run_scenario(scenario("transfall", {"device": "s3_1", "subject": "a"},
                                {"device": "nexus4_1", "subject": "a"}, hyper=h), corpus=corpus)
    split = rep.predictions["split"]
    assert (split == "train").sum() == round(0.3 * rep.n_target)
    lab, clf = recompute(rep.predictions)
    assert (lab, clf) == (rep.labeling_accuracy, rep.classification_accuracy)
    assert "held-out" in rep.to_dict()["downstream_protocol"]


def test_matrix_failures_are_reported(corpus_dir):
    cfgs = [
        scenario("transfall", {"subject": "a", "device": "s3_1"}, {"subject": "a", "device": "s3_1"},
                 name="bad"),
        scenario("nn", {"subject": "a", "device": "s3_1"}, {"subject": "b", "device": "s3_1"},
                 name="good"),
    ]
    res = run_matrix(cfgs, corpus_dir)
    assert [r.ok for r in res.runs] == [False, True]
    assert "ConfigError" in res.runs[0].error
    assert res.summary[0]["failed"] == 1 and res.summary[0]["labeling_mean"] is None


def test_workers_preserve_order(corpus_dir):
    cfgs = round_robin("subject", ["a", "b", "c"], ["nn", "no_adaptation"],
                       fixed={"device": ["s3_1"]}, hyper=FAST)
    serial = run_matrix(cfgs, corpus_dir, workers=1)
    threaded = run_matrix(cfgs, corpus_dir, workers=3)
    assert [r.to_dict() for r in serial.runs] == [r.to_dict() for r in threaded.runs]
    assert serial.summary == threaded.summary


def test_summarize_quartiles():
    class R:
        ok = True

        def __init__(self, a):
            self.group, self.pipeline = "g", "p"
            self.labeling_accuracy = self.classification_accuracy = a

    (row,) = summarize([R(a) for a in (0.1, 0.2, 0.3, 0.4, 0.5)])
    assert row["labeling_mean"] == pytest.approx(0.3)
    assert row["labeling_p25"] == pytest.approx(0.2) and row["labeling_p75"] == pytest.approx(0.4)


# -- reports and CLI ----------------------------------------------------------

def write_cfg(path: Path, **defaults) -> Path:
    cfg = {
        "schema_version": 1,
        "defaults": {"logistic_iters": 100, **defaults},
        "scenarios": [{"name": "P2P-D", "group": "cross-platform",
                       "pipelines": ["transfall", "no_adaptation"],
                       "source": {"subject": "a", "device": "s3_1"},
                       "target": {"subject": "a", "device": "nexus4_1"},
                       "hyper": {"kmm_trace": True}}],
        "matrix": [{"key": "subject", "values": ["a", "b"], "fixed": {"device": ["s3_2"]},
                    "group": "cross-subject", "pipelines": ["transfall"]}],
    }
    path.write_text(yaml.safe_dump(cfg))
    return path


def tree(root: Path) -> dict[str, bytes]:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_report_recomputation(tmp_path, corpus_dir):
    cfgs = [scenario("transfall", {"subject": "a", "device": "s3_1"},
                     {"subject": "a", "device": "nexus4_1"}, name="x")]
    res = run_matrix(cfgs, corpus_dir)
    write_outputs(res.runs, tmp_path)
    (run,) = read_outputs(tmp_path)
    assert run.labeling_accuracy == res.runs[0].labeling_accuracy
    run_dir = next((tmp_path / "runs").iterdir())
    pred = read_predictions(run_dir / "predictions.csv")
    assert len(pred["window_id"]) == res.runs[0].n_target
    rep = json.loads((run_dir / "report.json").read_text())
    rep["labeling_accuracy"] = 0.123
    (run_dir / "report.json").write_text(json.dumps(rep))
    with pytest.raises(DataError, match="predictions give"):
        read_outputs(tmp_path)


def test_cli_run_is_deterministic(tmp_path, corpus_dir, capsys):
    cfg = write_cfg(tmp_path / "exp.yaml")
    outs = [tmp_path / "o1", tmp_path / "o2"]
    for out in outs:
        assert cli.main(["run", "--config", str(cfg), "--data", str(corpus_dir),
                         "--out", str(out), "--seed", "3"]) == 0
    a, b = tree(outs[0]), tree(outs[1])
    assert a.keys() == b.keys()
    differing = [k for k in a if a[k] != b[k]]
    assert all(k.endswith("timings.json") for k in differing)
    names = set(a)
    assert "summary.csv" in names
    assert "figures/labeling_accuracy.png" in names and "figures/classification_accuracy.png" in names
    assert any(k.endswith("kmm_trace.csv") for k in names)
    assert any(k.endswith("ridge.txt.support.bin") for k in names)
    assert a["figures/labeling_accuracy.png"][:8] == b"\x89PNG\r\n\x1a\n"
    rep = json.loads(next(v for k, v in a.items() if k.endswith("report.json")))
    assert rep["config"]["hyper"]["seed"] == 3
    with (outs[0] / "summary.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert {(r["group"], r["pipeline"]) for r in rows} == {
        ("cross-platform", "transfall"), ("cross-platform", "no_adaptation"),
        ("cross-subject", "transfall")}


def test_cli_report(tmp_path, corpus_dir, capsys):
    cfg = write_cfg(tmp_path / "exp.yaml")
    out = tmp_path / "o"
    cli.main(["run", "--config", str(cfg), "--data", str(corpus_dir), "--out", str(out)])
    (out / "summary.csv").unlink()
    capsys.readouterr()
    assert cli.main(["report", "--in", str(out)]) == 0
    assert "cross-platform" in capsys.readouterr().out
    assert (out / "summary.csv").exists()


def test_cli_errors(tmp_path, capsys):
    assert cli.main(["report", "--in", str(tmp_path)]) == 2
    assert "error:" in capsys.readouterr().err
    cfg = write_cfg(tmp_path / "exp.yaml")
    assert cli.main(["run", "--config", str(cfg), "--data", str(tmp_path / "missing"),
                     "--out", str(tmp_path / "o")]) == 1
    assert (tmp_path / "o" / "failures.csv").exists()


def test_cli_synth(tmp_path, capsys):
    assert cli.main(["synth", "--out", str(tmp_path), "--subjects", "x", "--devices", "d_1",
                     "--seconds", "3"]) == 0
    files = list(tmp_path.glob("*.csv"))
    assert len(files) == 1
    assert load_corpus(tmp_path, use_cache=False).n > 0


CONFIGS = sorted((Path(__file__).parent.parent / "configs").glob("*.yaml"))


@pytest.mark.parametrize("path", CONFIGS, ids=lambda p: p.name)
def test_shipped_configs_parse(path):
    assert load_config(path).scenarios


@pytest.mark.parametrize("name", ["synthetic_cross_platform.yaml", "synthetic_cross_subject.yaml"])
def test_shipped_synthetic_configs_run(name, corpus_dir):
    exp = load_config(Path(__file__).parent.parent / "configs" / name)
    cfgs = [dataclasses.replace(s, hyper=dataclasses.replace(s.hyper, logistic_iters=100))
            for s in exp.scenarios]
    res = run_matrix(cfgs, corpus_dir, exp.dataset)
    assert all(r.ok for r in res.runs), [r.error for r in res.runs if not r.ok]
