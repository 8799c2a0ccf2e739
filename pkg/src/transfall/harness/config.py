"""Scenario configuration files.

A config is a YAML mapping::

    schema_version: 1
    dataset:
      files: ["*.csv"]            # globs relative to the data directory
      columns: {ax: x, ...}       # optional column renames
      classes: [sit, stand, ...]  # optional fixed label alphabet
    defaults: {lambda: 0.1, window: 128, ...}
    scenarios:
      - name: P2P-D
        group: cross-platform
        pipelines: [transfall, no_adaptation]
        source: {device: [s3_1]}
        target: {device: [nexus4_1]}
    matrix:
      - kind: round_robin
        key: subject
        values: [a, b, c]
        fixed: {device: [s3_1]}
        group: cross-subject
        pipelines: [transfall]

``matrix`` entries expand into one scenario per ordered pair of distinct
values.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from ..data import ColumnMap
from ..errors import ConfigError

SCHEMA_VERSION = 1
PIPELINES = ("transfall", "no_adaptation", "kmm_only", "vertical_only", "nn", "lr", "upper")
EVAL_MODES = ("same_window", "holdout")


@dataclass(frozen=True)
class Selector:
    """Conjunction of allowed values per provenance field; ``None`` = any."""

    subject: tuple[str, ...] | None = None
    device: tuple[str, ...] | None = None
    dataset: tuple[str, ...] | None = None

    @classmethod
    def from_dict(cls, raw: dict | None) -> "Selector":
        raw = dict(raw or {})
        unknown = set(raw) - {"subject", "device", "dataset"}
        if unknown:
            raise ConfigError(f"unknown selector keys {sorted(unknown)}")

        def norm(v):
            if v is None:
                return None
            if isinstance(v, (str, int)):
                v = [v]
            return tuple(str(x) for x in v)

        return cls(**{k: norm(v) for k, v in raw.items()})

    def matches(self, subject: str, device: str, dataset: str) -> bool:
        return (
            (self.subject is None or subject in self.subject)
            and (self.device is None or device in self.device)
            and (self.dataset is None or dataset in self.dataset)
        )

    def to_dict(self) -> dict:
        return {k: list(v) for k, v in dataclasses.asdict(self).items() if v is not None}


@dataclass(frozen=True)
class Hyper:
    lam: float = 0.1
    epsilon: float | None = None
    cap: float = 1000.0
    shrinkage: float = 1.0
    bandwidth: float | None = None
    window: int = 128
    overlap: float = 0.5
    seed: int = 0
    standardize: bool = True
    eval_mode: str = "same_window"
    holdout_fraction: float = 0.5
    max_iters: int = 20000
    tol: float = 1e-6
    logistic_iters: int = 5000
    kmm_trace: bool = False

    # config spelling -> field
    ALIASES = {"lambda": "lam", "bandwidth_mode": "bandwidth"}

    @classmethod
    def from_dict(cls, raw: dict | None, base: "Hyper | None" = None) -> "Hyper":
        base = base or cls()
        updates = {}
        names = {f.name for f in dataclasses.fields(cls)}
        for key, value in (raw or {}).items():
            name = cls.ALIASES.get(key, key)
            if name not in names:
                raise ConfigError(f"unknown hyperparameter {key!r}")
            if name in ("epsilon", "bandwidth") and value in ("auto", "median", None):
                value = None
            updates[name] = value
        try:
            hyper = dataclasses.replace(base, **updates)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None
        hyper.validate()
        return hyper

    def validate(self) -> None:
        if not (isinstance(self.lam, (int, float)) and self.lam > 0):
            raise ConfigError("lambda must be > 0")
        if self.bandwidth is not None and not (
            isinstance(self.bandwidth, (int, float)) and self.bandwidth > 0
            and math.isfinite(self.bandwidth)
        ):
            raise ConfigError("bandwidth must be 'median' or a positive number")
        if self.epsilon is not None and not self.epsilon >= 0:
            raise ConfigError("epsilon must be 'auto' or >= 0")
        if not (isinstance(self.window, int) and self.window >= 2):
            raise ConfigError("window must be an integer >= 2")
        if not 0 <= self.overlap < 1:
            raise ConfigError("overlap must lie in [0, 1)")
        if self.eval_mode not in EVAL_MODES:
            raise ConfigError(f"eval_mode must be one of {EVAL_MODES}")
        if not (isinstance(self.logistic_iters, int) and self.logistic_iters >= 0):
            raise ConfigError("logistic_iters must be a nonnegative integer")
        if not 0 < self.holdout_fraction < 1:
            raise ConfigError("holdout_fraction must lie in (0, 1)")

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["lambda"] = out.pop("lam")
        return out


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    pipeline: str
    source: Selector
    target: Selector
    group: str = "default"
    hyper: Hyper = field(default_factory=Hyper)
    allow_overlap: bool = False

    def __post_init__(self):
        if self.pipeline not in PIPELINES:
            raise ConfigError(f"unknown pipeline {self.pipeline!r}; expected one of {PIPELINES}")

    def with_seed(self, seed: int) -> "ScenarioConfig":
        return dataclasses.replace(self, hyper=dataclasses.replace(self.hyper, seed=seed))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "group": self.group,
            "pipeline": self.pipeline,
            "source": self.source.to_dict(),
            "target": self.target.to_dict(),
            "allow_overlap": self.allow_overlap,
            "hyper": self.hyper.to_dict(),
        }


@dataclass(frozen=True)
class DatasetConfig:
    files: tuple[str, ...] = ("*.csv",)
    columns: ColumnMap = field(default_factory=ColumnMap)
    classes: tuple[str, ...] | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: DatasetConfig
    scenarios: tuple[ScenarioConfig, ...]


def _pipelines(entry: dict) -> list[str]:
    if "pipelines" in entry:
        return list(entry["pipelines"])
    return [entry.get("pipeline", "transfall")]


def round_robin(key: str, values, pipelines, group: str = "default",
                fixed: dict | None = None, hyper: Hyper | None = None,
                allow_overlap: bool = False) -> list[ScenarioConfig]:
    """One scenario per ordered pair ``(a, b)``, ``a != b``, and pipeline."""
    if key not in ("subject", "device", "dataset"):
        raise ConfigError(f"round_robin key must be subject, device or dataset, not {key!r}")
    values = [str(v) for v in values]
    if len(set(values)) < 2:
        raise ConfigError("round_robin needs at least two distinct values")
    fixed = dict(fixed or {})
    out = []
    for a in values:
        for b in values:
            if a == b:
                continue
            for pipe in pipelines:
                out.append(
                    ScenarioConfig(
                        name=f"{group}:{a}->{b}",
                        pipeline=pipe,
                        source=Selector.from_dict({**fixed, key: [a]}),
                        target=Selector.from_dict({**fixed, key: [b]}),
                        group=group,
                        hyper=hyper or Hyper(),
                        allow_overlap=allow_overlap,
                    )
                )
    return out


def parse_config(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    version = raw.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version!r}; expected {SCHEMA_VERSION}")
    unknown = set(raw) - {"schema_version", "dataset", "defaults", "scenarios", "matrix"}
    if unknown:
        raise ConfigError(f"unknown top-level keys {sorted(unknown)}")

    ds = dict(raw.get("dataset") or {})
    files = ds.get("files", ["*.csv"])
    if isinstance(files, str):
        files = [files]
    classes = ds.get("classes")
    dataset = DatasetConfig(
        files=tuple(files),
        columns=ColumnMap.from_dict(ds.get("columns")),
        classes=None if classes is None else tuple(str(c) for c in classes),
    )

    defaults = Hyper.from_dict(raw.get("defaults"))
    scenarios: list[ScenarioConfig] = []
    for entry in raw.get("scenarios") or []:
        if "name" not in entry:
            raise ConfigError("every scenario needs a name")
        extra = set(entry) - {"name", "group", "pipeline", "pipelines", "source", "target",
                              "hyper", "allow_overlap"}
        if extra:
            raise ConfigError(f"scenario {entry['name']!r}: unknown keys {sorted(extra)}")
        hyper = Hyper.from_dict(entry.get("hyper"), defaults)
        for pipe in _pipelines(entry):
            scenarios.append(
                ScenarioConfig(
                    name=str(entry["name"]),
                    pipeline=pipe,
                    source=Selector.from_dict(entry.get("source")),
                    target=Selector.from_dict(entry.get("target")),
                    group=str(entry.get("group", "default")),
                    hyper=hyper,
                    allow_overlap=bool(entry.get("allow_overlap", False)),
                )
            )
    for entry in raw.get("matrix") or []:
        if entry.get("kind", "round_robin") != "round_robin":
            raise ConfigError(f"unknown matrix kind {entry.get('kind')!r}")
        scenarios += round_robin(
            entry.get("key", "subject"),
            entry.get("values") or [],
            _pipelines(entry),
            group=str(entry.get("group", "default")),
            fixed=entry.get("fixed"),
            hyper=Hyper.from_dict(entry.get("hyper"), defaults),
            allow_overlap=bool(entry.get("allow_overlap", False)),
        )
    if not scenarios:
        raise ConfigError("config defines no scenarios")
    return ExperimentConfig(dataset, tuple(scenarios))


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    with path.open() as fh:
        try:
            raw = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    return parse_config(raw)
