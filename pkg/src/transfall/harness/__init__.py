"""Experiment harness: configs, runs, reports and figures."""

from .config import (
    PIPELINES,
    DatasetConfig,
    ExperimentConfig,
    Hyper,
    ScenarioConfig,
    Selector,
    load_config,
    parse_config,
    round_robin,
)
from .runner import MatrixResult, RunFailure, RunReport, load_corpus, run_matrix, run_scenario, summarize

__all__ = [
    "PIPELINES",
    "DatasetConfig",
    "ExperimentConfig",
    "Hyper",
    "MatrixResult",
    "RunFailure",
    "RunReport",
    "ScenarioConfig",
    "Selector",
    "load_config",
    "load_corpus",
    "parse_config",
    "round_robin",
    "run_matrix",
    "run_scenario",
    "summarize",
]
