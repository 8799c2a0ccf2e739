import numpy as np
import pytest

from transfall import synthetic

_ACCEPTANCE: list[str] = []


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory):
    """Small synthetic corpus: 3 subjects on two same-model and one other phone."""
    root = tmp_path_factory.mktemp("corpus")
    synthetic.write_corpus(root, ["a", "b", "c"], ["s3_1", "s3_2", "nexus4_1"],
                           seconds_per_activity=12.0)
    return root


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line per acceptance criterion.

    ``passed`` may also be a status string such as ``"SKIP"`` or ``"INFO"``.
    """

    def record(name: str, passed, detail: str = ""):
        status = passed if isinstance(passed, str) else ("PASS" if passed else "FAIL")
        _ACCEPTANCE.append(f"{status}  {name}  {detail}".rstrip())
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
