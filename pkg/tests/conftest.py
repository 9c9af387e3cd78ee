from pathlib import Path

import numpy as np
import pytest

from snaptiming.ingest import filter_analysis_plays, parse_tracking
from snaptiming.synthetic import generate_tracking_corpus

DATA = Path(__file__).parent / "data"
FIXTURE_TRACKING = DATA / "fixture_play_tracking.csv"
FIXTURE_CHARTING = DATA / "fixture_play_charting.csv"


@pytest.fixture(scope="session")
def fixture_paths():
    return FIXTURE_TRACKING, FIXTURE_CHARTING


@pytest.fixture(scope="session")
def fixture_play():
    result = parse_tracking(FIXTURE_TRACKING, FIXTURE_CHARTING)
    assert len(result.plays) == 1
    return result.plays[0]


@pytest.fixture(scope="session")
def small_corpus():
    return generate_tracking_corpus(60, seed=123)


@pytest.fixture(scope="session")
def small_plays(small_corpus):
    return filter_analysis_plays(small_corpus.parse().plays)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
