import pytest
from hypothesis import settings

from edgeprefetch.config import load_config
from edgeprefetch.media import Manifest

settings.register_profile("ci", deadline=None, max_examples=100)
settings.load_profile("ci")


@pytest.fixture(scope="session")
def default_cfg():
    return load_config("paper_default")


@pytest.fixture
def manifest():
    return Manifest()


@pytest.fixture
def small_cfg(default_cfg):
    """Three players, ten segments: quick enough for per-test full runs."""
    cfg = default_cfg.with_()
    cfg.players.count = 3
    cfg.media.total_duration = 40.0
    return cfg


@pytest.fixture(scope="session")
def default_dataset(default_cfg):
    """Session records from the shipped scenario's dataset seeds."""
    from edgeprefetch.forecast import Dataset
    from edgeprefetch.pipeline import generate_records

    return Dataset.from_records(generate_records(default_cfg, default_cfg.dataset.seeds))


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
