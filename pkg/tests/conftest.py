import numpy as np
import pytest

# name -> outcome for tests carrying the acceptance marker, in run order
_ACCEPTANCE_RESULTS: dict = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    name = marker.args[0] if marker.args else item.name
    if rep.when == "call":
        _ACCEPTANCE_RESULTS[name] = rep.outcome
    elif rep.when == "setup" and rep.outcome in ("skipped", "failed"):
        _ACCEPTANCE_RESULTS[name] = rep.outcome


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    words = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}
    for name, outcome in _ACCEPTANCE_RESULTS.items():
        terminalreporter.write_line(f"{words.get(outcome, outcome.upper()):<4}  {name}")


@pytest.fixture
def rng():
    return np.random.default_rng(0xC0FFEE)


def random_image(rng, height=64, width=64):
    return rng.integers(0, 256, size=(height, width, 3), dtype=np.uint8)


@pytest.fixture
def small_image(rng):
    return random_image(rng, 32, 48)
