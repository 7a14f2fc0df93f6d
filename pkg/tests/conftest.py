from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from slns.backend import ReferenceBackend

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def backend():
    return ReferenceBackend()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# One PASS/FAIL line per acceptance criterion, printed in the terminal summary.
_VERDICTS: dict[int, tuple[bool, str, list]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion checked by this test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.failed):
        _VERDICTS[mark.args[0]] = (rep.passed, mark.args[1], list(item.user_properties))


def verdict_lines():
    out = []
    for n in sorted(_VERDICTS):
        ok, title, props = _VERDICTS[n]
        detail = "; ".join(f"{k}={v}" for k, v in props)
        out.append(f"{'PASS' if ok else 'FAIL'} criterion {n}: {title}" + (f" ({detail})" if detail else ""))
    return out


def pytest_terminal_summary(terminalreporter):
    lines = verdict_lines()
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
