import sys

import pytest

from fracbs.contracts import MarketParams, OptionSpec


@pytest.fixture
def classical():
    return MarketParams(r=0.03, sigma=0.3, alpha=1.0, z0=2.0)


@pytest.fixture
def down_out_call():
    return OptionSpec("call", "european", strike=2.0, maturity=4.0, barrier="down_out", lower=1.0)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(mod.RESULTS, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
        terminalreporter.write_line(line)
