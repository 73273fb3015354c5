import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from lcare.data import fixture_path
from lcare.market_data import load_prices, to_returns

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def fixture_returns():
    return to_returns(load_prices(fixture_path()))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def calibrations_005():
    """Full-size calibrations (1000 paths) of the three default tau = 0.05 scenarios."""
    from lcare.lpa import LpaConfig, ScenarioSet, calibrate

    cfg = LpaConfig(tau=0.05, r=1.0, n_paths=1000)
    sc = ScenarioSet.default().for_tau(0.05)
    return cfg, {l: calibrate(p, cfg, seed=11, label=l) for l, p in sc.items()}


ACCEPTANCE_LINES = []


def record_criterion(number, name, ok, detail=""):
    line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {name}" + (f"  ({detail})" if detail else "")
    ACCEPTANCE_LINES.append((number, line))
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
