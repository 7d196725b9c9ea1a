import numpy as np
import pytest

from ocvalign import (
    NOMINAL_CAPACITY_AH,
    AgingScenario,
    EstimationProblem,
    generate,
    reference_nominal_curve,
)

CN = NOMINAL_CAPACITY_AH


@pytest.fixture(scope="session")
def nominal():
    return reference_nominal_curve()


def make_problem(nominal, capacity_fraction, z0, sigma=0.0, seed=0, soc_stop=0.0, **kwargs):
    scenario = AgingScenario(
        nominal, capacity_fraction * CN, z0, ocv_noise_sigma=sigma, seed=seed, soc_stop=soc_stop
    )
    trace = generate(scenario)
    return EstimationProblem.from_trace(nominal, trace, CN, **kwargs)


@pytest.fixture
def problem_factory(nominal):
    def factory(capacity_fraction=0.9, z0=0.8, **kwargs):
        return make_problem(nominal, capacity_fraction, z0, **kwargs)

    return factory


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# Acceptance criteria record one line each here; printed in the terminal summary.
ACCEPTANCE_LINES: dict[str, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES, key=lambda k: int(k)):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
