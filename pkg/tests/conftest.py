import functools

import pytest

from iclv import io
from iclv.model import (
    AlternativeAttributes, CovariateVector, Individual, Interaction,
    MeasurementParams, ModelSpec, ParameterSet, Task,
)
from iclv.synthetic import benchmark_spec, random_design, recovery_params, recovery_spec, simulate_dataset


ACCEPTANCE_LINES: list[str] = []


def record(criterion: int, ok: bool, detail: str) -> None:
    """Register one acceptance verdict line (printed in the terminal summary)."""
    line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda l: int(l.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def reference():
    """Reference structural/choice parameters and their calibration block."""
    return io.reference_params()


@pytest.fixture(scope="session")
def truth():
    return recovery_params()


@pytest.fixture(scope="session")
def rspec():
    return recovery_spec()


@functools.cache
def small_dataset_cached():
    return simulate_dataset(random_design(benchmark_spec(), 1), recovery_params(), 10, seed=5)


@pytest.fixture(scope="session")
def small_dataset():
    """Ten synthetic respondents on the benchmark design."""
    return small_dataset_cached()


@pytest.fixture(scope="session")
def fixture_dataset():
    return io.read_dataset(io.data_path("fixture/fixture.csv"))


def tiny_model():
    """3 latents, 2 indicators, one interaction per latent: small enough for quadrature."""
    spec = ModelSpec(covariates=("constant", "female"),
                     indicators=(("I1", "design"), ("I2", "environment")),
                     attributes=("price", "range_km"),
                     interactions=(("design", "price"), ("environment", "range_km"), ("safety", "price")),
                     anchor_thresholds=False)
    meas = MeasurementParams(("I1", "I2"), [0, 1], [1.0, 0.8],
                             [[-1.0, 0.0, 1.0, 2.0], [-0.5, 0.5, 1.5, 2.5]])
    params = ParameterSet(("constant", "female"), [[0.5, 0.2], [0.3, -0.1], [-0.2, 0.4]],
                          [0.9, 0.7, 1.1], {"price": -2.0, "range_km": 0.3},
                          [Interaction("design", "price", 0.5), Interaction("environment", "range_km", 0.2),
                           Interaction("safety", "price", -0.3)], meas)
    return spec, params


def one_person(indicators=(4, 2), chosen=0, female=1):
    alt1 = AlternativeAttributes("hatchback", price=0.45, range_km=3.0)
    alt2 = AlternativeAttributes("small_suv", price=0.70, range_km=4.8)
    return Individual(0, CovariateVector.from_years(35, female=female), indicators,
                      (Task(alt1, alt2, chosen),))


@pytest.fixture
def tiny():
    return tiny_model()

