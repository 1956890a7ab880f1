import numpy as np
import pytest

from iclv.errors import ConfigurationError, DomainError, ParameterError
from iclv.model import (
    COVARIATES, OPT_OUT, UNITS, AlternativeAttributes, ChoiceDataset, CovariateVector,
    ModelSpec, ParameterSet, Task, choice_prob, draw_latents, indicator_prob,
    indicator_probs, structural_mean, systematic_utility,
)

from conftest import one_person


def test_covariate_vector_dummy_coding():
    z = CovariateVector.from_years(37, female=1, education="undergraduate", income="high", tenure="owner")
    v = z.values()
    assert v["constant"] == 1.0 and v["age"] == pytest.approx(0.37)
    assert v["age_sq"] == pytest.approx(0.37 ** 2) and v["age_cu"] == pytest.approx(0.37 ** 3)
    assert v["undergraduate"] == v["high_income"] == v["owner"] == v["female"] == 1.0
    # reference categories switch nothing on
    assert v["low_income"] == v["postgraduate"] == v["certificate"] == 0.0
    assert set(v) == set(COVARIATES)


def test_covariate_roundtrip_and_errors():
    z = CovariateVector.from_years(50, female=0, vehicles="two", dwelling="apartment")
    assert CovariateVector.from_dummies(z.values()) == z
    bad = z.values() | {"postgraduate": 1.0, "undergraduate": 1.0}
    with pytest.raises(ConfigurationError, match="more than one"):
        CovariateVector.from_dummies(bad)
    with pytest.raises(ConfigurationError):
        CovariateVector.from_years(500)
    with pytest.raises(ConfigurationError):
        CovariateVector.from_years(30, education="phd")
    with pytest.raises(ConfigurationError, match="age_sq"):
        CovariateVector.from_dummies(z.values() | {"age_sq": 0.3})


def test_alternative_units():
    alt = AlternativeAttributes.from_natural("large_sedan", price=100_000, range_km=450, recharge_time=1.25,
                                             operating_cost=6.12, setup_cost=10_000)
    assert alt.price == pytest.approx(1.0) and alt.range_km == pytest.approx(4.5)
    assert alt.recharge_time == pytest.approx(0.125) and alt.setup_cost == pytest.approx(10.0)
    assert alt.natural()["range_km"] == pytest.approx(450)
    f = alt.features()
    assert f["large_sedan"] == 1.0 and f["hatchback"] == 0.0
    with pytest.raises(ConfigurationError):
        AlternativeAttributes("bus", price=1.0)
    with pytest.raises(ConfigurationError):
        AlternativeAttributes("hatchback", price=-1.0)
    with pytest.raises(ConfigurationError):
        AlternativeAttributes.from_natural("hatchback", price=1.0, colour=2)
    assert set(UNITS) >= {"price", "range_km", "recharge_time"}


def test_structural_mean_is_linear(reference):
    params, _ = reference
    m = CovariateVector.from_years(20, female=0)
    f = CovariateVector.from_years(20, female=1)
    diff = np.subtract(structural_mean(params, f), structural_mean(params, m))
    assert diff == pytest.approx([0.086, 0.266, 0.347], abs=1e-12)
    # age -> 0 leaves the constant (other dummies at reference)
    z = {c: 0.0 for c in COVARIATES} | {"constant": 1.0}
    assert np.asarray(structural_mean(params, z)) == pytest.approx([3.97, 5.41, 3.05])


def test_draw_latents_shift_and_scale(truth):
    z = CovariateVector.from_years(40)
    d = np.array([[0.0, 0.0, 0.0], [1.0, -1.0, 2.0]])
    att = draw_latents(truth, z, d)
    mean = np.asarray(structural_mean(truth, z))
    assert att[0] == pytest.approx(mean)
    assert att[1] == pytest.approx(mean + truth.delta_scale * d[1])
    no_scale = ParameterSet(truth.covariates, truth.A, None, truth.beta)
    with pytest.raises(ConfigurationError):
        draw_latents(no_scale, z, d)


def test_indicator_probs_sum_and_monotone(truth):
    meas = truth.measurement
    for k in range(len(meas.names)):
        lo = indicator_probs(meas, k, [0.0, 0.0, 0.0])
        hi = indicator_probs(meas, k, [6.0, 6.0, 6.0])
        assert abs(lo.sum() - 1.0) < 1e-12 and np.all(lo >= 0)
        # positive loading shifts mass toward agreement
        assert hi[3:].sum() > lo[3:].sum()
    with pytest.raises(DomainError):
        indicator_prob(meas, 0, [0, 0, 0], 6)


def test_indicator_rejects_unordered_thresholds(truth):
    meas = truth.measurement.copy()
    meas.thresholds[2, 2] = meas.thresholds[2, 1] - 0.1
    with pytest.raises(ParameterError, match=meas.names[2]):
        indicator_probs(meas, 0, [0, 0, 0])


def test_systematic_utility_terms(reference):
    params, _ = reference
    alt = AlternativeAttributes("large_suv", price=0.5, range_km=3.0)
    att = [3.0, 3.0, 2.0]
    v = systematic_utility(params, alt, att)
    expected = -7.98 * 0.5 + 2.38 * 3.0 * 0.5 + 0.023 * 3.0 * 3.0 + 0.139 * 2.0
    assert v == pytest.approx(expected, abs=1e-12)
    assert systematic_utility(params, OPT_OUT, att) == 0.0


def test_choice_prob_stability_and_availability():
    p = choice_prob([1000.0, 999.0, 0.0])
    assert np.all(np.isfinite(p)) and abs(p.sum() - 1) < 1e-12
    q = choice_prob([1.0, 2.0, 3.0], [True, False, True])
    assert q[1] == 0.0 and q[2] / q[0] == pytest.approx(np.e ** 2)
    with pytest.raises(DomainError):
        choice_prob([1.0, 2.0], [False, False])


def test_dataset_validation():
    person = one_person()
    with pytest.raises(ConfigurationError, match="expected 8"):
        ChoiceDataset([person], panel_length=8, indicator_names=("I1", "I2"))
    with pytest.raises(ConfigurationError, match="indicator"):
        ChoiceDataset([person], panel_length=1, indicator_names=("I1",))
    with pytest.raises(ConfigurationError):
        Task(person.tasks[0].alt1, person.tasks[0].alt2, 3)


def test_model_spec_roundtrip():
    spec = ModelSpec(covariates=("constant", "age"), anchor_thresholds=False)
    assert ModelSpec.from_dict(spec.to_dict()) == spec
    # the first indicator listed for each latent is its reference
    assert spec.reference_indicators() == {"safety": 0, "environment": 2, "design": 4}
    with pytest.raises(ConfigurationError):
        ModelSpec(covariates=("constant", "shoe_size"))
