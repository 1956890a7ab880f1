import numpy as np
import pytest
from scipy.special import logit

from iclv.errors import ConfigurationError
from iclv.model import ParameterSet
from iclv.policy import (
    DEFAULT_COHORTS, BaseVehicle, CohortSpec, ScenarioSweep, age_profile, calibrate_ev_constant, cohort_latents,
    measurement_profile, profile_minimum, scenario_sweep,
)

# calculated latent means (design, environment, safety) per cohort, two decimals
LATENT_TABLE = {
    "Gen Z male": (3.26, 3.07, 2.68), "Gen Z female": (3.35, 3.34, 3.03),
    "Gen Y male": (3.46, 3.40, 2.64), "Gen Y female": (3.54, 3.66, 2.99),
    "Gen X male": (3.12, 3.31, 2.07), "Gen X female": (3.21, 3.57, 2.42),
}


def test_cohort_latents_table(reference):
    params, _ = reference
    for cohort in DEFAULT_COHORTS:
        assert np.asarray(cohort_latents(params, cohort)) == pytest.approx(LATENT_TABLE[cohort.label], abs=0.01)


def test_gender_gap_is_the_female_row(reference):
    params, _ = reference
    for m, f in zip(DEFAULT_COHORTS[::2], DEFAULT_COHORTS[1::2]):
        gap = np.subtract(cohort_latents(params, f), cohort_latents(params, m))
        assert gap == pytest.approx([0.086, 0.266, 0.347], abs=1e-12)


def test_cohort_validation():
    with pytest.raises(ConfigurationError, match="unmapped"):
        CohortSpec.from_dict({"name": "Boomers", "age_years": 70, "gender": "male", "pets": "cat"})
    with pytest.raises(ConfigurationError):
        CohortSpec("Gen Z", 20, "other")
    with pytest.raises(ConfigurationError, match="Gen Z"):
        CohortSpec("Gen Z", 20, "male", income="rich")
    c = DEFAULT_COHORTS[3]
    assert CohortSpec.from_dict(c.to_dict()) == c


def test_age_profile_and_minima(reference):
    params, _ = reference
    curve = age_profile(params, [0.0, 40.0])
    assert curve[0] == pytest.approx([3.97, 5.41, 3.05])
    assert 60 <= profile_minimum(params, "design") <= 70
    assert 45 <= profile_minimum(params, "environment") <= 55
    assert 60 <= profile_minimum(params, "safety") <= 70


def test_measurement_profile(truth):
    male, female = DEFAULT_COHORTS[2], DEFAULT_COHORTS[3]
    pm, pf = measurement_profile(truth, male), measurement_profile(truth, female)
    assert np.abs(pm.sum(axis=1) - 1).max() < 1e-12
    assert np.all(pf[:, 3:].sum(axis=1) >= pm[:, 3:].sum(axis=1))
    flat = truth.copy()
    flat.measurement.loadings[:] = 0.0
    assert np.array_equal(measurement_profile(flat, male), measurement_profile(flat, DEFAULT_COHORTS[4]))
    with pytest.raises(ConfigurationError):
        measurement_profile(ParameterSet(truth.covariates, truth.A, None, truth.beta), male)


def test_calibration_constant_is_stable(reference):
    params, calibration = reference
    assert calibrate_ev_constant(params) == pytest.approx(calibration["ev_constant"], abs=1e-12)


def test_rebate_curves_increase(reference):
    params, cal = reference
    res = scenario_sweep(params, ScenarioSweep.default(2), ev_constant=cal["ev_constant"])
    for c in DEFAULT_COHORTS:
        _, p = res.curve(c.name, c.gender)
        assert np.all(np.diff(p) > 0)


def test_price_slope_follows_design_latent(reference):
    params, cal = reference
    res = scenario_sweep(params, ScenarioSweep.default(1, 2), ev_constant=cal["ev_constant"])
    for c in DEFAULT_COHORTS:
        _, p = res.curve(c.name, c.gender)
        d = cohort_latents(params, c).design
        assert logit(p[1]) - logit(p[0]) == pytest.approx(0.5 * (7.98 - 2.38 * d), abs=1e-12)


def test_sweep_order_and_warnings(reference):
    params, cal = reference
    sweep = ScenarioSweep.default(3, 5)
    res = scenario_sweep(params, sweep, ev_constant=cal["ev_constant"])
    assert [(r.cohort, r.gender) for r in res.rows[:5]] == [("Gen Z", "male")] * 5
    assert [r.x for r in res.rows[:5]] == [450, 512.5, 575, 637.5, 700]
    assert any("outside the surveyed" in w for w in res.warnings)
    inside = BaseVehicle(setup_cost=2.0)
    quiet = scenario_sweep(params, ScenarioSweep(5, (0.0, 0.5, 1.0)), base=inside)
    assert quiet.warnings == []


def test_sweep_errors(reference):
    params, _ = reference
    with pytest.raises(ConfigurationError):
        ScenarioSweep(7, (0.0, 1.0))
    with pytest.raises(ConfigurationError, match="monotone"):
        ScenarioSweep(2, (0.0, 2.0, 1.0))
    no_rebate = params.copy()
    del no_rebate.beta["rebate_upfront"]
    with pytest.raises(ConfigurationError, match="rebate_upfront"):
        scenario_sweep(no_rebate, ScenarioSweep.default(2))


def test_monte_carlo_mode(truth):
    res = scenario_sweep(truth, ScenarioSweep.default(5, 3), n_draws=200, seed=1)
    again = scenario_sweep(truth, ScenarioSweep.default(5, 3), n_draws=200, seed=1)
    assert [r.probability for r in res.rows] == [r.probability for r in again.rows]
    assert all(0 < r.probability < 1 for r in res.rows)
