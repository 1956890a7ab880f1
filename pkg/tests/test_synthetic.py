import math
import warnings

import numpy as np
import pytest

from iclv.errors import ConfigurationError
from iclv.model import DEFAULT_INDICATORS, ParameterSet
from iclv.synthetic import (
    DESIGN_ATTRIBUTES, DesignSpec, DesignWarning, Design, benchmark_spec, d_error, improve_design,
    random_design, shares, simulate_dataset, survey_sampler,
)
from iclv import io

PRIORS = io.read_priors(io.data_path("priors.json"))


def test_design_spec_invariants():
    spec = DesignSpec()
    assert spec.n_tasks == 144 and spec.n_blocks == 18 and spec.tasks_per_respondent == 8
    assert spec.n_levels("body_type") == 6 and spec.n_levels("recharge_time") == 8
    assert spec.n_levels("range_km") == 8 and spec.n_levels("bus_lane") == 2 and spec.n_levels("price") == 4
    assert spec.n_bands == 3
    with pytest.raises(ConfigurationError):
        DesignSpec(n_tasks=100, n_blocks=18)
    assert DesignSpec.from_dict(spec.to_dict()) == spec


def test_random_design_is_reproducible_and_blocked():
    spec = DesignSpec()
    a, b = random_design(spec, 4), random_design(spec, 4)
    assert np.array_equal(a.levels, b.levels)
    assert not np.array_equal(a.levels, random_design(spec, 5).levels)
    assert all(len(a.tasks_in_block(k)) == 8 for k in range(18))


def test_random_design_uniform_levels():
    spec = DesignSpec(n_tasks=10_000, n_blocks=1_250)
    body = random_design(spec, 0).levels[:, 0, 0]
    freq = np.bincount(body, minlength=6) / body.size
    assert np.all(np.abs(freq - 1 / 6) <= 0.02)


def test_identical_alternatives_are_singular():
    d = random_design(benchmark_spec(), 0)
    d.levels[:, 1] = d.levels[:, 0]
    with pytest.warns(DesignWarning, match="collinear"):
        assert d_error(d, PRIORS) == math.inf


def test_duplicated_design_halves_d_error():
    d = random_design(benchmark_spec(), 3)
    assert d_error(d.duplicated(), PRIORS) == pytest.approx(d_error(d, PRIORS) / 2, rel=1e-12)


def test_d_error_permutation_invariant():
    d = random_design(benchmark_spec(), 3)
    rng = np.random.default_rng(0)
    perm = Design(d.spec, d.levels[rng.permutation(d.n_tasks)], d.blocks)
    swapped = Design(d.spec, d.levels[:, ::-1], d.blocks)
    ref = d_error(d, PRIORS)
    assert d_error(perm, PRIORS) == pytest.approx(ref, rel=1e-10)
    assert d_error(swapped, PRIORS) == pytest.approx(ref, rel=1e-10)


def test_best_random_beats_median():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DesignWarning)
        scores = np.array([d_error(random_design(benchmark_spec(), s), PRIORS) for s in range(1000)])
    assert scores.min() < np.median(scores)


def test_improve_design_never_worsens():
    d = random_design(benchmark_spec(), 6)
    assert np.array_equal(improve_design(d, PRIORS, 0, 1).levels, d.levels)
    better = improve_design(d, PRIORS, 300, 1)
    assert d_error(better, PRIORS) <= d_error(d, PRIORS)
    assert np.array_equal(d.levels, random_design(benchmark_spec(), 6).levels)  # input untouched


def test_missing_prior_rejected():
    with pytest.raises(ConfigurationError, match="prior"):
        d_error(random_design(benchmark_spec(), 0), {"price": -1.0})


def test_simulated_dataset_structure(truth):
    design = random_design(benchmark_spec(), 1)
    a = simulate_dataset(design, truth, 30, seed=9)
    b = simulate_dataset(design, truth, 30, seed=9)
    assert a == b
    assert a.indicator_names == tuple(n for n, _ in DEFAULT_INDICATORS)
    for p in a.individuals:
        assert len(p.tasks) == 8 and all(1 <= v <= 5 for v in p.indicators)
        assert p.block in range(3) and p.budget_band in range(3)
    assert simulate_dataset(design, truth, 0).individuals == []


def test_deterministic_choices_without_noise(truth):
    design = random_design(benchmark_spec(), 1)
    never = ParameterSet(truth.covariates, truth.A, np.zeros(3), {}, [], None, asc=-1e9)
    assert shares(simulate_dataset(design, never, 20, seed=0)) == pytest.approx([0, 0, 1])
    cheap = ParameterSet(truth.covariates, truth.A, np.zeros(3), {"price": -1e6}, [], None, asc=1e9)
    data = simulate_dataset(design, cheap, 20, seed=0)
    for p in data.individuals:
        for t in p.tasks:
            if t.alt1.price != t.alt2.price:
                assert t.chosen == int(t.alt2.price < t.alt1.price)


def test_multinomial_sampling_shares(truth):
    spec = DesignSpec(n_tasks=1, n_blocks=1, tasks_per_respondent=1)
    levels = np.zeros((1, 2, len(DESIGN_ATTRIBUTES)), dtype=int)
    levels[0, 1, 0] = 3  # hatchback vs small SUV, otherwise identical
    design = Design(spec, levels, [0])
    params = ParameterSet(truth.covariates, truth.A, None,
                          {"hatchback": math.log(0.5 / 0.2), "small_suv": math.log(0.3 / 0.2)})
    data = simulate_dataset(design, params, 100_000, seed=1)
    assert shares(data) == pytest.approx([0.5, 0.3, 0.2], abs=0.01)


def test_default_sampler_female_share():
    covs = survey_sampler(np.random.default_rng(0), 3000)
    assert abs(np.mean([z.female for z in covs]) - 0.51) <= 0.03
    ages = np.array([z.age for z in covs]) * 100
    assert ages.min() >= 18 and ages.max() < 86  # whole years 18..85, uniform within the year
