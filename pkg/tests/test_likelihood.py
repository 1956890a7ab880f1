import math

import numpy as np
import pytest
from numpy.polynomial.hermite_e import hermegauss

from iclv.errors import ConfigurationError
from iclv.likelihood import (
    DrawScheme, DrawSettings, NumericalError, SimulatedLikelihood, generate_draws, halton_uniforms,
    individual_likelihood, individual_log_likelihood, log_likelihood, null_log_likelihood, panel_draws,
    rho_square,
)
from iclv.model import (
    ChoiceDataset, choice_prob, draw_latents, indicator_probs, systematic_utility,
)

from conftest import one_person, tiny_model


def kernel_likelihood(params, person, att_rows):
    """L_n averaged over latent rows, straight from the scalar kernels."""
    meas = params.measurement
    vals = []
    for att in att_rows:
        like = 1.0
        for k, level in enumerate(person.indicators):
            if level is not None:
                like *= indicator_probs(meas, k, att)[level - 1]
        for task in person.tasks:
            v = [systematic_utility(params, task.alt1, att), systematic_utility(params, task.alt2, att), 0.0]
            like *= choice_prob(v)[task.chosen]
        vals.append(like)
    return float(np.mean(vals))


def quadrature_likelihood(params, person, n_nodes=20):
    x, w = hermegauss(n_nodes)
    w = w / math.sqrt(2 * math.pi)
    grid = np.stack(np.meshgrid(x, x, x, indexing="ij"), -1).reshape(-1, 3)
    weight = np.prod(np.stack(np.meshgrid(w, w, w, indexing="ij"), -1).reshape(-1, 3), axis=1)
    att = draw_latents(params, person.covariates, grid)
    meas = params.measurement
    total = 0.0
    for a, wt in zip(att, weight):
        like = wt
        for k, level in enumerate(person.indicators):
            like *= indicator_probs(meas, k, a)[level - 1]
        t = person.tasks[0]
        v = [systematic_utility(params, t.alt1, a), systematic_utility(params, t.alt2, a), 0.0]
        total += like * choice_prob(v)[t.chosen]
    return total


def test_halton_first_points():
    u = halton_uniforms(3, 2)
    assert u[:, 0] == pytest.approx([0.5, 0.25, 0.75])
    assert u[:, 1] == pytest.approx([1 / 3, 2 / 3, 1 / 9])


def test_draws_keyed_by_id():
    s = DrawSettings(n_draws=7, burn_in=3)
    a = generate_draws(s, 4)
    assert a.shape == (7, 3) and np.all(np.isfinite(a))
    assert np.array_equal(generate_draws(s, 4), a)
    block = panel_draws(s, [4, 9, 5, 2])
    for n, i in enumerate([4, 9, 5, 2]):
        assert np.array_equal(block[n], generate_draws(s, i))
    p = DrawSettings(n_draws=7, scheme=DrawScheme.PSEUDO_RANDOM, seed=3)
    assert np.array_equal(panel_draws(p, [1, 0])[1], generate_draws(p, 0))
    with pytest.raises(ConfigurationError):
        generate_draws(s, -1)
    with pytest.raises(ConfigurationError):
        DrawSettings(n_draws=0)


def test_quadrature_oracle():
    spec, params = tiny_model()
    person = one_person()
    exact = quadrature_likelihood(params, person)
    draws = generate_draws(DrawSettings(n_draws=2 ** 16), 0)
    sim = individual_likelihood(params, person, draws, spec=spec)
    assert abs(sim - exact) / exact < 1e-3


def test_engine_matches_scalar_kernels(truth, small_dataset):
    s = DrawSettings(n_draws=25)
    ll = log_likelihood(truth, small_dataset, s)
    for n, person in enumerate(small_dataset.sorted_by_id()):
        att = draw_latents(truth, person.covariates, generate_draws(s, person.id))
        assert ll.per_individual[n] == pytest.approx(math.log(kernel_likelihood(truth, person, att)), abs=1e-10)
    assert ll.total == pytest.approx(math.fsum(ll.per_individual))


def test_missing_indicator_contributes_nothing():
    spec, params = tiny_model()
    draws = generate_draws(DrawSettings(n_draws=50), 0)
    full = one_person(indicators=(4, None))
    att = draw_latents(params, full.covariates, draws)
    expected = kernel_likelihood(params, full, att)
    assert individual_likelihood(params, full, draws, spec=spec) == pytest.approx(expected, rel=1e-12)


def test_zero_scale_is_exact_at_the_mean():
    spec, params = tiny_model()
    params = params.copy()
    params.delta_scale = np.zeros(3)
    person = one_person()
    one = individual_log_likelihood(params, person, np.zeros((1, 3)), spec=spec)
    many = individual_log_likelihood(params, person, np.random.default_rng(0).standard_normal((40, 3)), spec=spec)
    assert one == pytest.approx(many, abs=1e-13)


def test_threads_and_chunks_are_bit_equal(truth, small_dataset):
    s = DrawSettings(n_draws=30)
    a = log_likelihood(truth, small_dataset, s, threads=1)
    b = log_likelihood(truth, small_dataset, s, threads=4, chunk_size=3)
    assert a.total == b.total
    assert np.array_equal(a.per_individual, b.per_individual)


def test_nonfinite_contribution_names_individual(truth, small_dataset):
    bad = truth.copy()
    bad.beta["price"] = float("nan")
    with pytest.raises(NumericalError, match="individual"):
        log_likelihood(bad, small_dataset, DrawSettings(n_draws=5))


def test_null_and_rho_square(small_dataset):
    n = len(small_dataset)
    expected = n * (8 * math.log(1 / 3) + 10 * math.log(1 / 5))
    assert null_log_likelihood(small_dataset) == pytest.approx(expected)
    assert rho_square(-50.0, -100.0) == 0.5


def test_empty_dataset_rejected(truth):
    with pytest.raises(ConfigurationError):
        log_likelihood(truth, ChoiceDataset([], indicator_names=truth.measurement.names))


def test_structured_deltas_match_recompute(truth, rspec, small_dataset):
    """Each cached-state update equals the per-respondent change from a full re-evaluation."""
    from iclv.estimation import LikelihoodObjective, ParameterLayout

    engine = SimulatedLikelihood.from_dataset(small_dataset, rspec, DrawSettings(n_draws=20))
    layout = ParameterLayout(rspec, truth)
    obj = LikelihoodObjective(engine, layout)
    theta = layout.to_vector(truth)
    S = engine.state(layout.arrays(theta))
    base = engine.per_person(layout.arrays(theta))
    rng = np.random.default_rng(1)
    for i in rng.choice(len(layout), 20, replace=False):
        t = theta.copy()
        t[i] += 0.01
        change = obj._delta(S, layout.entries[i], layout.arrays(t), 0.01)
        expected = engine.per_person(layout.arrays(t)) - base
        np.testing.assert_allclose(change, expected, rtol=0, atol=1e-10, err_msg=layout.names[i])
