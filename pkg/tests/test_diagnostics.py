import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import spearmanr

from hvi import models
from hvi.diagnostics import (
    MmdConfig,
    approx_error,
    curve_profile,
    ess,
    mcmc_reference,
    mmd,
)
from hvi.estimators import IntegrationRule, PartitionSchedule, draw_batch, tvo
from hvi.paths import PathSpec


# ---------------------------------------------------------------------------
# ESS
# ---------------------------------------------------------------------------

def test_ess_uniform_weights():
    assert ess(np.zeros(50)) == pytest.approx(1.0, abs=1e-14)
    assert ess(np.full(50, -3.2)) == pytest.approx(1.0, abs=1e-12)


def test_ess_single_dominant_weight():
    lw = np.full(20, -np.inf)
    lw[3] = 0.7
    assert ess(lw) == pytest.approx(1 / 20, abs=1e-15)


def test_ess_two_point_closed_form():
    assert ess(np.array([0.0, math.log(3.0)])) == pytest.approx(0.8, abs=1e-12)


def test_ess_validation():
    with pytest.raises(ValueError):
        ess(np.full(4, -np.inf))
    with pytest.raises(ValueError):
        ess(np.array([0.0, np.nan]))
    with pytest.raises(ValueError):
        ess(np.array([]))


@settings(max_examples=50)
@given(st.lists(st.floats(-300, 300), min_size=1, max_size=64))
def test_ess_bounds_property(log_weights):
    value = ess(np.array(log_weights))
    assert 1 / len(log_weights) - 1e-12 <= value <= 1 + 1e-12


# ---------------------------------------------------------------------------
# Curve profiles
# ---------------------------------------------------------------------------

def test_profile_scaled_factor_degenerate(scaled_two):
    profile = curve_profile(scaled_two, PathSpec.geometric(),
                            np.linspace(0, 1, 5), 200, 10, seed=0)
    np.testing.assert_allclose(profile.variances, 0.0, atol=1e-24)
    np.testing.assert_allclose(profile.mean_ess, 1.0, atol=1e-12)


def test_profile_sin_toy_ess_trend(sin_toy):
    betas = np.linspace(0, 1, 21)
    profile = curve_profile(sin_toy, PathSpec.geometric(), betas, 1000, 50, seed=17)
    assert profile.mean_ess[0] == pytest.approx(1.0, abs=1e-12)
    rho, pval = spearmanr(np.tile(betas, 50), profile.ess_values.ravel())
    assert rho < 0 and pval < 0.01
    assert np.all(profile.variances >= 0)


def test_profile_deterministic(sin_toy):
    a = curve_profile(sin_toy, PathSpec.geometric(), [0.0, 0.5, 1.0], 100, 5, seed=3)
    b = curve_profile(sin_toy, PathSpec.geometric(), [0.0, 0.5, 1.0], 100, 5, seed=3)
    np.testing.assert_array_equal(a.means, b.means)
    np.testing.assert_array_equal(a.ess_values, b.ess_values)


def test_profile_requires_replicates(sin_toy):
    with pytest.raises(ValueError):
        curve_profile(sin_toy, PathSpec.geometric(), [0.0, 1.0], 100, 1, seed=0)


# ---------------------------------------------------------------------------
# MMD
# ---------------------------------------------------------------------------

def test_mmd_identical_samples_is_zero():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(200, 2))
    assert mmd(x, x) == 0.0


def test_mmd_permutation_invariant():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(300, 2))
    y = rng.normal(0.5, 1.0, size=(400, 2))
    shuffled = x[rng.permutation(300)]
    assert mmd(x, y) == pytest.approx(mmd(shuffled, y), abs=1e-12)


def test_mmd_same_distribution_is_small():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(1000, 1))
    y = rng.normal(size=(1000, 1))
    assert mmd(x, y) < 0.05


def test_mmd_separates_shifted_distributions():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(500, 1))
    assert mmd(x + 3.0, x) > 10 * mmd(x, x + 0.01)


def test_mmd_dimension_mismatch():
    with pytest.raises(ValueError):
        mmd(np.zeros((5, 2)), np.zeros((5, 3)))
    with pytest.raises(ValueError):
        mmd(np.zeros((0, 2)), np.zeros((5, 2)))


def test_mmd_config_validation():
    with pytest.raises(ValueError):
        MmdConfig(bandwidth=0.0)


# ---------------------------------------------------------------------------
# MCMC reference
# ---------------------------------------------------------------------------

def test_mcmc_standard_normal_target():
    # scaled_factor(1) target is exactly N(0, 1)
    model = models.make_scaled_factor(1.0)
    ref = mcmc_reference(model, chains=4, steps=42000, burn_in=2000, thin=20, seed=2)
    pooled = ref.pooled
    assert 0.0 < ref.acceptance_rate < 1.0
    assert abs(pooled.mean()) < 3.0 / math.sqrt(pooled.shape[0])
    assert pooled.std() == pytest.approx(1.0, abs=0.05)


def test_mcmc_ring_radius(ring):
    ref = mcmc_reference(ring, chains=4, steps=12000, burn_in=2000, thin=5, seed=1)
    radius = np.sqrt((ref.pooled ** 2).sum(axis=1))
    assert 0.95 < radius.mean() < 1.05


def test_mcmc_bayes_regression_posterior():
    model = models.make_bayes_regression(models.simulate_bayes_dataset(0))
    ref = mcmc_reference(model, chains=4, steps=65000, burn_in=5000, thin=40, seed=42)
    pooled = ref.pooled
    mean = pooled.mean(axis=0)
    std = pooled.std(axis=0)
    assert abs(mean[0] - 25.0) < 3 * std[0]
    assert abs(mean[1] - 0.5) < 3 * std[1]
    # crude convergence: across-chain mean spread within 4 within-chain ses
    chain_means = ref.samples.mean(axis=1)
    within_se = ref.samples.std(axis=1, ddof=1) / math.sqrt(ref.samples.shape[1])
    spread = chain_means.max(axis=0) - chain_means.min(axis=0)
    assert np.all(spread < 4 * within_se.mean(axis=0))


def test_mcmc_deterministic(ring):
    a = mcmc_reference(ring, chains=2, steps=3000, burn_in=500, thin=5, seed=9)
    b = mcmc_reference(ring, chains=2, steps=3000, burn_in=500, thin=5, seed=9)
    assert np.array_equal(a.pooled, b.pooled)
    assert a.acceptance_rate == b.acceptance_rate


def test_mcmc_validation(ring):
    with pytest.raises(ValueError):
        mcmc_reference(ring, steps=100, burn_in=100)


# ---------------------------------------------------------------------------
# Approximation error
# ---------------------------------------------------------------------------

def test_approx_error_zero_for_exact_oracle():
    x_grid = np.linspace(-1, 1, 21)
    err = approx_error(lambda x: models.make_sin_toy(x_obs=x), x_grid,
                       lambda m: models.quadrature_log_marginal(m))
    assert err == pytest.approx(0.0, abs=1e-12)


def test_approx_error_nonnegative_and_orders_budgets(sin_toy):
    x_grid = np.linspace(-1.5, 1.5, 31)
    sched_fine = PartitionSchedule.uniform(40)
    sched_coarse = PartitionSchedule.uniform(2)

    def estimate(sched):
        return lambda m: tvo(draw_batch(m, 200, 7), sched, IntegrationRule.LEFT)

    err_fine = approx_error(lambda x: models.make_sin_toy(x_obs=x), x_grid, estimate(sched_fine))
    err_coarse = approx_error(lambda x: models.make_sin_toy(x_obs=x), x_grid, estimate(sched_coarse))
    assert 0.0 <= err_fine < err_coarse


def test_approx_error_validates_grid(sin_toy):
    with pytest.raises(ValueError):
        approx_error(lambda x: sin_toy, [0.0], lambda m: 0.0)
