import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from errors import DimensionMismatch, DomainError
from lab.euclidean import (
    Domain,
    GaussianSeries,
    LogConcaveModel,
    MatrixValuedMap,
    gamma2_euclidean,
    gamma_euclidean,
    gaussian_series,
    langevin_sample,
    langevin_step,
    ou_semigroup_estimate,
    polynomial_map,
)
from lab.hermitian import psd_margin, random_hermitian

SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]])
SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]])


def test_gaussian_series_gamma_is_constant(rng):
    coeffs = random_hermitian(3, rng, (4,))
    f = gaussian_series(coeffs)
    expected = np.einsum("iab,ibc->ac", coeffs, coeffs)
    for z in rng.standard_normal((5, 4)):
        assert_allclose(gamma_euclidean(f, z), expected, atol=1e-12)
        assert_allclose(gamma2_euclidean(f, LogConcaveModel.gaussian(4), z), expected, atol=1e-12)


def test_squared_coordinate_times_matrix():
    b = np.zeros((2, 2, 2, 2))
    b[0, 0] = SIGMA_X
    f = polynomial_map(np.zeros((2, 2)), quadratic=b)
    e1 = np.array([1.0, 0.0])
    assert_allclose(f(e1), SIGMA_X)
    assert_allclose(gamma_euclidean(f, e1), 4.0 * np.eye(2))
    assert_allclose(gamma2_euclidean(f, LogConcaveModel.gaussian(2), e1), 8.0 * np.eye(2))


def test_finite_difference_gradient_matches_analytic(rng):
    b = random_hermitian(2, rng, (3, 3))
    exact = polynomial_map(SIGMA_Z, linear=random_hermitian(2, rng, (3,)), quadratic=b)
    numeric = MatrixValuedMap(Domain.EUCLIDEAN, 3, 2, exact.evaluator)
    z = rng.standard_normal(3)
    assert_allclose(numeric.gradient(z), exact.gradient(z), atol=1e-7)
    assert_allclose(numeric.hessian(z), exact.hessian(z), atol=1e-4)
    assert_allclose(gamma_euclidean(numeric, z), gamma_euclidean(exact, z), atol=1e-6)


def test_points_must_match_dimension():
    f = gaussian_series([SIGMA_Z, SIGMA_X])
    with pytest.raises(DimensionMismatch):
        f(np.zeros(3))


def test_gaussian_series_shape_is_checked():
    with pytest.raises(DimensionMismatch):
        GaussianSeries(np.eye(2))


def test_quartic_curvature_dominates_gamma(rng):
    model = LogConcaveModel.quartic(3, eta=1.5, kappa=0.4)
    f = polynomial_map(np.zeros((2, 2)), linear=random_hermitian(2, rng, (3,)), quadratic=random_hermitian(2, rng, (3, 3)))
    for z in rng.standard_normal((10, 3)):
        slack = gamma2_euclidean(f, model, z) - model.eta * gamma_euclidean(f, z)
        assert psd_margin(slack) >= -1e-10


@pytest.mark.parametrize("eta, kappa", [(0.0, 1.0), (1.0, -0.5)])
def test_log_concave_model_validation(eta, kappa):
    with pytest.raises(DomainError):
        LogConcaveModel.quartic(2, eta, kappa)


# ══════════════════════════════════════════════════════════════════════════════
# Ornstein–Uhlenbeck semigroup and Langevin sampling
# ══════════════════════════════════════════════════════════════════════════════

def test_ou_semigroup_at_zero_is_exact():
    f = gaussian_series([SIGMA_Z, SIGMA_X])
    est = ou_semigroup_estimate(f, [0.3, -1.2], 0.0, samples=10)
    assert_allclose(est.value, 0.3 * SIGMA_Z - 1.2 * SIGMA_X)
    assert np.all(est.stderr == 0.0)


def test_ou_semigroup_contracts_linear_maps():
    f = gaussian_series([SIGMA_Z])
    est = ou_semigroup_estimate(f, [1.0], math.log(2.0), samples=20000, seed=7)
    assert np.all(np.abs(est.value - 0.5 * SIGMA_Z) <= 4.0 * est.stderr + 1e-12)
    assert est.samples == 20000


def test_ou_semigroup_is_seeded():
    f = gaussian_series([SIGMA_Z, SIGMA_X])
    a = ou_semigroup_estimate(f, [1.0, 0.0], 0.5, samples=100, seed=3)
    b = ou_semigroup_estimate(f, [1.0, 0.0], 0.5, samples=100, seed=3)
    assert np.array_equal(a.value, b.value)


def test_ou_semigroup_rejects_negative_time():
    with pytest.raises(DomainError):
        ou_semigroup_estimate(gaussian_series([SIGMA_Z]), [0.0], -1.0, samples=10)


def test_langevin_step_is_euler_maruyama():
    model = LogConcaveModel.gaussian(2)
    z, h = np.array([1.0, -2.0]), 0.1
    step = langevin_step(model, z, h, np.random.default_rng(11))
    noise = np.random.default_rng(11).standard_normal(2)
    assert_allclose(step, (1.0 - h) * z + math.sqrt(2.0 * h) * noise)


def test_langevin_step_rejects_nonpositive_step(rng):
    with pytest.raises(DomainError):
        langevin_step(LogConcaveModel.gaussian(1), [0.0], 0.0, rng)


def test_langevin_sample_targets_the_gaussian(rng):
    draws = langevin_sample(LogConcaveModel.gaussian(2), 4000, rng)
    assert draws.shape == (4000, 2)
    assert np.all(np.abs(draws.mean(axis=0)) <= 0.1)
    assert np.all(np.abs(draws.var(axis=0) - 1.0) <= 0.15)
