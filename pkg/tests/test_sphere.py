import numpy as np
import pytest
from numpy.testing import assert_allclose

from errors import DomainError
from lab.hermitian import psd_margin, random_hermitian
from lab.sphere import (
    SphereLinearModel,
    SphereQuadraticModel,
    gamma_from_tangential,
    gamma_sphere_linear,
    gamma_sphere_quadratic,
    sphere_brownian_path,
    sphere_brownian_step,
    sphere_quadratic_constant_a,
    sphere_quadratic_constant_b,
    sphere_sample,
    sphere_tangential_gradient,
)


def _linear(rng, n=4, d=2):
    return SphereLinearModel(random_hermitian(d, rng, (n + 1,)))


def _quadratic(rng, n=4, d=2):
    return SphereQuadraticModel(random_hermitian(d, rng, (n + 1,)))


def test_sample_is_on_the_sphere(rng):
    x = sphere_sample(5, rng, (100,))
    assert x.shape == (100, 6)
    assert_allclose(np.linalg.norm(x, axis=-1), 1.0)


def test_models_need_three_coefficients():
    with pytest.raises(DomainError):
        SphereLinearModel(np.stack([np.eye(2), np.eye(2)]))
    with pytest.raises(DomainError):
        SphereQuadraticModel(np.stack([np.eye(2), np.eye(2)]))


def test_model_dimensions(rng):
    m = _linear(rng, n=6, d=3)
    assert (m.n, m.d) == (6, 3)
    assert m.as_map().n == 7


def test_linear_gamma_at_the_pole(rng):
    m = _linear(rng)
    e1 = np.eye(m.n + 1)[0]
    a = m.coefficients
    expected = np.einsum("iab,ibc->ac", a, a) - a[0] @ a[0]
    assert_allclose(gamma_sphere_linear(m, e1), expected, atol=1e-12)


def test_tangential_gradient_of_first_coordinate_vanishes_at_the_pole():
    a = np.zeros((3, 2, 2))
    a[0] = np.diag([1.0, 2.0])
    m = SphereLinearModel(a)
    assert_allclose(sphere_tangential_gradient(m.as_map(), [1.0, 0.0, 0.0]), 0.0, atol=1e-15)


@pytest.mark.parametrize("model", [_linear, _quadratic])
def test_closed_form_gamma_matches_tangential_gradient(model, rng):
    m = model(rng)
    closed = gamma_sphere_linear if isinstance(m, SphereLinearModel) else gamma_sphere_quadratic
    for x in sphere_sample(m.n, rng, (20,)):
        assert_allclose(closed(m, x), gamma_from_tangential(m.as_map(), x), atol=1e-10)


def test_linear_gamma_is_below_the_sum_of_squares(rng):
    m = _linear(rng)
    total = np.einsum("iab,ibc->ac", m.coefficients, m.coefficients)
    for x in sphere_sample(m.n, rng, (50,)):
        g = gamma_sphere_linear(m, x)
        assert psd_margin(g) >= -1e-10
        assert psd_margin(total - g) >= -1e-10


def test_quadratic_gamma_vanishes_at_the_pole(rng):
    m = _quadratic(rng)
    assert_allclose(gamma_sphere_quadratic(m, np.eye(m.n + 1)[0]), 0.0, atol=1e-12)


def test_closed_forms_reject_points_off_the_sphere(rng):
    m = _linear(rng)
    with pytest.raises(DomainError):
        gamma_sphere_linear(m, np.full(m.n + 1, 1.0))


def test_quadratic_constants():
    m = SphereQuadraticModel(np.stack([np.eye(2), np.zeros((2, 2)), -np.eye(2)]))
    assert sphere_quadratic_constant_a(m) == pytest.approx(2.0)
    assert sphere_quadratic_constant_b(m) == pytest.approx(1.0)


def test_quadratic_constant_b_is_between_half_a_and_a(rng):
    m = _quadratic(rng, n=3, d=3)
    a, b = sphere_quadratic_constant_a(m), sphere_quadratic_constant_b(m)
    assert a / 2.0 - 1e-12 <= b <= a + 1e-12


# ══════════════════════════════════════════════════════════════════════════════
# Brownian motion
# ══════════════════════════════════════════════════════════════════════════════

def test_zero_step_returns_a_copy(rng):
    x = sphere_sample(3, rng)
    y = sphere_brownian_step(x, 0.0, rng)
    assert_allclose(y, x)
    assert y is not x


def test_steps_stay_on_the_sphere(rng):
    path = sphere_brownian_path(sphere_sample(4, rng, (16,)), 0.05, 30, rng)
    assert path.shape == (30, 16, 5)
    assert_allclose(np.linalg.norm(path, axis=-1), 1.0, atol=1e-12)


def test_step_rejects_bad_input(rng):
    with pytest.raises(DomainError):
        sphere_brownian_step(np.array([2.0, 0.0, 0.0]), 0.1, rng)
    with pytest.raises(DomainError):
        sphere_brownian_step(np.array([1.0, 0.0, 0.0]), -0.1, rng)


def test_brownian_motion_mixes_towards_uniform(rng):
    x = np.tile(np.eye(4)[0], (2000, 1))
    path = sphere_brownian_path(x, 0.02, 100, rng)
    # E x₁ decays like e^{−n t}; at t = 2 it is negligible
    assert abs(path[-1][:, 0].mean()) <= 0.05
