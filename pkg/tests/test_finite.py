import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from errors import DimensionMismatch, DomainError, ResourceError
from lab.finite import (
    FiniteProductSpace,
    InterlacingIndex,
    MatrixField,
    carre_du_champ,
    carre_du_champ2,
    carre_du_champ2_from_definition,
    carre_du_champ_from_definition,
    dirichlet_form,
    energy_dissipation,
    expectation,
    generator_apply,
    limit_formula_gamma,
    log_trace_mgf,
    matrix_variance,
    r_beta,
    rademacher_series,
    sample_states,
    semigroup_apply,
    trace_mgf,
    trace_moment,
    triple_product_density,
    variance_derivative,
    variance_proxy,
)
from lab.hermitian import op_norm, psd_margin
from settings import get_settings

A = np.diag([1.0, -1.0])


# ══════════════════════════════════════════════════════════════════════════════
# Brute-force oracle: explicit loops over states and single-coordinate resamples
# ══════════════════════════════════════════════════════════════════════════════

def _resamples(space, state, i):
    for k, w in enumerate(space.weights[i]):
        moved = list(state)
        moved[i] = k
        yield w, tuple(moved)


def brute_generator(space, values):
    out = np.zeros(values.shape, dtype=complex)
    for z in space.states():
        for i in range(space.n):
            for w, moved in _resamples(space, z, i):
                out[z] += w * (values[moved] - values[z])
    return out


def brute_gamma(space, f, g):
    out = np.zeros(f.shape, dtype=complex)
    for z in space.states():
        for i in range(space.n):
            for w, moved in _resamples(space, z, i):
                out[z] += 0.5 * w * (f[z] - f[moved]) @ (g[z] - g[moved])
    return out


def brute_gamma2(space, f, g):
    lf, lg = brute_generator(space, f), brute_generator(space, g)
    return 0.5 * (brute_generator(space, brute_gamma(space, f, g)) - brute_gamma(space, f, lg) - brute_gamma(space, lf, g))


def brute_semigroup(space, values, t):
    """Σ over interlacing subsets I of (1 − e^{−t})^{|I|} e^{−t(n−|I|)} E_I f."""
    out = np.zeros(values.shape, dtype=complex)
    for index in InterlacingIndex.all(space.n):
        k = index.size
        weight = (1.0 - math.exp(-t)) ** k * math.exp(-t * (space.n - k))
        for z in space.states():
            for w_state in space.states():
                w = np.prod([space.weights[i][w_state[i]] for i in index.members()])
                if any(w_state[i] != 0 for i in range(space.n) if i not in index.members()):
                    continue
                out[z] += weight * w * values[index.interlace(z, w_state)]
    return out


def _labelled_space():
    return FiniteProductSpace.from_factors([[(0.0, 0.25), (1.0, 0.75)]])


# ══════════════════════════════════════════════════════════════════════════════
# Spaces
# ══════════════════════════════════════════════════════════════════════════════

def test_weights_are_renormalized():
    space = FiniteProductSpace(weights=([0.2, 0.3, 0.5 + 1e-13],))
    assert space.weights[0].sum() == pytest.approx(1.0, abs=1e-15)
    assert space.shape == (3,)


@pytest.mark.parametrize("weights", [([0.5, 0.6],), ([1.2, -0.2],), ([],), ()])
def test_invalid_weights(weights):
    with pytest.raises(DomainError):
        FiniteProductSpace(weights=weights)


def test_enumeration_cap(monkeypatch):
    monkeypatch.setenv("MCLAB_ENUMERATION_CAP", "10")
    get_settings.cache_clear()
    with pytest.raises(ResourceError):
        FiniteProductSpace.uniform([4, 4])


def test_joint_weights_are_a_product():
    space = FiniteProductSpace.from_factors([[(0, 0.25), (1, 0.75)], [(0, 0.5), (1, 0.5)]])
    assert_allclose(space.joint_weights, [[0.125, 0.125], [0.375, 0.375]])


def test_interlacing_index():
    index = InterlacingIndex.of([0, 2], 3)
    assert index.members() == (0, 2)
    assert index.size == 2
    assert index.interlace(("z0", "z1", "z2"), ("w0", "w1", "w2")) == ("w0", "z1", "w2")
    assert len(list(InterlacingIndex.all(3))) == 8


def test_interlacing_index_rejects_stray_bits():
    with pytest.raises(DomainError):
        InterlacingIndex(0b100, 2)


def test_sample_states_follow_weights(rng):
    space = _labelled_space()
    states = sample_states(space, 20000, rng)
    assert states.shape == (20000, 1)
    p = states.mean()
    assert abs(p - 0.75) <= 4 * math.sqrt(0.75 * 0.25 / 20000)


def test_field_shape_mismatch(small_space):
    with pytest.raises(DimensionMismatch):
        MatrixField(small_space, np.zeros((3, 2, 2)))


def test_field_literal_round_trip(random_field):
    back = MatrixField.from_literal(random_field.to_literal())
    assert back.space.shape == random_field.space.shape
    for w_back, w in zip(back.space.weights, random_field.space.weights):
        assert_allclose(w_back, w, rtol=1e-14)
    assert_allclose(back.values, random_field.values)


# ══════════════════════════════════════════════════════════════════════════════
# Expectation, semigroup and generator
# ══════════════════════════════════════════════════════════════════════════════

def test_expectation_of_constant(small_space):
    c = np.array([[2.0, 1j], [-1j, 0.5]])
    assert_allclose(expectation(MatrixField.constant(small_space, c)), c)


def test_expectation_of_rademacher_linear(rademacher_linear):
    assert_allclose(expectation(rademacher_linear), np.zeros((2, 2)))


def test_expectation_with_unequal_weights():
    f = MatrixField.from_function(_labelled_space(), lambda z: z[0] * np.eye(2))
    assert_allclose(expectation(f), 0.75 * np.eye(2))


def test_semigroup_at_zero_is_identity(random_field):
    assert semigroup_apply(random_field, 0.0) is random_field


def test_semigroup_at_large_time_is_the_mean(random_field):
    mean = expectation(random_field)
    pf = semigroup_apply(random_field, 1e6)
    assert np.max(np.abs(pf.values - mean)) <= 1e-12


@pytest.mark.parametrize("t", [0.1, 1.0, 3.0])
def test_semigroup_single_factor(t, rng):
    space = FiniteProductSpace.random([4], rng)
    f = MatrixField.random(space, 3, rng)
    expected = math.exp(-t) * f.values + (1.0 - math.exp(-t)) * expectation(f)
    assert_allclose(semigroup_apply(f, t).values, expected, atol=1e-12)


@pytest.mark.parametrize("t", [0.3, 1.5])
def test_semigroup_matches_brute_force(t, random_field):
    expected = brute_semigroup(random_field.space, random_field.values, t)
    assert_allclose(semigroup_apply(random_field, t, method="subset").values, expected, atol=1e-12)
    assert_allclose(semigroup_apply(random_field, t, method="factorized").values, expected, atol=1e-12)


def test_semigroup_preserves_the_mean(random_field):
    assert_allclose(expectation(semigroup_apply(random_field, 0.8)), expectation(random_field), atol=1e-12)


def test_semigroup_law(random_field):
    for s in (0.1, 0.5, 1.0):
        for t in (0.1, 0.5, 1.0):
            composed = semigroup_apply(semigroup_apply(random_field, s), t)
            assert_allclose(composed.values, semigroup_apply(random_field, s + t).values, atol=1e-10)


def test_semigroup_factor_cap(monkeypatch, rng):
    monkeypatch.setenv("MCLAB_SEMIGROUP_MAX_FACTORS", "2")
    get_settings.cache_clear()
    f = MatrixField.random(FiniteProductSpace.uniform([2, 2, 2]), 2, rng)
    with pytest.raises(ResourceError):
        semigroup_apply(f, 1.0)


@pytest.mark.parametrize("t", [-1.0, math.inf, math.nan])
def test_semigroup_rejects_bad_times(t, random_field):
    with pytest.raises(DomainError):
        semigroup_apply(random_field, t)


def test_generator_kills_constants(small_space):
    f = MatrixField.constant(small_space, np.eye(2))
    assert_allclose(generator_apply(f).values, 0.0, atol=1e-13)


def test_generator_of_rademacher_linear(rademacher_linear):
    assert_allclose(generator_apply(rademacher_linear).values, -rademacher_linear.values)


def test_generator_matches_brute_force(random_field):
    assert_allclose(generator_apply(random_field).values, brute_generator(random_field.space, random_field.values), atol=1e-12)


def test_generator_has_mean_zero(random_field):
    assert_allclose(expectation(generator_apply(random_field)), 0.0, atol=1e-12)


def test_generator_is_the_derivative_of_the_semigroup(random_field):
    lf = generator_apply(random_field).values
    errors = []
    for h in (1e-3, 5e-4):
        diff = (semigroup_apply(random_field, h).values - random_field.values) / h
        errors.append(np.max(np.abs(diff - lf)))
    assert errors[0] <= 1e-2 * (1.0 + np.max(np.abs(lf)))
    assert 1.5 <= errors[0] / errors[1] <= 2.5


# ══════════════════════════════════════════════════════════════════════════════
# Carré du champ operators
# ══════════════════════════════════════════════════════════════════════════════

def test_gamma_of_constant(small_space):
    f = MatrixField.constant(small_space, np.diag([1.0, 3.0]))
    assert_allclose(carre_du_champ(f).values, 0.0, atol=1e-13)


def test_gamma_of_rademacher_linear(rademacher_linear):
    gamma = carre_du_champ(rademacher_linear).values
    assert_allclose(gamma[0], A @ A)
    assert_allclose(gamma[1], A @ A)


def test_gamma_matches_brute_force(small_space, rng):
    f, g = MatrixField.random(small_space, 2, rng), MatrixField.random(small_space, 2, rng)
    assert_allclose(carre_du_champ(f, g).values, brute_gamma(small_space, f.values, g.values), atol=1e-12)


def test_gamma_is_bilinear(small_space, rng):
    f, g = MatrixField.random(small_space, 2, rng), MatrixField.random(small_space, 2, rng)
    assert_allclose(carre_du_champ(2.0 * f, g).values, 2.0 * carre_du_champ(f, g).values, atol=1e-13)


def test_gamma_is_psd(random_field):
    margins = psd_margin(carre_du_champ(random_field).values)
    assert np.all(margins >= -1e-10)


def test_gamma_agrees_with_definition(small_space, rng):
    f, g = MatrixField.random(small_space, 3, rng), MatrixField.random(small_space, 3, rng)
    assert_allclose(carre_du_champ(f, g).values, carre_du_champ_from_definition(f, g).values, atol=1e-10)


def test_gamma_on_mismatched_spaces(small_space, rng):
    other = FiniteProductSpace.uniform([2, 3, 2])
    with pytest.raises(DimensionMismatch):
        carre_du_champ(MatrixField.random(small_space, 2, rng), MatrixField.random(other, 2, rng))


def test_gamma2_of_constant(small_space):
    f = MatrixField.constant(small_space, np.eye(2))
    assert_allclose(carre_du_champ2(f).values, 0.0, atol=1e-13)


def test_gamma2_of_rademacher_linear(rademacher_linear):
    gamma = carre_du_champ(rademacher_linear).values
    gamma2 = carre_du_champ2(rademacher_linear).values
    assert_allclose(gamma2, brute_gamma2(rademacher_linear.space, rademacher_linear.values, rademacher_linear.values), atol=1e-14)
    assert np.all(psd_margin(2.0 * gamma2 - gamma) >= -1e-12)


@pytest.mark.parametrize("sizes", [[2, 3, 2], [3], [2, 2, 2, 2]])
def test_gamma2_matches_brute_force(sizes, rng):
    space = FiniteProductSpace.random(sizes, rng)
    f, g = MatrixField.random(space, 2, rng), MatrixField.random(space, 2, rng)
    assert_allclose(carre_du_champ2(f, g).values, brute_gamma2(space, f.values, g.values), atol=1e-10)


def test_gamma2_agrees_with_definition(small_space, rng):
    f, g = MatrixField.random(small_space, 2, rng), MatrixField.random(small_space, 2, rng)
    assert_allclose(carre_du_champ2(f, g).values, carre_du_champ2_from_definition(f, g).values, atol=1e-10)


def test_mean_gamma2_is_mean_squared_generator(random_field):
    lf = generator_apply(random_field)
    assert_allclose(expectation(carre_du_champ2(random_field)), expectation(lf @ lf), atol=1e-10)


def test_degenerate_factor_contributes_nothing(rng):
    space = FiniteProductSpace.random([1, 3], rng)
    f = MatrixField.random(space, 2, rng)
    assert_allclose(carre_du_champ(f).values, brute_gamma(space, f.values, f.values), atol=1e-12)


@pytest.mark.parametrize("t", [1e-4, 1e-6])
def test_limit_formula_approaches_gamma(t, small_space, rng):
    f, g = MatrixField.random(small_space, 2, rng), MatrixField.random(small_space, 2, rng)
    gamma = carre_du_champ(f, g).values
    err = np.max(np.abs(limit_formula_gamma(f, g, t).values - gamma))
    assert err <= 1000.0 * t * (1.0 + np.max(np.abs(gamma)))


def test_triple_product_averages_to_zero(small_space, rng):
    f, g, h = (MatrixField.random(small_space, 2, rng) for _ in range(3))
    density = triple_product_density(f, g, h)
    assert abs(np.sum(small_space.joint_weights * density)) <= 1e-10 * (1.0 + np.sum(np.abs(density)))


# ══════════════════════════════════════════════════════════════════════════════
# Dirichlet form, variance and moments
# ══════════════════════════════════════════════════════════════════════════════

def test_dirichlet_form_examples(small_space, rademacher_linear):
    assert_allclose(dirichlet_form(MatrixField.constant(small_space, np.eye(2))), 0.0, atol=1e-13)
    assert_allclose(dirichlet_form(rademacher_linear), A @ A)


def test_dirichlet_form_by_integration_by_parts(small_space, rng):
    f, g = MatrixField.random(small_space, 2, rng), MatrixField.random(small_space, 2, rng)
    assert_allclose(dirichlet_form(f, g), -expectation(f @ generator_apply(g)), atol=1e-10)


def test_matrix_variance_examples(small_space, rademacher_linear, random_field):
    assert_allclose(matrix_variance(MatrixField.constant(small_space, np.eye(2))), 0.0, atol=1e-13)
    assert_allclose(matrix_variance(rademacher_linear), A @ A)
    centered = random_field.values - expectation(random_field)
    assert_allclose(matrix_variance(random_field), expectation(MatrixField(small_space, centered @ centered)), atol=1e-12)
    assert psd_margin(matrix_variance(random_field)) >= -1e-10


def test_poincare_with_unit_constant(random_field):
    assert psd_margin(dirichlet_form(random_field) - matrix_variance(random_field)) >= -1e-10


def test_trace_moment_examples(small_space, rademacher_linear):
    assert trace_moment(MatrixField.constant(small_space, np.eye(2)), 2.0) == pytest.approx(0.0, abs=1e-15)
    assert trace_moment(rademacher_linear, 2.0) == pytest.approx(2.0)


def test_trace_moment_decreases_in_p_for_contractions(small_space, rng):
    f = MatrixField.random(small_space, 2, rng)
    scale = 0.5 / np.max(op_norm(f.values))
    g = scale * f
    moments = [trace_moment(g, p) for p in (1.0, 2.0, 3.0, 4.0)]
    assert all(a >= b for a, b in zip(moments, moments[1:]))


def test_trace_moment_rejects_small_p(rademacher_linear):
    with pytest.raises(DomainError):
        trace_moment(rademacher_linear, 0.5)


@pytest.mark.parametrize("theta", [-2.0, -0.3, 0.5, 1.0, 4.0])
def test_trace_mgf_of_rademacher_linear_is_cosh(theta, rademacher_linear):
    assert trace_mgf(rademacher_linear, theta) == pytest.approx(math.cosh(theta), rel=1e-12)


def test_trace_mgf_properties(random_field):
    assert trace_mgf(random_field, 0.0) == pytest.approx(1.0)
    for theta in (-1.0, 0.5, 2.0):
        assert log_trace_mgf(random_field, theta) >= -1e-12


def test_log_trace_mgf_is_stable_for_large_theta(rademacher_linear):
    assert log_trace_mgf(rademacher_linear, 800.0) == pytest.approx(800.0 - math.log(2.0), rel=1e-12)


def test_variance_proxy_examples(small_space, rademacher_linear, random_field):
    assert variance_proxy(MatrixField.constant(small_space, np.eye(2))) == pytest.approx(0.0, abs=1e-15)
    assert variance_proxy(rademacher_linear) == pytest.approx(1.0)
    assert variance_proxy(random_field) >= op_norm(dirichlet_form(random_field)) - 1e-10


def test_r_beta_for_constant_gamma(rademacher_linear):
    for beta in (0.01, 1.0, 50.0):
        assert r_beta(rademacher_linear, beta) == pytest.approx(1.0, rel=1e-12)


@pytest.mark.parametrize("beta", [0.1, 1.0, 10.0, 1000.0])
def test_r_beta_is_at_most_the_variance_proxy(beta, random_field):
    assert r_beta(random_field, beta) <= variance_proxy(random_field) + 1e-12


def test_r_beta_rejects_nonpositive_beta(rademacher_linear):
    with pytest.raises(DomainError):
        r_beta(rademacher_linear, 0.0)


# ══════════════════════════════════════════════════════════════════════════════
# Dissipation
# ══════════════════════════════════════════════════════════════════════════════

@pytest.mark.parametrize("t", [0.5, 1.0])
def test_variance_dissipates_at_twice_the_energy(t, random_field):
    expected = -2.0 * dirichlet_form(semigroup_apply(random_field, t))
    assert_allclose(variance_derivative(random_field, t), expected, atol=1e-6)


def test_energy_dissipation_matches_finite_difference(random_field):
    t, h = 0.7, 1e-5
    numeric = (dirichlet_form(semigroup_apply(random_field, t + h)) - dirichlet_form(semigroup_apply(random_field, t - h))) / (2 * h)
    assert_allclose(numeric, energy_dissipation(random_field, t), atol=1e-6)


def test_dissipation_under_the_reference_measure_is_the_default(random_field):
    space = random_field.space
    assert_allclose(matrix_variance(random_field, space), matrix_variance(random_field))
    assert_allclose(dirichlet_form(random_field, measure=space), dirichlet_form(random_field))
    assert_allclose(energy_dissipation(random_field, 0.5, measure=space), energy_dissipation(random_field, 0.5))


def test_variance_dissipation_needs_the_reversible_measure(random_field, rng):
    nu = random_field.space.tilted(1.0, rng)
    expected = -2.0 * dirichlet_form(semigroup_apply(random_field, 0.5), measure=nu)
    assert not np.allclose(variance_derivative(random_field, 0.5, measure=nu), expected, atol=1e-6)


def test_rademacher_series_needs_one_coefficient_per_factor():
    with pytest.raises(DimensionMismatch):
        rademacher_series(FiniteProductSpace.rademacher(2), [A])
