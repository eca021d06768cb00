import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from errors import DimensionMismatch, DomainError, NumericError
from lab.hermitian import (
    HermitianMatrix,
    dilation,
    eig,
    eigh_stack,
    is_psd,
    matrix_function,
    norms,
    op_norm,
    psd_margin,
    psd_order,
    random_hermitian,
    trace_power_abs,
)
from settings import get_settings

SWAP = np.array([[0.0, 1.0], [1.0, 0.0]])


# ══════════════════════════════════════════════════════════════════════════════
# Construction
# ══════════════════════════════════════════════════════════════════════════════

def test_hermitian_matrix_rejects_asymmetric_input():
    with pytest.raises(DomainError, match="not Hermitian"):
        HermitianMatrix(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_hermitian_matrix_rejects_non_square():
    with pytest.raises(DomainError):
        HermitianMatrix(np.ones((2, 3)))


def test_hermitian_matrix_symmetrizes_within_tolerance():
    a = np.array([[1.0, 1.0 + 1e-14], [1.0, 2.0]])
    h = HermitianMatrix(a)
    assert h.entries[0, 1] == h.entries[1, 0]
    assert not h.entries.flags.writeable


def test_literal_omits_zero_imaginary_part():
    literal = HermitianMatrix(SWAP).to_literal()
    assert literal == {"d": 2, "re": [[0.0, 1.0], [1.0, 0.0]]}
    back = HermitianMatrix.from_literal({"d": 2, "re": [[0.0, 0.0], [0.0, 0.0]], "im": [[0.0, -1.0], [1.0, 0.0]]})
    assert_allclose(back.entries, np.array([[0, -1j], [1j, 0]]))


def test_malformed_literal_is_a_domain_error():
    with pytest.raises(DomainError):
        HermitianMatrix.from_literal({"d": 3, "re": [[1.0]]})


# ══════════════════════════════════════════════════════════════════════════════
# Eigendecomposition
# ══════════════════════════════════════════════════════════════════════════════

def test_eig_diagonal_input():
    e = eig(HermitianMatrix.diag([3.0, 1.0]))
    assert_allclose(e.eigenvalues, [1.0, 3.0])
    assert_allclose(np.abs(e.eigenvectors), [[0.0, 1.0], [1.0, 0.0]])


def test_eig_swap_matrix():
    assert_allclose(eig(SWAP).eigenvalues, [-1.0, 1.0], atol=1e-14)


def test_eig_zero_matrix_keeps_identity_vectors():
    e = eig(np.zeros((4, 4)))
    assert_allclose(e.eigenvalues, np.zeros(4))
    assert_allclose(e.eigenvectors, np.eye(4))


@pytest.mark.parametrize("d", [1, 2, 3, 5, 8, 16])
def test_jacobi_reconstruction_and_unitarity(d, rng):
    a = random_hermitian(d, rng, (40,))
    w, v = eigh_stack(a, method="jacobi")
    assert np.all(np.diff(w, axis=-1) >= 0)
    recon = (v * w[..., None, :]) @ np.conj(np.swapaxes(v, -1, -2))
    hs = np.linalg.norm(a, axis=(-2, -1))
    assert np.all(np.linalg.norm(recon - a, axis=(-2, -1)) <= 1e-10 * (1.0 + hs))
    gram = np.conj(np.swapaxes(v, -1, -2)) @ v
    assert np.all(np.linalg.norm(gram - np.eye(d), axis=(-2, -1)) <= 1e-10 * d)


def test_jacobi_agrees_with_lapack(rng):
    a = random_hermitian(6, rng, (25,))
    w_jacobi, _ = eigh_stack(a, method="jacobi")
    w_lapack, _ = eigh_stack(a, method="lapack")
    assert_allclose(w_jacobi, w_lapack, atol=1e-10 * (1.0 + np.abs(w_lapack).max()))


def test_eig_method_follows_settings(monkeypatch, rng):
    monkeypatch.setenv("MCLAB_EIG_METHOD", "lapack")
    get_settings.cache_clear()
    a = random_hermitian(3, rng)
    assert_allclose(eig(a).eigenvalues, np.linalg.eigvalsh(a), atol=1e-12)


def test_unknown_eig_method():
    with pytest.raises(DomainError):
        eigh_stack(np.eye(2), method="qr")


def test_jacobi_sweep_cap_raises_numeric_error(monkeypatch, rng):
    monkeypatch.setenv("MCLAB_JACOBI_MAX_SWEEPS", "1")
    get_settings.cache_clear()
    with pytest.raises(NumericError) as info:
        eigh_stack(random_hermitian(8, rng), method="jacobi")
    assert info.value.diagnostics["sweeps"] == 1
    assert "off_norm" in str(info.value)


def test_non_finite_input_is_a_numeric_error():
    with pytest.raises(NumericError):
        eigh_stack(np.array([[np.nan, 0.0], [0.0, 1.0]]))


# ══════════════════════════════════════════════════════════════════════════════
# Matrix functions and trace powers
# ══════════════════════════════════════════════════════════════════════════════

def test_matrix_exp_of_zero_is_identity():
    out = matrix_function(HermitianMatrix.zeros(3), np.exp)
    assert isinstance(out, HermitianMatrix)
    assert_allclose(out.entries, np.eye(3))


def test_matrix_square_of_diagonal():
    out = matrix_function(HermitianMatrix.diag([1.0, 2.0]), lambda x: x**2)
    assert_allclose(out.entries, np.diag([1.0, 4.0]), atol=1e-14)


def test_signed_cube_fixes_swap():
    out = matrix_function(SWAP, lambda x: np.sign(x) * np.abs(x) ** 3)
    assert_allclose(out, SWAP, atol=1e-12)


def test_matrix_function_identity_reconstructs(rng):
    a = random_hermitian(5, rng)
    assert_allclose(matrix_function(a, lambda x: x), a, atol=1e-10 * (1.0 + np.linalg.norm(a)))


def test_matrix_function_commutes_with_argument(rng):
    a = random_hermitian(4, rng)
    fa = matrix_function(a, np.exp)
    scale = np.linalg.norm(fa, 2) * np.linalg.norm(a, 2)
    assert np.max(np.abs(fa @ a - a @ fa)) <= 1e-9 * scale


def test_matrix_function_undefined_on_spectrum():
    with pytest.raises(DomainError, match="eigenvalue"):
        matrix_function(np.zeros((2, 2)), lambda x: x**-1.0)


@pytest.mark.parametrize(
    "a, p, expected",
    [
        (np.diag([1.0, -2.0]), 3.0, 9.0),
        (np.zeros((3, 3)), 4.0, 0.0),
        (SWAP, 2.5, 2.0),
    ],
)
def test_trace_power_abs(a, p, expected):
    assert trace_power_abs(a, p) == pytest.approx(expected, abs=1e-12)


def test_trace_power_two_is_squared_hs_norm(rng):
    a = random_hermitian(5, rng)
    assert trace_power_abs(a, 2.0) == pytest.approx(np.linalg.norm(a) ** 2, rel=1e-10)


def test_trace_power_below_one_is_rejected():
    with pytest.raises(DomainError):
        trace_power_abs(np.eye(2), 0.5)


# ══════════════════════════════════════════════════════════════════════════════
# Semidefinite order and norms
# ══════════════════════════════════════════════════════════════════════════════

@pytest.mark.parametrize(
    "a, tol, expected",
    [
        (np.eye(3), 0.0, True),
        (np.diag([1.0, -1e-15]), 1e-9, True),
        (np.diag([1.0, -1.0]), 1e-9, False),
    ],
)
def test_is_psd(a, tol, expected):
    assert is_psd(a, tol) is expected


def test_is_psd_rejects_negative_tolerance():
    with pytest.raises(DomainError):
        is_psd(np.eye(2), -1.0)


def test_psd_order_examples():
    a = np.diag([2.0, -1.0])
    assert psd_order(a, a)
    assert psd_order(np.zeros((2, 2)), np.eye(2))
    assert not psd_order(np.eye(2), np.zeros((2, 2)))


@pytest.mark.parametrize("seed", range(5))
def test_psd_order_on_diagonals_is_entrywise(seed):
    rng = np.random.default_rng(seed)
    x, y = rng.standard_normal(4), rng.standard_normal(4)
    assert psd_order(np.diag(x), np.diag(y)) == bool(np.all(x <= y))


def test_psd_order_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        psd_order(np.eye(2), np.eye(3))


def test_psd_margin_is_lambda_min():
    assert psd_margin(np.diag([3.0, -0.5, 1.0])) == pytest.approx(-0.5)


def test_norms_identity():
    assert norms(np.eye(3)) == pytest.approx((1.0, math.sqrt(3.0), 3.0, 1.0, 1.0, 1.0))


def test_norms_zero():
    assert norms(np.zeros((2, 2))) == pytest.approx((0.0,) * 6)


def test_norms_traceless_diagonal():
    n = norms(np.diag([2.0, -2.0]))
    assert n == pytest.approx((2.0, 2.0 * math.sqrt(2.0), 0.0, 0.0, 2.0, -2.0))
    assert n.op_norm == n.lambda_max


# ══════════════════════════════════════════════════════════════════════════════
# Dilation
# ══════════════════════════════════════════════════════════════════════════════

def test_dilation_of_scalar():
    assert_allclose(dilation([[1.0]]).entries, SWAP)


def test_dilation_of_zero():
    d = dilation(np.zeros((2, 3)))
    assert d.dim == 5
    assert_allclose(d.entries, np.zeros((5, 5)))


def test_dilation_norm_is_largest_singular_value():
    d = dilation([[0.0, 2.0]])
    assert d.dim == 3
    assert op_norm(d) == pytest.approx(2.0)


@pytest.mark.parametrize("q", [1.0, 1.5, 2.0, 3.0])
def test_dilation_trace_power_matches_singular_values(q, rng):
    h = rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2))
    sigma = np.linalg.svd(h, compute_uv=False)
    assert trace_power_abs(dilation(h), 2.0 * q) == pytest.approx(2.0 * np.sum(sigma ** (2.0 * q)), rel=1e-10)


def test_random_hermitian_is_hermitian(rng):
    a = random_hermitian(4, rng, (3,))
    assert a.shape == (3, 4, 4)
    assert_allclose(a, np.conj(np.swapaxes(a, -1, -2)))
