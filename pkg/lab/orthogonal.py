"""Products of the special orthogonal group SO(d) under Haar measure."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import numpy.typing as npt

from errors import DimensionMismatch, DomainError
from lab.hermitian import ComplexArray, RealArray, hermitize, spectral_apply

ORTHOGONALITY_TOL = 1e-10


def so_sample_haar(d: int, rng: np.random.Generator, size: tuple[int, ...] = ()) -> RealArray:
    """Haar-distributed rotations, shape ``size + (d, d)``."""
    g = rng.standard_normal(tuple(size) + (d, d))
    q, r = np.linalg.qr(g)
    signs = np.sign(np.diagonal(r, axis1=-2, axis2=-1))
    signs[signs == 0] = 1.0
    q = q * signs[..., None, :]
    flip = np.linalg.det(q) < 0
    q[flip, :, 0] *= -1.0
    return q


@lru_cache(maxsize=16)
def skew_basis(d: int) -> RealArray:
    """Orthonormal skew-symmetric basis S_kl = (E_kl − E_lk)/√2 for k < l."""
    basis = []
    for k in range(d):
        for l in range(k + 1, d):
            s = np.zeros((d, d))
            s[k, l] = 1.0 / math.sqrt(2.0)
            s[l, k] = -1.0 / math.sqrt(2.0)
            basis.append(s)
    out = np.array(basis).reshape((-1, d, d))
    out.setflags(write=False)
    return out


def skew_basis_sum(m: npt.ArrayLike) -> RealArray:
    """Σ_{k<l} S_kl·M·S_kl by direct summation."""
    m = np.asarray(m, dtype=float)
    s = skew_basis(m.shape[-1])
    return np.einsum("kab,...bc,kce->...ae", s, m, s)


def skew_basis_sum_closed_form(m: npt.ArrayLike) -> RealArray:
    """−½(tr[M]·I − Mᵀ)."""
    m = np.asarray(m, dtype=float)
    d = m.shape[-1]
    tr = np.trace(m, axis1=-2, axis2=-1)
    return -0.5 * (tr[..., None, None] * np.eye(d) - np.swapaxes(m, -1, -2))


def skew_exp(s: npt.ArrayLike, h: float) -> RealArray:
    """exp(h·S) for real skew S, via the Hermitian spectral calculus of iS."""
    s = np.asarray(s, dtype=float)
    u = spectral_apply(1j * s, lambda w: np.exp(-1j * h * w))
    return np.real(u)


@dataclass(frozen=True)
class SOConjugationModel:
    """f(O₁, ..., Oₙ) = Σᵢ Oᵢ·Aᵢ·Oᵢᵀ with real symmetric Aᵢ."""

    coefficients: RealArray

    def __post_init__(self):
        a = np.asarray(self.coefficients)
        if np.iscomplexobj(a):
            if np.any(a.imag != 0.0):
                raise DomainError("SO(d) conjugation coefficients must be real")
            a = a.real
        a = np.array(a, dtype=float)
        if a.ndim != 3 or a.shape[-1] != a.shape[-2] or a.shape[0] < 1:
            raise DimensionMismatch(f"Coefficients must have shape (n, d, d), got {a.shape}")
        if a.shape[-1] < 2:
            raise DomainError("SO(d) needs d >= 2")
        if np.max(np.abs(a - np.swapaxes(a, -1, -2))) > 1e-12 * max(1.0, float(np.max(np.abs(a)))):
            raise DomainError("SO(d) conjugation coefficients must be symmetric")
        a = 0.5 * (a + np.swapaxes(a, -1, -2))
        a.setflags(write=False)
        object.__setattr__(self, "coefficients", a)

    @property
    def n(self) -> int:
        return self.coefficients.shape[0]

    @property
    def d(self) -> int:
        return self.coefficients.shape[-1]

    def __call__(self, rotations: npt.ArrayLike) -> ComplexArray:
        o = np.asarray(rotations, dtype=float)
        if o.shape[-3:] != (self.n, self.d, self.d):
            raise DimensionMismatch(f"Expected rotations of shape (..., {self.n}, {self.d}, {self.d}), got {o.shape}")
        return np.einsum("...iab,ibc,...idc->...ad", o, self.coefficients, o).astype(np.complex128)


def _require_orthogonal(o: RealArray) -> None:
    eye = np.eye(o.shape[-1])
    err = np.max(np.abs(np.swapaxes(o, -1, -2) @ o - eye))
    if err > ORTHOGONALITY_TOL:
        raise DomainError(f"Input is not orthogonal: max |OᵀO − I| = {err:.3e}")


def gamma_so_conjugation(m: SOConjugationModel, rotations: npt.ArrayLike) -> ComplexArray:
    """Γ(f) = ½ Σᵢ Oᵢ[(tr Aᵢ² − tr[Aᵢ]²/d)·I + d(Aᵢ − tr[Aᵢ]/d·I)²]Oᵢᵀ."""
    o = np.asarray(rotations, dtype=float)
    _require_orthogonal(o)
    a = m.coefficients
    d = m.d
    eye = np.eye(d)
    tr = np.trace(a, axis1=-2, axis2=-1)
    tr_sq = np.einsum("iab,iba->i", a, a)
    centered = a - (tr / d)[:, None, None] * eye
    inner = (tr_sq - tr**2 / d)[:, None, None] * eye + d * centered @ centered
    out = 0.5 * np.einsum("...iab,ibc,...idc->...ad", o, inner, o)
    return hermitize(out)


def gamma_geodesic_fd(m: SOConjugationModel, rotations: npt.ArrayLike, h: float = 1e-5) -> ComplexArray:
    """Σᵢ Σ_{k<l} [(f(…, exp(h·S_kl)Oᵢ, …) − f(…))/h]²: a forward-difference estimate of Γ."""
    if not h > 0:
        raise DomainError(f"step must be positive, got {h}")
    o = np.asarray(rotations, dtype=float)
    _require_orthogonal(o)
    base = m(o)
    moves = skew_exp(skew_basis(m.d), h)
    total = np.zeros(base.shape, dtype=np.complex128)
    for i in range(m.n):
        for g in moves:
            moved = o.copy()
            moved[..., i, :, :] = g @ o[..., i, :, :]
            diff = (m(moved) - base) / h
            total += diff @ diff
    return hermitize(total)
