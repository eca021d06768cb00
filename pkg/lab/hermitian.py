"""Dense complex Hermitian linear algebra.

All eigendecompositions go through :func:`eigh_stack`, a batched cyclic Jacobi
solver working on ``(..., d, d)`` stacks. Matrix functions, semidefinite order
tests and trace functionals are spectral and built on top of it.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Callable, NamedTuple, Optional, Union

import numpy as np
import numpy.typing as npt

from errors import DimensionMismatch, DomainError, NumericError
from settings import get_settings

logger = logging.getLogger(__name__)

ComplexArray = npt.NDArray[np.complex128]
RealArray = npt.NDArray[np.float64]
ScalarFunction = Callable[[RealArray], npt.ArrayLike]

HERMITIAN_RTOL = 1e-12


def dagger(a: npt.ArrayLike) -> ComplexArray:
    """Conjugate transpose over the last two axes."""
    return np.conj(np.swapaxes(np.asarray(a), -1, -2))


def hermitize(a: npt.ArrayLike) -> ComplexArray:
    a = np.asarray(a, dtype=np.complex128)
    return 0.5 * (a + dagger(a))


@dataclass(frozen=True, eq=False)
class HermitianMatrix:
    """A validated, immutable d×d complex Hermitian matrix."""

    entries: ComplexArray

    def __post_init__(self):
        a = np.array(self.entries, dtype=np.complex128)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise DomainError(f"Hermitian matrix must be square with dim >= 1, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise DomainError("Hermitian matrix has non-finite entries")
        scale = float(np.max(np.abs(a)))
        asym = float(np.max(np.abs(a - dagger(a))))
        if asym > HERMITIAN_RTOL * scale:
            raise DomainError(f"Matrix is not Hermitian: max |A - A*| = {asym:.3e}")
        a = hermitize(a)
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.array(self.entries, dtype=dtype)

    def __add__(self, other: "HermitianMatrix") -> "HermitianMatrix":
        _require_same_dim(self, other)
        return HermitianMatrix(self.entries + other.entries)

    def __sub__(self, other: "HermitianMatrix") -> "HermitianMatrix":
        _require_same_dim(self, other)
        return HermitianMatrix(self.entries - other.entries)

    def __neg__(self) -> "HermitianMatrix":
        return HermitianMatrix(-self.entries)

    def __mul__(self, scalar: float) -> "HermitianMatrix":
        return HermitianMatrix(float(scalar) * self.entries)

    __rmul__ = __mul__

    @classmethod
    def identity(cls, d: int) -> "HermitianMatrix":
        return cls(np.eye(d))

    @classmethod
    def zeros(cls, d: int) -> "HermitianMatrix":
        return cls(np.zeros((d, d)))

    @classmethod
    def diag(cls, values: npt.ArrayLike) -> "HermitianMatrix":
        return cls(np.diag(np.asarray(values, dtype=float)))

    def to_literal(self) -> dict[str, Any]:
        """Matrix literal ``{"d", "re", "im"}``; ``im`` is omitted when zero.

        Floats are emitted with Python's shortest round-trip repr, which is
        lossless at double precision.
        """
        literal: dict[str, Any] = {"d": self.dim, "re": self.entries.real.tolist()}
        if np.any(self.entries.imag != 0.0):
            literal["im"] = self.entries.imag.tolist()
        return literal

    @classmethod
    def from_literal(cls, literal: dict[str, Any]) -> "HermitianMatrix":
        try:
            d = int(literal["d"])
            re = np.asarray(literal["re"], dtype=float)
            im_raw = literal.get("im")
            im = np.zeros((d, d)) if im_raw is None else np.asarray(im_raw, dtype=float)
        except (KeyError, TypeError, ValueError) as e:
            raise DomainError(f"Malformed matrix literal: {e}") from e
        if re.shape != (d, d) or im.shape != (d, d):
            raise DomainError(f"Matrix literal arrays must be {d}x{d}, got re {re.shape} and im {im.shape}")
        return cls(re + 1j * im)


MatrixLike = Union[HermitianMatrix, npt.ArrayLike]


def as_array(a: MatrixLike) -> ComplexArray:
    if isinstance(a, HermitianMatrix):
        return a.entries
    return np.asarray(a, dtype=np.complex128)


def _require_same_dim(a: HermitianMatrix, b: HermitianMatrix) -> None:
    if a.dim != b.dim:
        raise DimensionMismatch(f"Dimension mismatch: {a.dim} vs {b.dim}")


@dataclass(frozen=True)
class EigenDecomposition:
    eigenvalues: RealArray
    eigenvectors: ComplexArray

    def reconstruct(self) -> ComplexArray:
        u = self.eigenvectors
        return (u * self.eigenvalues[..., None, :]) @ dagger(u)


# ══════════════════════════════════════════════════════════════════════════════
# Jacobi eigensolver
# ══════════════════════════════════════════════════════════════════════════════

def _off_norm(a: ComplexArray, off_mask: npt.NDArray[np.bool_]) -> RealArray:
    return np.sqrt(np.sum(np.abs(np.where(off_mask, a, 0.0)) ** 2, axis=(-2, -1)))


def _rotate(a: ComplexArray, v: ComplexArray, p: int, q: int) -> None:
    """Annihilate entry (p, q) of every matrix in the stack, in place."""
    apq = a[:, p, q]
    mag = np.abs(apq)
    active = mag > 0.0
    if not np.any(active):
        return
    safe = np.where(active, mag, 1.0)
    phase = np.where(active, apq / safe, 1.0)
    theta = (a[:, q, q].real - a[:, p, p].real) / (2.0 * safe)
    sign = np.where(theta >= 0.0, 1.0, -1.0)
    t = np.where(active, sign / (np.abs(theta) + np.hypot(theta, 1.0)), 0.0)
    c = 1.0 / np.sqrt(t * t + 1.0)
    s = t * c

    # G = diag(1, conj(phase)) @ [[c, s], [-s, c]]; G* A G is zero at (p, q)
    g = np.empty((a.shape[0], 2, 2), dtype=np.complex128)
    g[:, 0, 0] = c
    g[:, 0, 1] = s
    g[:, 1, 0] = -s * np.conj(phase)
    g[:, 1, 1] = c * np.conj(phase)

    pair = [p, q]
    a[:, :, pair] = a[:, :, pair] @ g
    a[:, pair, :] = dagger(g) @ a[:, pair, :]
    v[:, :, pair] = v[:, :, pair] @ g
    a[:, p, q] = 0.0
    a[:, q, p] = 0.0
    a[:, p, p] = a[:, p, p].real
    a[:, q, q] = a[:, q, q].real


def _jacobi(stack: ComplexArray, max_sweeps: int, rtol: float) -> tuple[RealArray, ComplexArray]:
    a = hermitize(stack).copy()
    m, d, _ = a.shape
    v = np.tile(np.eye(d, dtype=np.complex128), (m, 1, 1))
    off_mask = ~np.eye(d, dtype=bool)
    hs = np.linalg.norm(a, axis=(-2, -1))
    threshold = rtol * hs

    off = _off_norm(a, off_mask)
    sweeps = 0
    while np.any(off > threshold):
        if sweeps == max_sweeps:
            worst = int(np.argmax(off - threshold))
            raise NumericError(
                "Jacobi eigensolver did not converge",
                sweeps=sweeps,
                off_norm=float(off[worst]),
                hs_norm=float(hs[worst]),
                threshold=float(threshold[worst]),
            )
        for p in range(d - 1):
            for q in range(p + 1, d):
                _rotate(a, v, p, q)
        sweeps += 1
        off = _off_norm(a, off_mask)
    logger.debug("Jacobi converged: batch=%d d=%d sweeps=%d", m, d, sweeps)

    w = np.real(np.einsum("...ii->...i", a)).copy()
    order = np.argsort(w, axis=-1, kind="stable")
    w = np.take_along_axis(w, order, axis=-1)
    v = np.take_along_axis(v, order[:, None, :], axis=-1)
    return w, v


def eigh_stack(a: npt.ArrayLike, method: Optional[str] = None) -> tuple[RealArray, ComplexArray]:
    """Eigenvalues (ascending) and eigenvectors of a stack of Hermitian matrices."""
    arr = np.asarray(a, dtype=np.complex128)
    if arr.ndim < 2 or arr.shape[-1] != arr.shape[-2] or arr.shape[-1] < 1:
        raise DomainError(f"Expected a stack of square matrices, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NumericError("Eigendecomposition input has non-finite entries")
    settings = get_settings()
    method = method or settings.eig_method
    batch, d = arr.shape[:-2], arr.shape[-1]
    flat = arr.reshape((-1, d, d))
    if flat.shape[0] == 0:
        return np.zeros(batch + (d,)), np.zeros(batch + (d, d), dtype=np.complex128)

    if method == "jacobi":
        w, v = _jacobi(flat, settings.jacobi_max_sweeps, settings.jacobi_rtol)
    elif method == "lapack":
        w, v = np.linalg.eigh(hermitize(flat))
    else:
        raise DomainError(f"Unknown eigensolver method {method!r}")
    return w.reshape(batch + (d,)), v.reshape(batch + (d, d))


def eigvalsh_stack(a: npt.ArrayLike) -> RealArray:
    return eigh_stack(a)[0]


def eig(a: MatrixLike) -> EigenDecomposition:
    w, v = eigh_stack(as_array(a))
    return EigenDecomposition(eigenvalues=w, eigenvectors=v)


# ══════════════════════════════════════════════════════════════════════════════
# Matrix functions and trace functionals
# ══════════════════════════════════════════════════════════════════════════════

def spectral_apply(a: MatrixLike, phi: Callable[[RealArray], npt.ArrayLike]) -> ComplexArray:
    """U·diag(φ(λ))·U* for a Hermitian matrix or stack; φ may be complex valued."""
    w, v = eigh_stack(as_array(a))
    with np.errstate(all="ignore"):
        fw = np.broadcast_to(np.asarray(phi(w)), w.shape)
    bad = ~np.isfinite(fw)
    if np.any(bad):
        raise DomainError(f"Function is undefined at eigenvalue {float(w[bad][0])!r}")
    return (v * fw[..., None, :]) @ dagger(v)


def matrix_function(a: MatrixLike, phi: ScalarFunction) -> Union[HermitianMatrix, ComplexArray]:
    """Standard matrix function Σ φ(λᵢ) uᵢuᵢ* for a real-valued φ.

    Returns a :class:`HermitianMatrix` when given one, otherwise a Hermitian
    array of the input's shape.
    """
    out = spectral_apply(a, _real_valued(phi))
    if isinstance(a, HermitianMatrix):
        return HermitianMatrix(out)
    return hermitize(out)


def _real_valued(phi: ScalarFunction) -> ScalarFunction:
    def wrapped(w: RealArray) -> RealArray:
        values = np.asarray(phi(w))
        if np.iscomplexobj(values):
            if np.any(np.abs(values.imag) > 0.0):
                raise DomainError("Matrix function must be real valued on the spectrum")
            values = values.real
        return values

    return wrapped


def trace_power_abs(a: MatrixLike, p: float) -> Union[float, RealArray]:
    """tr|A|^p = Σ |λᵢ|^p, computed spectrally for any real p >= 1."""
    if p < 1:
        raise DomainError(f"trace power requires p >= 1, got {p}")
    total = np.sum(np.abs(eigvalsh_stack(as_array(a))) ** p, axis=-1)
    return float(total) if np.ndim(total) == 0 else total


def trace(a: MatrixLike) -> Union[float, RealArray]:
    t = np.real(np.einsum("...ii->...", as_array(a)))
    return float(t) if np.ndim(t) == 0 else t


def normalized_trace(a: MatrixLike) -> Union[float, RealArray]:
    return trace(a) / as_array(a).shape[-1]


# ══════════════════════════════════════════════════════════════════════════════
# Semidefinite order and norms
# ══════════════════════════════════════════════════════════════════════════════

def psd_margin(a: MatrixLike) -> Union[float, RealArray]:
    """Signed margin λ_min(A); negative means A is not psd."""
    lam = eigvalsh_stack(as_array(a))[..., 0]
    return float(lam) if np.ndim(lam) == 0 else lam


def op_norm(a: MatrixLike) -> Union[float, RealArray]:
    w = eigvalsh_stack(as_array(a))
    n = np.maximum(np.abs(w[..., 0]), np.abs(w[..., -1]))
    return float(n) if np.ndim(n) == 0 else n


def is_psd(a: MatrixLike, tol: Optional[float] = None) -> bool:
    """True iff λ_min(A) >= -tol·(1 + ‖A‖)."""
    tol = get_settings().psd_tol if tol is None else tol
    if tol < 0:
        raise DomainError(f"tolerance must be nonnegative, got {tol}")
    w = eigvalsh_stack(as_array(a))
    norm = max(abs(w[0]), abs(w[-1]))
    return bool(w[0] >= -tol * (1.0 + norm))


def psd_order(a: MatrixLike, b: MatrixLike, tol: Optional[float] = None) -> bool:
    """True iff A ⪯ B within tolerance, i.e. B − A is psd."""
    a_arr, b_arr = as_array(a), as_array(b)
    if a_arr.shape != b_arr.shape:
        raise DimensionMismatch(f"Dimension mismatch: {a_arr.shape} vs {b_arr.shape}")
    return is_psd(b_arr - a_arr, tol)


class MatrixNorms(NamedTuple):
    op_norm: float
    hs_norm: float
    trace: float
    normalized_trace: float
    lambda_max: float
    lambda_min: float


def norms(a: MatrixLike) -> MatrixNorms:
    arr = as_array(a)
    w = eigvalsh_stack(arr)
    tr = float(np.sum(w))
    return MatrixNorms(
        op_norm=float(max(abs(w[0]), abs(w[-1]))),
        hs_norm=float(np.linalg.norm(arr)),
        trace=tr,
        normalized_trace=tr / arr.shape[-1],
        lambda_max=float(w[-1]),
        lambda_min=float(w[0]),
    )


def dilation(h: npt.ArrayLike) -> HermitianMatrix:
    """Self-adjoint dilation [[0, H], [H*, 0]] of a rectangular matrix."""
    h = np.atleast_2d(np.asarray(h, dtype=np.complex128))
    if h.ndim != 2:
        raise DomainError(f"dilation expects a matrix, got shape {h.shape}")
    d1, d2 = h.shape
    out = np.zeros((d1 + d2, d1 + d2), dtype=np.complex128)
    out[:d1, d1:] = h
    out[d1:, :d1] = dagger(h)
    return HermitianMatrix(out)


def random_hermitian(d: int, rng: np.random.Generator, size: tuple[int, ...] = ()) -> ComplexArray:
    """I.i.d. complex standard normal entries, Hermitized."""
    shape = tuple(size) + (d, d)
    g = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return hermitize(g)
