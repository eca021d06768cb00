"""The unit sphere Sⁿ ⊂ ℝⁿ⁺¹ with its uniform measure and Brownian motion."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from errors import DimensionMismatch, DomainError
from lab.euclidean import Domain, MatrixValuedMap
from lab.hermitian import ComplexArray, RealArray, eigh_stack, hermitize, op_norm

logger = logging.getLogger(__name__)

UNIT_NORM_TOL = 1e-9


def sphere_sample(n: int, rng: np.random.Generator, size: tuple[int, ...] = ()) -> RealArray:
    """Uniform points on Sⁿ, shape ``size + (n + 1,)``."""
    g = rng.standard_normal(tuple(size) + (n + 1,))
    return g / np.linalg.norm(g, axis=-1, keepdims=True)


def _require_unit(x: RealArray) -> None:
    if np.any(np.abs(np.linalg.norm(x, axis=-1) - 1.0) > UNIT_NORM_TOL):
        raise DomainError("Point is not on the unit sphere")


def sphere_brownian_step(x: npt.ArrayLike, h: float, rng: np.random.Generator) -> RealArray:
    """One geodesic random-walk step of Brownian motion on the sphere.

    A tangent Gaussian v ⟂ x with variance 2h per direction is followed along
    the great circle: x·cos‖v‖ + (v/‖v‖)·sin‖v‖.
    """
    x = np.asarray(x, dtype=float)
    _require_unit(x)
    if h < 0:
        raise DomainError(f"step size must be >= 0, got {h}")
    if h == 0:
        return x.copy()
    xi = rng.standard_normal(x.shape)
    v = math.sqrt(2.0 * h) * (xi - np.sum(xi * x, axis=-1, keepdims=True) * x)
    r = np.linalg.norm(v, axis=-1, keepdims=True)
    direction = np.divide(v, r, out=np.zeros_like(v), where=r > 0)
    out = x * np.cos(r) + direction * np.sin(r)
    return out / np.linalg.norm(out, axis=-1, keepdims=True)


def sphere_brownian_path(x0: npt.ArrayLike, h: float, steps: int, rng: np.random.Generator) -> RealArray:
    """Positions after each of ``steps`` Brownian steps, shape (steps,) + x0.shape."""
    x = np.asarray(x0, dtype=float)
    path = np.empty((steps,) + x.shape)
    for k in range(steps):
        x = sphere_brownian_step(x, h, rng)
        path[k] = x
    return path


def sphere_tangential_gradient(f: MatrixValuedMap, x: npt.ArrayLike) -> ComplexArray:
    """Ambient components of the tangential gradient, (I − xxᵀ)·∇f, shape (..., n+1, d, d)."""
    x = np.asarray(x, dtype=float)
    grad = f.gradient(x)
    radial = np.einsum("...l,...lab->...ab", x, grad)
    return grad - x[..., :, None, None] * radial[..., None, :, :]


def gamma_from_tangential(f: MatrixValuedMap, x: npt.ArrayLike) -> ComplexArray:
    """Σₖ Gₖ² over the tangential gradient components."""
    g = sphere_tangential_gradient(f, x)
    return hermitize(np.einsum("...kab,...kbc->...ac", g, g))


def _coefficient_stack(coefficients: npt.ArrayLike) -> ComplexArray:
    a = hermitize(np.asarray(coefficients, dtype=np.complex128))
    if a.ndim != 3 or a.shape[-1] != a.shape[-2]:
        raise DimensionMismatch(f"Coefficients must have shape (n+1, d, d), got {a.shape}")
    if a.shape[0] < 3:
        raise DomainError(f"Sphere models need n >= 2, got n={a.shape[0] - 1}")
    return a


@dataclass(frozen=True)
class SphereLinearModel:
    """f(x) = Σᵢ xᵢ·Aᵢ on Sⁿ."""

    coefficients: ComplexArray

    def __post_init__(self):
        object.__setattr__(self, "coefficients", _coefficient_stack(self.coefficients))

    @property
    def n(self) -> int:
        return self.coefficients.shape[0] - 1

    @property
    def d(self) -> int:
        return self.coefficients.shape[-1]

    def as_map(self) -> MatrixValuedMap:
        a = self.coefficients
        return MatrixValuedMap(
            domain=Domain.SPHERE,
            n=self.n + 1,
            d=self.d,
            evaluator=lambda x: np.einsum("...i,iab->...ab", x, a),
            partials=lambda x: np.broadcast_to(a, np.shape(x)[:-1] + a.shape),
        )


@dataclass(frozen=True)
class SphereQuadraticModel:
    """f(x) = Σᵢ xᵢ²·Aᵢ on Sⁿ."""

    coefficients: ComplexArray

    def __post_init__(self):
        object.__setattr__(self, "coefficients", _coefficient_stack(self.coefficients))

    @property
    def n(self) -> int:
        return self.coefficients.shape[0] - 1

    @property
    def d(self) -> int:
        return self.coefficients.shape[-1]

    def as_map(self) -> MatrixValuedMap:
        a = self.coefficients
        return MatrixValuedMap(
            domain=Domain.SPHERE,
            n=self.n + 1,
            d=self.d,
            evaluator=lambda x: np.einsum("...i,iab->...ab", x**2, a),
            partials=lambda x: 2.0 * x[..., :, None, None] * a,
        )


def gamma_sphere_linear(m: SphereLinearModel, x: npt.ArrayLike) -> ComplexArray:
    """Γ(f)(x) = Σᵢ Aᵢ² − (Σᵢ xᵢAᵢ)²."""
    x = np.asarray(x, dtype=float)
    _require_unit(x)
    a = m.coefficients
    fx = np.einsum("...i,iab->...ab", x, a)
    return hermitize(np.einsum("iab,ibc->ac", a, a) - fx @ fx)


def gamma_sphere_quadratic(m: SphereQuadraticModel, x: npt.ArrayLike) -> ComplexArray:
    """Γ(f)(x) = 2·Σᵢⱼ xᵢ²xⱼ²(Aᵢ − Aⱼ)², evaluated as 4·(Σᵢ xᵢ²Aᵢ² − F²) with F = f(x)."""
    x = np.asarray(x, dtype=float)
    _require_unit(x)
    a = m.coefficients
    x2 = x**2
    fx = np.einsum("...i,iab->...ab", x2, a)
    sq = np.einsum("...i,iab,ibc->...ac", x2, a, a)
    return hermitize(4.0 * (sq - fx @ fx))


def sphere_quadratic_constant_a(m: SphereQuadraticModel) -> float:
    """a = maxᵢⱼ ‖Aᵢ − Aⱼ‖."""
    a = m.coefficients
    diffs = a[:, None] - a[None, :]
    return float(np.max(op_norm(diffs)))


def sphere_quadratic_constant_b(m: SphereQuadraticModel, iterations: int = 200) -> float:
    """An upper estimate of b = min_B maxᵢ ‖Aᵢ − B‖.

    Starts from the midpoint of the pair attaining a and refines B by
    subgradient descent with diminishing steps, keeping the best value seen.
    """
    a = m.coefficients
    diffs = op_norm(a[:, None] - a[None, :])
    p, q = np.unravel_index(int(np.argmax(diffs)), diffs.shape)
    b = 0.5 * (a[p] + a[q])
    radii = op_norm(a - b)
    best = float(np.max(radii))
    scale = max(best, 1e-300)
    for k in range(1, iterations + 1):
        i = int(np.argmax(radii))
        w, v = eigh_stack(a[i] - b)
        top = 0 if abs(w[0]) > abs(w[-1]) else -1
        u = v[:, top]
        b = b + (scale / (2.0 * math.sqrt(k))) * np.sign(w[top]) * np.outer(u, np.conj(u))
        b = hermitize(b)
        radii = op_norm(a - b)
        best = min(best, float(np.max(radii)))
    logger.debug("sphere_quadratic_constant_b: a=%g b=%g", float(np.max(diffs)), best)
    return best
