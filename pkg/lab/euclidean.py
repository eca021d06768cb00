"""Matrix-valued maps on Euclidean space and log-concave diffusions."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Sequence, Union

import numpy as np
import numpy.typing as npt

from errors import DimensionMismatch, DomainError
from lab.hermitian import ComplexArray, RealArray, hermitize

logger = logging.getLogger(__name__)

FD_STEP = 1e-5
FD_STEP_NESTED = 1e-4

SeedLike = Union[int, np.random.SeedSequence, np.random.Generator, None]


class Domain(str, Enum):
    EUCLIDEAN = "euclidean"
    SPHERE = "sphere"
    SO_PRODUCT = "so-product"


def _central_partials(fn: Callable[[RealArray], ComplexArray], z: RealArray, step: float) -> ComplexArray:
    """Central differences of ``fn`` in every coordinate, stacked on axis −3."""
    out = []
    for k in range(z.shape[-1]):
        h = step * (1.0 + np.abs(z[..., k]))
        e = np.zeros(z.shape)
        e[..., k] = h
        diff = fn(z + e) - fn(z - e)
        out.append(diff / (2.0 * h.reshape(h.shape + (1,) * (diff.ndim - h.ndim))))
    return np.stack(out, axis=-3)


@dataclass(frozen=True)
class MatrixValuedMap:
    """z ↦ f(z) ∈ H_d on a domain with ``n`` coordinates.

    Callables are batch aware: points of shape (..., n) map to (..., d, d),
    partials to (..., n, d, d) and second partials to (..., n, n, d, d).
    Missing derivatives fall back to central differences.
    """

    domain: Domain
    n: int
    d: int
    evaluator: Callable[[RealArray], ComplexArray]
    partials: Optional[Callable[[RealArray], ComplexArray]] = None
    second_partials: Optional[Callable[[RealArray], ComplexArray]] = None

    def _point(self, z: npt.ArrayLike) -> RealArray:
        z = np.asarray(z, dtype=float)
        if z.shape[-1:] != (self.n,):
            raise DimensionMismatch(f"Expected points with {self.n} coordinates, got shape {z.shape}")
        return z

    def __call__(self, z: npt.ArrayLike) -> ComplexArray:
        return np.asarray(self.evaluator(self._point(z)), dtype=np.complex128)

    def gradient(self, z: npt.ArrayLike) -> ComplexArray:
        z = self._point(z)
        if self.partials is not None:
            return np.asarray(self.partials(z), dtype=np.complex128)
        return _central_partials(self, z, FD_STEP)

    def hessian(self, z: npt.ArrayLike) -> ComplexArray:
        z = self._point(z)
        if self.second_partials is not None:
            return np.asarray(self.second_partials(z), dtype=np.complex128)
        step = FD_STEP if self.partials is not None else FD_STEP_NESTED
        return _central_partials(self.gradient, z, step)


def polynomial_map(
    constant: npt.ArrayLike,
    linear: Optional[npt.ArrayLike] = None,
    quadratic: Optional[npt.ArrayLike] = None,
) -> MatrixValuedMap:
    """f(z) = A₀ + Σᵢ zᵢ·Aᵢ + Σᵢⱼ zᵢzⱼ·Bᵢⱼ with analytic partials.

    ``quadratic`` has shape (n, n, d, d) and is symmetrized in (i, j).
    """
    a0 = np.asarray(constant, dtype=np.complex128)
    d = a0.shape[-1]
    if linear is None and quadratic is None:
        raise DomainError("A polynomial map needs linear or quadratic coefficients")
    n = np.shape(linear)[0] if linear is not None else np.shape(quadratic)[0]
    a = np.zeros((n, d, d), dtype=np.complex128) if linear is None else np.asarray(linear, dtype=np.complex128)
    b = (
        np.zeros((n, n, d, d), dtype=np.complex128)
        if quadratic is None
        else np.asarray(quadratic, dtype=np.complex128)
    )
    if a.shape != (n, d, d) or b.shape != (n, n, d, d):
        raise DimensionMismatch(f"Coefficient shapes {a.shape} and {b.shape} disagree with n={n}, d={d}")
    b = 0.5 * (b + np.swapaxes(b, 0, 1))
    a0, a, b = hermitize(a0), hermitize(a), hermitize(b)

    def evaluate(z: RealArray) -> ComplexArray:
        return a0 + np.einsum("...i,iab->...ab", z, a) + np.einsum("...i,...j,ijab->...ab", z, z, b)

    def partials(z: RealArray) -> ComplexArray:
        return a + 2.0 * np.einsum("...j,ijab->...iab", z, b)

    def second_partials(z: RealArray) -> ComplexArray:
        return np.broadcast_to(2.0 * b, z.shape[:-1] + b.shape)

    return MatrixValuedMap(Domain.EUCLIDEAN, n, d, evaluate, partials, second_partials)


@dataclass(frozen=True)
class GaussianSeries:
    """f(z) = Σᵢ zᵢ·Aᵢ with z standard normal."""

    coefficients: ComplexArray

    def __post_init__(self):
        a = hermitize(np.asarray(self.coefficients, dtype=np.complex128))
        if a.ndim != 3 or a.shape[0] < 1:
            raise DimensionMismatch(f"Gaussian series needs (n, d, d) coefficients, got {a.shape}")
        object.__setattr__(self, "coefficients", a)

    @property
    def n(self) -> int:
        return self.coefficients.shape[0]

    @property
    def d(self) -> int:
        return self.coefficients.shape[-1]

    def as_map(self) -> MatrixValuedMap:
        return polynomial_map(np.zeros((self.d, self.d)), self.coefficients)


def gaussian_series(coefficients: Sequence[npt.ArrayLike]) -> MatrixValuedMap:
    return GaussianSeries(np.asarray(coefficients)).as_map()


# ══════════════════════════════════════════════════════════════════════════════
# Log-concave models
# ══════════════════════════════════════════════════════════════════════════════

@dataclass(frozen=True)
class LogConcaveModel:
    """Stationary law ∝ e^{−W} on ℝⁿ with ∇²W ⪰ η·I."""

    n: int
    grad: Callable[[RealArray], RealArray]
    hess: Callable[[RealArray], RealArray]
    eta: float
    exact_gaussian: bool = False

    def __post_init__(self):
        if self.n < 1:
            raise DomainError(f"dimension must be >= 1, got {self.n}")
        if not self.eta > 0:
            raise DomainError(f"strong convexity must be positive, got eta={self.eta}")
        if self.exact_gaussian and self.eta != 1.0:
            raise DomainError("The exact Gaussian model has eta = 1")

    @classmethod
    def gaussian(cls, n: int) -> "LogConcaveModel":
        """W(z) = |z|²/2: the Ornstein–Uhlenbeck process."""
        return cls(
            n=n,
            grad=lambda z: np.asarray(z, dtype=float),
            hess=lambda z: np.broadcast_to(np.eye(n), np.shape(z)[:-1] + (n, n)),
            eta=1.0,
            exact_gaussian=True,
        )

    @classmethod
    def quartic(cls, n: int, eta: float, kappa: float) -> "LogConcaveModel":
        """W(z) = η|z|²/2 + κ·Σᵢ zᵢ⁴/4 with κ ≥ 0."""
        if kappa < 0:
            raise DomainError(f"quartic coefficient must be >= 0, got {kappa}")
        return cls(
            n=n,
            grad=lambda z: eta * z + kappa * z**3,
            hess=lambda z: (eta + 3.0 * kappa * z**2)[..., None] * np.eye(n),
            eta=eta,
        )


@dataclass(frozen=True)
class MatrixEstimate:
    """A Monte Carlo mean of matrices with its entrywise standard error."""

    value: ComplexArray
    stderr: RealArray
    samples: int


def _mean_with_stderr(draws: ComplexArray) -> MatrixEstimate:
    m = draws.shape[0]
    mean = draws.mean(axis=0)
    spread = np.std(draws.real, axis=0, ddof=1) + 1j * np.std(draws.imag, axis=0, ddof=1)
    return MatrixEstimate(value=hermitize(mean), stderr=np.abs(spread) / math.sqrt(m), samples=m)


def ou_semigroup_estimate(
    f: MatrixValuedMap, z: npt.ArrayLike, t: float, samples: int, seed: SeedLike = None
) -> MatrixEstimate:
    """P_t f(z) for the Ornstein–Uhlenbeck semigroup via the Mehler formula.

    P_t f(z) = E f(e^{−t}z + √(1 − e^{−2t})·ξ) with ξ standard normal.
    """
    if not (np.isfinite(t) and t >= 0):
        raise DomainError(f"semigroup time must be finite and >= 0, got {t}")
    z = np.asarray(z, dtype=float)
    if t == 0:
        value = f(z)
        return MatrixEstimate(value=value, stderr=np.zeros(value.shape), samples=samples)
    if samples < 2:
        raise DomainError(f"Monte Carlo needs at least 2 samples, got {samples}")
    rng = np.random.default_rng(seed)
    xi = rng.standard_normal((samples, f.n))
    points = math.exp(-t) * z + math.sqrt(-math.expm1(-2.0 * t)) * xi
    return _mean_with_stderr(f(points))


def langevin_step(model: LogConcaveModel, z: npt.ArrayLike, h: float, rng: np.random.Generator) -> RealArray:
    """One Euler–Maruyama step of dZ = −∇W(Z)dt + √2 dB."""
    if not h > 0:
        raise DomainError(f"step size must be positive, got {h}")
    z = np.asarray(z, dtype=float)
    return z - h * model.grad(z) + math.sqrt(2.0 * h) * rng.standard_normal(z.shape)


def langevin_sample(
    model: LogConcaveModel,
    count: int,
    rng: np.random.Generator,
    h: float = 0.01,
    burn_in: Optional[int] = None,
    thin: Optional[int] = None,
    chains: int = 256,
) -> RealArray:
    """Approximate draws from e^{−W} by parallel unadjusted Langevin chains.

    Burn-in defaults to ⌈10/(η·h)⌉ steps and thinning to one draw every
    ⌈1/h⌉ steps.
    """
    burn_in = math.ceil(10.0 / (model.eta * h)) if burn_in is None else burn_in
    thin = math.ceil(1.0 / h) if thin is None else thin
    chains = max(1, min(chains, count))
    z = np.zeros((chains, model.n))
    for _ in range(burn_in):
        z = langevin_step(model, z, h, rng)
    draws = []
    collected = 0
    while collected < count:
        for _ in range(thin):
            z = langevin_step(model, z, h, rng)
        draws.append(z.copy())
        collected += chains
    logger.debug("langevin_sample: chains=%d burn_in=%d thin=%d rounds=%d", chains, burn_in, thin, len(draws))
    return np.concatenate(draws, axis=0)[:count]


def gamma_euclidean(f: MatrixValuedMap, z: npt.ArrayLike) -> ComplexArray:
    """Γ(f)(z) = Σᵢ (∂ᵢf(z))²."""
    p = f.gradient(z)
    return hermitize(np.einsum("...iab,...ibc->...ac", p, p))


def gamma2_euclidean(f: MatrixValuedMap, model: LogConcaveModel, z: npt.ArrayLike) -> ComplexArray:
    """Γ₂(f)(z) = Σᵢⱼ ∂ᵢⱼW·∂ᵢf·∂ⱼf + Σᵢⱼ (∂ᵢⱼf)²."""
    z = np.asarray(z, dtype=float)
    if model.n != f.n:
        raise DimensionMismatch(f"Model has {model.n} coordinates but the map has {f.n}")
    p = f.gradient(z)
    hw = np.asarray(model.hess(z), dtype=float)
    q = f.hessian(z)
    curvature = np.einsum("...ij,...iab,...jbc->...ac", hw, p, p)
    second = np.einsum("...ijab,...ijbc->...ac", q, q)
    return hermitize(curvature + second)
