"""Bound calculators and trace-inequality right-hand sides.

All functions are pure. Tail bounds are clipped to [0, d]; callers wanting a
probability bound clip further with :func:`two_sided` or ``min(1, ·)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, NamedTuple, Optional, Sequence, Union

import numpy as np
import numpy.typing as npt
from scipy.special import logsumexp, xlogy

from errors import DimensionMismatch, DomainError
from lab.hermitian import (
    MatrixLike,
    RealArray,
    as_array,
    eigh_stack,
    eigvalsh_stack,
    hermitize,
)
from settings import get_settings

RCurve = Union[float, Callable[[float], float]]

BETA_GRID_POINTS = 64
DEFAULT_CHEBYSHEV_ORDERS = (1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0)


def check_moment_order(q: float) -> float:
    """q must be 1 or at least 1.5; the range (1, 1.5) is missing from the moment theorem."""
    if q == 1.0 or q >= 1.5:
        return float(q)
    raise DomainError(f"moment order q={q} is not admissible: the polynomial moment bound covers q = 1 and q >= 1.5 only (missing powers)")


@dataclass(frozen=True)
class BoundInput:
    c: float
    d: int
    q: float = 1.0
    v: float = 0.0
    gamma_moment: Optional[float] = None
    r_curve: Optional[RCurve] = None

    def __post_init__(self):
        if not self.c > 0:
            raise DomainError(f"Bakry–Émery constant must be positive, got c={self.c}")
        if self.d < 1:
            raise DomainError(f"dimension must be >= 1, got d={self.d}")
        if self.v < 0:
            raise DomainError(f"variance proxy must be >= 0, got v={self.v}")
        if self.gamma_moment is not None and self.gamma_moment < 0:
            raise DomainError(f"gamma moment must be >= 0, got {self.gamma_moment}")
        check_moment_order(self.q)

    @property
    def curve(self) -> RCurve:
        return self.v if self.r_curve is None else self.r_curve


# ══════════════════════════════════════════════════════════════════════════════
# Polynomial moments
# ══════════════════════════════════════════════════════════════════════════════

def poly_moment_bound(c: float, q: float, gamma_moment: float) -> float:
    """√(c(2q−1))·(E tr Γ(f)^q)^{1/(2q)}."""
    BoundInput(c=c, d=1, q=q, gamma_moment=gamma_moment)
    return math.sqrt(c * (2.0 * q - 1.0)) * gamma_moment ** (1.0 / (2.0 * q))


def poly_moment_bound_uniform(c: float, q: float, d: int, v: float) -> float:
    """d^{1/(2q)}·√(c(2q−1)v)."""
    BoundInput(c=c, d=d, q=q, v=v)
    return d ** (1.0 / (2.0 * q)) * math.sqrt(c * (2.0 * q - 1.0) * v)


def product_poly_coefficient(q: float) -> float:
    """√(2(2q−1)), the moment coefficient for product measures (c = 2)."""
    check_moment_order(q)
    return math.sqrt(2.0 * (2.0 * q - 1.0))


# ══════════════════════════════════════════════════════════════════════════════
# Exponential moments and tails
# ══════════════════════════════════════════════════════════════════════════════

def beta_grid(c: float, points: int = BETA_GRID_POINTS) -> RealArray:
    """Log-spaced β values over [10⁻³, 10⁶]/c."""
    if not c > 0:
        raise DomainError(f"c must be positive, got {c}")
    return np.geomspace(1e-3 / c, 1e6 / c, points)


def laplace_tail(d: float, c1: float, c2: float, t: float) -> float:
    """d·exp(−t²/(2c₁ + 2c₂t)), clipped to [0, d]."""
    if c1 < 0 or c2 < 0 or t < 0:
        raise DomainError(f"laplace_tail needs c1, c2, t >= 0, got c1={c1}, c2={c2}, t={t}")
    if t == 0:
        return float(d)
    denom = 2.0 * c1 + 2.0 * c2 * t
    if denom == 0:
        return 0.0
    return float(min(d, d * math.exp(-(t * t) / denom)))


def laplace_expectation(d: float, c1: float, c2: float) -> float:
    """√(2c₁·log d) + c₂·log d."""
    if c1 < 0 or c2 < 0:
        raise DomainError(f"laplace_expectation needs c1, c2 >= 0, got c1={c1}, c2={c2}")
    log_d = math.log(d)
    return math.sqrt(2.0 * c1 * log_d) + c2 * log_d


def _curve_terms(c: float, r_curve: RCurve, betas: Optional[Sequence[float]]) -> list[tuple[float, float]]:
    """(c₁, c₂) = (c·r(β), √(c/β)) over the grid, plus the β → ∞ term for a constant r.

    An explicit grid must be non-empty, even when r is constant.
    """
    grid = beta_grid(c) if betas is None else np.asarray(betas, dtype=float)
    constant = not callable(r_curve)
    if grid.size == 0:
        raise DomainError("The beta grid is empty")
    terms = []
    for beta in grid:
        if not beta > 0:
            raise DomainError(f"beta values must be positive, got {beta}")
        r = float(r_curve) if constant else float(r_curve(float(beta)))
        terms.append((c * r, math.sqrt(c / beta)))
    if constant:
        terms.append((c * float(r_curve), 0.0))
    return terms


def exp_tail_bound(d: int, c: float, r_curve: RCurve, t: float, betas: Optional[Sequence[float]] = None) -> float:
    """d·inf_β exp(−t²/(2c·r(β) + 2t√(c/β))) over a β-grid."""
    if t < 0:
        raise DomainError(f"t must be >= 0, got {t}")
    return min(laplace_tail(d, c1, c2, t) for c1, c2 in _curve_terms(c, r_curve, betas))


def exp_expectation_bound(d: int, c: float, r_curve: RCurve, betas: Optional[Sequence[float]] = None) -> float:
    """inf_β [√(2c·r(β)·log d) + √(c/β)·log d]."""
    return min(laplace_expectation(d, c1, c2) for c1, c2 in _curve_terms(c, r_curve, betas))


def subgaussian_tail(d: int, c: float, v: float, t: float) -> float:
    """d·exp(−t²/(2cv))."""
    if t < 0:
        raise DomainError(f"t must be >= 0, got {t}")
    return laplace_tail(d, c * v, 0.0, t)


def submanifold_tail(d: int, rho: float, v: float, t: float) -> float:
    """2d·exp(−ρt²/(2v)), the two-sided form for submanifolds with Ricci curvature ≥ ρ."""
    if not rho > 0:
        raise DomainError(f"curvature must be positive, got rho={rho}")
    return 2.0 * subgaussian_tail(d, 1.0 / rho, v, t)


def two_sided(tail: float) -> float:
    """min(1, 2·one-sided): a bound on P{‖f − Ef‖ ≥ t}."""
    return min(1.0, 2.0 * tail)


def expectation_bound(d: int, c: float, v: float) -> float:
    """√(2cv·log d)."""
    BoundInput(c=c, d=d, v=v)
    return math.sqrt(2.0 * c * v * math.log(d))


def mgf_bound(c: float, theta: float, beta: float, r: float) -> float:
    """cθ²r(β) / (2(1 − cθ²/β)), a bound on log E tr̄ e^{θ(f − Ef)}.

    β = ∞ gives cθ²r/2.
    """
    if not c > 0:
        raise DomainError(f"c must be positive, got {c}")
    if not beta > 0:
        raise DomainError(f"beta must be positive, got {beta}")
    if math.isinf(beta):
        return c * theta * theta * r / 2.0
    if abs(theta) >= math.sqrt(beta / c):
        raise DomainError(f"theta={theta} lies outside (-sqrt(beta/c), sqrt(beta/c)) = ±{math.sqrt(beta / c):.6g}")
    return c * theta * theta * r / (2.0 * (1.0 - c * theta * theta / beta))


def matrix_chebyshev(t: float, p: float, pth_moment: float) -> float:
    """t^{−p}·E tr|X|^p."""
    if not t > 0:
        raise DomainError(f"t must be positive, got {t}")
    if p < 1:
        raise DomainError(f"Chebyshev order must be >= 1, got {p}")
    return pth_moment / t**p


def chebyshev_bound(t: float, moments: Mapping[float, float]) -> float:
    """inf over the tabulated p of t^{−p}·E tr|X|^p."""
    if not moments:
        raise DomainError("The moment table is empty")
    return min(matrix_chebyshev(t, p, m) for p, m in moments.items())


# ══════════════════════════════════════════════════════════════════════════════
# Trace inequalities
# ══════════════════════════════════════════════════════════════════════════════

class TraceFunction(NamedTuple):
    """φ together with ψ = |φ′|."""

    name: str
    phi: Callable[[RealArray], RealArray]
    psi: Callable[[RealArray], RealArray]
    convex_psi: bool = True


def power_function(q: float) -> TraceFunction:
    """φ(x) = sgn(x)|x|^{2q−1}."""
    p = 2.0 * q - 1.0
    return TraceFunction(
        name=f"signed-power-{q:g}",
        phi=lambda x: np.sign(x) * np.abs(x) ** p,
        psi=lambda x: p * np.abs(x) ** (p - 1.0),
    )


def exponential_function(theta: float) -> TraceFunction:
    return TraceFunction(
        name=f"exp-{theta:g}",
        phi=lambda x: np.exp(theta * x),
        psi=lambda x: abs(theta) * np.exp(theta * x),
    )


CUBE = TraceFunction(name="cube", phi=lambda x: x**3, psi=lambda x: 3.0 * x**2)
CONCAVE_ROOT = TraceFunction(
    name="signed-root-1.5",
    phi=lambda x: x * np.abs(x) ** 0.5,
    psi=lambda x: 1.5 * np.abs(x) ** 0.5,
    convex_psi=False,
)


def standard_trace_functions() -> list[TraceFunction]:
    return (
        [CUBE]
        + [power_function(q) for q in (1.5, 2.0, 3.0)]
        + [exponential_function(theta) for theta in (0.5, -0.5, 1.0, -1.0)]
    )


def _spectral(a, fn: Callable[[RealArray], RealArray]):
    w, v = eigh_stack(a)
    fw = np.asarray(fn(w), dtype=float)
    if np.any(~np.isfinite(fw)):
        raise DomainError("function is undefined on the spectrum")
    return fw, (v * fw[..., None, :]) @ np.conj(np.swapaxes(v, -1, -2))


def _mean_value_factors(a, b, c, psi) -> tuple[float, float]:
    a, b, c = (hermitize(as_array(x)) for x in (a, b, c))
    if not (a.shape == b.shape == c.shape):
        raise DimensionMismatch(f"shapes differ: {a.shape}, {b.shape}, {c.shape}")
    psi_a, ma = _spectral(a, psi)
    psi_b, mb = _spectral(b, psi)
    if np.any(psi_a < 0) or np.any(psi_b < 0):
        raise DomainError("psi is negative on the spectrum; it must equal |phi'|")
    weight = ma + mb
    diff = a - b
    first = float(np.real(np.trace(diff @ diff @ weight, axis1=-2, axis2=-1)).sum())
    second = float(np.real(np.trace(c @ c @ weight, axis1=-2, axis2=-1)).sum())
    return max(first, 0.0), max(second, 0.0)


def mean_value_rhs(a: MatrixLike, b: MatrixLike, c: MatrixLike, psi: Callable[[RealArray], RealArray]) -> float:
    """inf_{s>0} ¼·tr[(s(A−B)² + s⁻¹C²)(ψ(A) + ψ(B))], by its closed-form minimizer."""
    first, second = _mean_value_factors(a, b, c, psi)
    if first == 0.0 or second == 0.0:
        return 0.0
    return 0.5 * math.sqrt(first * second)


def mean_value_rhs_grid(
    a: MatrixLike,
    b: MatrixLike,
    c: MatrixLike,
    psi: Callable[[RealArray], RealArray],
    s_grid: Optional[npt.ArrayLike] = None,
) -> RealArray:
    """The objective ¼·tr[(s(A−B)² + s⁻¹C²)(ψ(A) + ψ(B))] at each s of a grid."""
    s = np.geomspace(1e-6, 1e6, 1000) if s_grid is None else np.asarray(s_grid, dtype=float)
    first, second = _mean_value_factors(a, b, c, psi)
    return 0.25 * (s * first + second / s)


def mean_value_lhs(a: MatrixLike, b: MatrixLike, c: MatrixLike, phi: Callable[[RealArray], RealArray]) -> float:
    """tr[C(φ(A) − φ(B))]."""
    a, b, c = (hermitize(as_array(x)) for x in (a, b, c))
    _, pa = _spectral(a, phi)
    _, pb = _spectral(b, phi)
    return float(np.real(np.trace(c @ (pa - pb), axis1=-2, axis2=-1)).sum())


def young_entropy_check(x: MatrixLike, y: MatrixLike, tol: Optional[float] = None) -> tuple[float, float]:
    """Both sides of E tr̄[XY] ≤ log E tr̄ e^X + E tr̄[Y log Y].

    Stacks of shape (m, d, d) are averaged over the leading axis.
    """
    x, y = hermitize(as_array(x)), hermitize(as_array(y))
    if x.shape != y.shape:
        raise DimensionMismatch(f"shapes differ: {x.shape} vs {y.shape}")
    tol = get_settings().psd_tol if tol is None else tol
    d = x.shape[-1]
    x3, y3 = x.reshape((-1, d, d)), y.reshape((-1, d, d))
    m = x3.shape[0]
    mu = eigvalsh_stack(y3)
    if np.any(mu[:, 0] < -tol * (1.0 + np.abs(mu).max(axis=-1))):
        raise DomainError("Y must be positive semidefinite")
    if np.any(np.abs(mu.sum(axis=-1) / d - 1.0) > 1e-10):
        raise DomainError("Y must have normalized trace 1")
    mu = np.clip(mu, 0.0, None)
    lam = eigvalsh_stack(x3)
    lhs = float(np.real(np.einsum("kab,kba->", x3, y3)) / (d * m))
    log_mgf = float(logsumexp(lam, b=1.0 / (d * m)))
    entropy = float(np.sum(xlogy(mu, mu)) / (d * m))
    return lhs, log_mgf + entropy


def gibbs_state(x: MatrixLike) -> np.ndarray:
    """e^X / tr̄ e^X, the equality case of the entropy inequality."""
    x = hermitize(as_array(x))
    lam = eigvalsh_stack(x)
    shift = lam[..., -1:]
    _, ex = _spectral(x, lambda w: np.exp(w - shift))
    norm = np.real(np.trace(ex, axis1=-2, axis2=-1)) / x.shape[-1]
    return hermitize(ex / np.asarray(norm)[..., None, None])


def tail_curve(bound: Callable[[float], float], t_grid: Iterable[float]) -> RealArray:
    return np.array([bound(float(t)) for t in t_grid])
