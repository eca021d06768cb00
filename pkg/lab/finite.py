"""Exact product-measure Markov semigroup on enumerated finite spaces.

A state space Ω = Ω₁ × ... × Ωₙ carries the product measure μ. Coordinate i is
resampled from μᵢ at the jumps of an independent unit-rate Poisson clock. Every
operator here (P_t, L, Γ, Γ₂, the Dirichlet form, variances, trace moments) is
computed by exact summation over μ, so results carry no sampling error. Every
function on a finite space is suitable, so this engine serves as the exactness
oracle for the inequalities checked elsewhere.

Field values are stored as arrays of shape ``(m₁, ..., mₙ, d, d)`` in
mixed-radix order (first factor most significant). Conditional expectations
E_S f over a set S of coordinates keep the averaged axes with length one, so
they broadcast against full fields.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Callable, Iterable, Iterator, Optional, Sequence

import numpy as np
import numpy.typing as npt
from scipy.special import logsumexp

from errors import DimensionMismatch, DomainError, ResourceError
from lab.hermitian import (
    ComplexArray,
    HermitianMatrix,
    RealArray,
    dagger,
    eigvalsh_stack,
    hermitize,
    matrix_function,
    random_hermitian,
)
from settings import get_settings

logger = logging.getLogger(__name__)

WEIGHT_SUM_TOL = 1e-12
FACTORIZED_ABOVE = 12


# ══════════════════════════════════════════════════════════════════════════════
# State spaces
# ══════════════════════════════════════════════════════════════════════════════

@dataclass(frozen=True, eq=False)
class FiniteProductSpace:
    """Product of finite factors, each a list of labelled, weighted states."""

    weights: tuple[RealArray, ...]
    labels: tuple[RealArray, ...] = ()

    def __post_init__(self):
        if len(self.weights) < 1:
            raise DomainError("A product space needs at least one factor")
        weights = []
        for i, w in enumerate(self.weights):
            w = np.array(w, dtype=float).ravel()
            if w.size < 1 or np.any(~np.isfinite(w)) or np.any(w <= 0.0):
                raise DomainError(f"Factor {i} weights must be positive, got {w.tolist()}")
            if abs(w.sum() - 1.0) > WEIGHT_SUM_TOL:
                raise DomainError(f"Factor {i} weights sum to {w.sum()!r}, not 1")
            w = w / w.sum()
            w.setflags(write=False)
            weights.append(w)

        labels = list(self.labels) or [np.arange(w.size, dtype=float) for w in weights]
        if len(labels) != len(weights):
            raise DomainError("Labels and weights disagree on the number of factors")
        frozen_labels = []
        for i, (lab, w) in enumerate(zip(labels, weights)):
            lab = np.array(lab, dtype=float).ravel()
            if lab.size != w.size:
                raise DomainError(f"Factor {i} has {lab.size} labels but {w.size} weights")
            lab.setflags(write=False)
            frozen_labels.append(lab)

        size = int(np.prod([w.size for w in weights]))
        cap = get_settings().enumeration_cap
        if size > cap:
            raise ResourceError(f"Product space has {size} states, above the enumeration cap {cap}")
        object.__setattr__(self, "weights", tuple(weights))
        object.__setattr__(self, "labels", tuple(frozen_labels))

    @classmethod
    def from_factors(cls, factors: Sequence[Sequence[tuple[float, float]]]) -> "FiniteProductSpace":
        """Build from per-factor lists of (label, weight) pairs."""
        labels = [[lab for lab, _ in factor] for factor in factors]
        weights = [[w for _, w in factor] for factor in factors]
        return cls(weights=tuple(weights), labels=tuple(labels))

    @classmethod
    def uniform(cls, sizes: Sequence[int]) -> "FiniteProductSpace":
        return cls(weights=tuple(np.full(m, 1.0 / m) for m in sizes))

    @classmethod
    def rademacher(cls, n: int) -> "FiniteProductSpace":
        return cls(weights=tuple([0.5, 0.5] for _ in range(n)), labels=tuple([-1.0, 1.0] for _ in range(n)))

    @classmethod
    def random(cls, sizes: Sequence[int], rng: np.random.Generator) -> "FiniteProductSpace":
        """Factors with Dirichlet(1, ..., 1) weights."""
        return cls(weights=tuple(_renormalized(rng.dirichlet(np.ones(m))) for m in sizes))

    @property
    def n(self) -> int:
        return len(self.weights)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(w.size for w in self.weights)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @cached_property
    def joint_weights(self) -> RealArray:
        joint = self.weights[0]
        for w in self.weights[1:]:
            joint = np.multiply.outer(joint, w)
        return np.asarray(joint).reshape(self.shape)

    def states(self) -> Iterator[tuple[int, ...]]:
        return np.ndindex(*self.shape)

    def state_labels(self, state: Sequence[int]) -> RealArray:
        return np.array([self.labels[i][k] for i, k in enumerate(state)])

    def same_as(self, other: "FiniteProductSpace") -> bool:
        return self is other or (
            self.shape == other.shape
            and all(np.array_equal(a, b) for a, b in zip(self.weights, other.weights))
        )

    def tilted(self, strength: float, rng: np.random.Generator) -> "FiniteProductSpace":
        """A different product measure on the same states (weights exponentially tilted)."""
        weights = []
        for w in self.weights:
            tilt = np.exp(strength * rng.standard_normal(w.size))
            weights.append(_renormalized(w * tilt))
        return FiniteProductSpace(weights=tuple(weights), labels=self.labels)

    def to_literal(self) -> dict[str, Any]:
        return {"factors": [w.tolist() for w in self.weights]}


def _renormalized(w: npt.ArrayLike) -> RealArray:
    w = np.asarray(w, dtype=float)
    return w / w.sum()


def sample_states(space: FiniteProductSpace, count: int, rng: np.random.Generator) -> npt.NDArray[np.int64]:
    """Draw ``count`` states from μ as an integer array of shape (count, n)."""
    columns = [rng.choice(w.size, size=count, p=w) for w in space.weights]
    return np.stack(columns, axis=-1)


@dataclass(frozen=True, order=True)
class InterlacingIndex:
    """A subset I ⊆ {0, ..., n−1} stored as a bitmask.

    ``interlace(z, w)`` takes coordinates in I from w and the rest from z.
    """

    mask: int
    n: int

    def __post_init__(self):
        if self.n < 1 or self.mask < 0 or self.mask >> self.n:
            raise DomainError(f"Bitmask {self.mask:#b} has bits beyond n={self.n}")

    @classmethod
    def of(cls, members: Iterable[int], n: int) -> "InterlacingIndex":
        mask = 0
        for i in members:
            mask |= 1 << i
        return cls(mask, n)

    @classmethod
    def all(cls, n: int) -> Iterator["InterlacingIndex"]:
        return (cls(mask, n) for mask in range(1 << n))

    def members(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.n) if self.mask >> i & 1)

    @property
    def size(self) -> int:
        return bin(self.mask).count("1")

    def interlace(self, z: Sequence[Any], w: Sequence[Any]) -> tuple[Any, ...]:
        return tuple(w[i] if self.mask >> i & 1 else z[i] for i in range(self.n))


# ══════════════════════════════════════════════════════════════════════════════
# Conditional means and fields
# ══════════════════════════════════════════════════════════════════════════════

def _average(values: ComplexArray, weights: RealArray, axis: int) -> ComplexArray:
    if values.shape[axis] == 1:
        return values
    shape = [1] * values.ndim
    shape[axis] = -1
    return np.sum(values * weights.reshape(shape), axis=axis, keepdims=True)


class _ConditionalMeans:
    """E_S of one array for subsets S of coordinates; sets of size ≤ 2 are cached."""

    def __init__(self, values: ComplexArray, space: FiniteProductSpace):
        self.values = values
        self.space = space
        self._cache: dict[frozenset[int], ComplexArray] = {frozenset(): values}

    def __call__(self, coords: Iterable[int]) -> ComplexArray:
        key = frozenset(coords)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        last = max(key)
        out = _average(self(key - {last}), self.space.weights[last], last)
        if len(key) <= 2:
            self._cache[key] = out
        return out


@dataclass(frozen=True, eq=False)
class MatrixField:
    """A matrix-valued function on an enumerated product space.

    Values need not be Hermitian: Γ(f, g) for f ≠ g is a general complex
    matrix field. Constructors that take user data check Hermitian symmetry.
    """

    space: FiniteProductSpace
    values: ComplexArray

    def __post_init__(self):
        arr = np.array(self.values, dtype=np.complex128)
        shape = self.space.shape
        if arr.ndim == 3 and arr.shape[0] == self.space.size and self.space.n > 1:
            arr = arr.reshape(shape + arr.shape[1:])
        if arr.ndim != len(shape) + 2 or arr.shape[: len(shape)] != shape:
            raise DimensionMismatch(f"Field values of shape {arr.shape} do not match space shape {shape}")
        if arr.shape[-1] != arr.shape[-2] or arr.shape[-1] < 1:
            raise DimensionMismatch(f"Field values must be square matrices, got {arr.shape[-2:]}")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def dim(self) -> int:
        return self.values.shape[-1]

    @cached_property
    def means(self) -> _ConditionalMeans:
        return _ConditionalMeans(self.values, self.space)

    @classmethod
    def hermitian(cls, space: FiniteProductSpace, values: npt.ArrayLike) -> "MatrixField":
        f = cls(space, values)
        scale = float(np.max(np.abs(f.values))) if f.values.size else 0.0
        if float(np.max(np.abs(f.values - dagger(f.values)))) > 1e-12 * scale:
            raise DomainError("Field values are not Hermitian")
        return cls(space, hermitize(f.values))

    @classmethod
    def from_function(
        cls, space: FiniteProductSpace, fn: Callable[[RealArray], npt.ArrayLike]
    ) -> "MatrixField":
        """Evaluate ``fn`` on the label vector of every state."""
        values = [np.asarray(fn(space.state_labels(s)), dtype=np.complex128) for s in space.states()]
        return cls.hermitian(space, np.stack(values).reshape(space.shape + values[0].shape))

    @classmethod
    def constant(cls, space: FiniteProductSpace, a: npt.ArrayLike) -> "MatrixField":
        a = np.asarray(a, dtype=np.complex128)
        return cls.hermitian(space, np.broadcast_to(a, space.shape + a.shape))

    @classmethod
    def random(cls, space: FiniteProductSpace, d: int, rng: np.random.Generator) -> "MatrixField":
        """Per-state i.i.d. complex normal entries, Hermitized."""
        return cls(space, random_hermitian(d, rng, space.shape))

    @classmethod
    def from_literal(cls, literal: dict[str, Any]) -> "MatrixField":
        try:
            space = FiniteProductSpace(weights=tuple(literal["space"]["factors"]))
            d = int(literal["d"])
            mats = [HermitianMatrix.from_literal(v).entries for v in literal["values"]]
        except (KeyError, TypeError) as e:
            raise DomainError(f"Malformed field literal: {e}") from e
        if len(mats) != space.size or any(m.shape != (d, d) for m in mats):
            raise DimensionMismatch(f"Field literal needs {space.size} values of dim {d}")
        return cls.hermitian(space, np.stack(mats).reshape(space.shape + (d, d)))

    def to_literal(self) -> dict[str, Any]:
        flat = hermitize(self.values).reshape((-1, self.dim, self.dim))
        return {
            "space": self.space.to_literal(),
            "d": self.dim,
            "values": [HermitianMatrix(v).to_literal() for v in flat],
        }

    def _wrap(self, values: ComplexArray) -> "MatrixField":
        return MatrixField(self.space, np.broadcast_to(values, self.values.shape))

    def __add__(self, other: "MatrixField") -> "MatrixField":
        _require_compatible(self, other)
        return self._wrap(self.values + other.values)

    def __sub__(self, other: "MatrixField") -> "MatrixField":
        _require_compatible(self, other)
        return self._wrap(self.values - other.values)

    def __mul__(self, scalar: complex) -> "MatrixField":
        return self._wrap(scalar * self.values)

    __rmul__ = __mul__

    def __matmul__(self, other: "MatrixField") -> "MatrixField":
        """Pointwise matrix product."""
        _require_compatible(self, other)
        return self._wrap(self.values @ other.values)

    def apply(self, phi: Callable[[RealArray], npt.ArrayLike]) -> "MatrixField":
        """Pointwise standard matrix function φ(f(z))."""
        return self._wrap(matrix_function(self.values, phi))

    def at(self, state: Sequence[int]) -> ComplexArray:
        return self.values[tuple(state)]


def _require_compatible(f: MatrixField, g: MatrixField) -> None:
    if not f.space.same_as(g.space):
        raise DimensionMismatch("Fields live on different product spaces")
    if f.dim != g.dim:
        raise DimensionMismatch(f"Field dimensions differ: {f.dim} vs {g.dim}")


def rademacher_series(space: FiniteProductSpace, coefficients: Sequence[npt.ArrayLike]) -> MatrixField:
    """f(z) = Σᵢ zᵢ·Aᵢ using the state labels zᵢ."""
    coeffs = np.asarray(coefficients, dtype=np.complex128)
    if coeffs.shape[0] != space.n:
        raise DimensionMismatch(f"Need {space.n} coefficients, got {coeffs.shape[0]}")
    return MatrixField.from_function(space, lambda z: np.tensordot(z, coeffs, axes=1))


# ══════════════════════════════════════════════════════════════════════════════
# Array-level operators
# ══════════════════════════════════════════════════════════════════════════════

def _expect(values: ComplexArray, measure: FiniteProductSpace) -> ComplexArray:
    full = np.broadcast_to(values, measure.shape + values.shape[-2:])
    return np.tensordot(measure.joint_weights, full, axes=measure.n)


def _generator(values: ComplexArray, space: FiniteProductSpace) -> ComplexArray:
    means = _ConditionalMeans(values, space)
    total = np.zeros(values.shape, dtype=np.complex128)
    for i in range(space.n):
        total += means({i}) - values
    return total


def _semigroup(values: ComplexArray, space: FiniteProductSpace, t: float, method: str) -> ComplexArray:
    n = space.n
    stay, move = np.exp(-t), -np.expm1(-t)
    if method == "factorized":
        out = values
        for i in range(n):
            out = stay * out + move * _average(out, space.weights[i], i)
        return np.broadcast_to(out, values.shape).copy()

    total = np.zeros(values.shape, dtype=np.complex128)
    means = _ConditionalMeans(values, space)
    for index in InterlacingIndex.all(n):
        k = index.size
        weight = move**k * stay ** (n - k)
        if weight == 0.0:
            continue
        total += weight * means(index.members())
    return total


def _gamma(fm: _ConditionalMeans, gm: _ConditionalMeans, space: FiniteProductSpace) -> ComplexArray:
    f, g = fm.values, gm.values
    fg = f @ g
    fgm = _ConditionalMeans(fg, space)
    total = np.zeros(fg.shape, dtype=np.complex128)
    for i in range(space.n):
        total += fg - f @ gm({i}) - fm({i}) @ g + fgm({i})
    return 0.5 * total


_PAIR_CORNERS = ((), (0,), (1,), (0, 1))


def _double_difference_moment(
    fm: _ConditionalMeans,
    gm: _ConditionalMeans,
    fgm: _ConditionalMeans,
    space: FiniteProductSpace,
    i: int,
    j: int,
) -> ComplexArray:
    """E over independent resamples a (coordinate i) and b (coordinate j) of D_f·D_g.

    D_f = f(z) − f(z; a)ᵢ − f(z; b)ⱼ + f(z; a, b)ᵢⱼ. Each cross term
    E[f(c₁)·g(c₂)] equals E_{c₁∩c₂}[(E_{c₁∖c₂} f)(E_{c₂∖c₁} g)].
    """
    pair = (i, j)
    total = None
    for c1 in _PAIR_CORNERS:
        s1 = frozenset(pair[k] for k in c1)
        for c2 in _PAIR_CORNERS:
            s2 = frozenset(pair[k] for k in c2)
            shared = s1 & s2
            if s1 == s2:
                term = fgm(shared)
            else:
                term = fm(s1 - s2) @ gm(s2 - s1)
                for k in sorted(shared):
                    term = _average(term, space.weights[k], k)
            term = term if (len(c1) + len(c2)) % 2 == 0 else -term
            total = term if total is None else total + term
    return total


def _gamma2(fm: _ConditionalMeans, gm: _ConditionalMeans, space: FiniteProductSpace) -> ComplexArray:
    f, g = fm.values, gm.values
    fg = f @ g
    fgm = _ConditionalMeans(fg, space)
    total = np.zeros(fg.shape, dtype=np.complex128)
    for i in range(space.n):
        ei_f, ei_g, ei_fg = fm({i}), gm({i}), fgm({i})
        gamma_i = 0.5 * (fg - f @ ei_g - ei_f @ g + ei_fg)
        total += 0.5 * gamma_i + 0.5 * (ei_fg - ei_f @ ei_g)
    for i in range(space.n):
        for j in range(i + 1, space.n):
            # ordered pairs (i, j) and (j, i) contribute equally
            total += 0.5 * _double_difference_moment(fm, gm, fgm, space, i, j)
    return total


# ══════════════════════════════════════════════════════════════════════════════
# Public operations
# ══════════════════════════════════════════════════════════════════════════════

def expectation(f: MatrixField, measure: Optional[FiniteProductSpace] = None) -> ComplexArray:
    """Σ_z μ(z)·f(z); ``measure`` substitutes another product measure on the same states."""
    measure = f.space if measure is None else measure
    if measure.shape != f.space.shape:
        raise DimensionMismatch("Measure and field live on different state spaces")
    return _expect(f.values, measure)


def semigroup_apply(f: MatrixField, t: float, method: str = "auto") -> MatrixField:
    """Exact P_t f.

    ``method`` is ``"subset"`` (sum over all 2ⁿ interlacing subsets),
    ``"factorized"`` (one-coordinate kernels applied in turn) or ``"auto"``,
    which uses the factorized form above twelve factors.
    """
    if not np.isfinite(t) or t < 0:
        raise DomainError(f"semigroup time must be finite and >= 0, got {t}")
    n = f.space.n
    cap = get_settings().semigroup_max_factors
    if n > cap:
        raise ResourceError(f"semigroup_apply supports at most {cap} factors, got {n}")
    if t == 0:
        return f
    if method == "auto":
        method = "factorized" if n > FACTORIZED_ABOVE else "subset"
    if method not in ("subset", "factorized"):
        raise DomainError(f"Unknown semigroup method {method!r}")
    logger.debug("semigroup_apply: n=%d t=%g method=%s", n, t, method)
    return MatrixField(f.space, _semigroup(f.values, f.space, t, method))


def generator_apply(f: MatrixField) -> MatrixField:
    """L f = −Σᵢ δᵢ f with δᵢ f = f − Eᵢ f."""
    return MatrixField(f.space, _generator(f.values, f.space))


def carre_du_champ(f: MatrixField, g: Optional[MatrixField] = None) -> MatrixField:
    """Γ(f, g)(z) = ½ Σᵢ E[(f(z) − f((z; Z)ᵢ))·(g(z) − g((z; Z)ᵢ))]."""
    g = f if g is None else g
    _require_compatible(f, g)
    return MatrixField(f.space, _gamma(f.means, g.means, f.space))


def carre_du_champ2(f: MatrixField, g: Optional[MatrixField] = None) -> MatrixField:
    """Γ₂(f, g) by the explicit double-resampling formula."""
    g = f if g is None else g
    _require_compatible(f, g)
    return MatrixField(f.space, _gamma2(f.means, g.means, f.space))


def carre_du_champ_from_definition(f: MatrixField, g: Optional[MatrixField] = None) -> MatrixField:
    """½[L(fg) − f·L(g) − L(f)·g]."""
    g = f if g is None else g
    _require_compatible(f, g)
    space = f.space
    fv, gv = f.values, g.values
    out = 0.5 * (_generator(fv @ gv, space) - fv @ _generator(gv, space) - _generator(fv, space) @ gv)
    return MatrixField(space, out)


def carre_du_champ2_from_definition(f: MatrixField, g: Optional[MatrixField] = None) -> MatrixField:
    """½[L Γ(f, g) − Γ(f, L g) − Γ(L f, g)]."""
    g = f if g is None else g
    _require_compatible(f, g)
    space = f.space
    lf = _ConditionalMeans(_generator(f.values, space), space)
    lg = _ConditionalMeans(_generator(g.values, space), space)
    gamma_fg = _gamma(f.means, g.means, space)
    out = 0.5 * (_generator(gamma_fg, space) - _gamma(f.means, lg, space) - _gamma(lf, g.means, space))
    return MatrixField(space, out)


def dirichlet_form(f: MatrixField, g: Optional[MatrixField] = None, *, measure: Optional[FiniteProductSpace] = None) -> ComplexArray:
    """E(f, g) = E_μ Γ(f, g); ``measure`` replaces μ in the outer expectation."""
    return expectation(carre_du_champ(f, g), measure)


def matrix_variance(f: MatrixField, measure: Optional[FiniteProductSpace] = None) -> ComplexArray:
    mean = expectation(f, measure)
    return hermitize(expectation(f @ f, measure) - mean @ mean)


def centered(f: MatrixField) -> MatrixField:
    return MatrixField(f.space, f.values - expectation(f))


def trace_moment(f: MatrixField, p: float) -> float:
    """E_μ tr|f − E_μ f|^p."""
    if p < 1:
        raise DomainError(f"trace moment requires p >= 1, got {p}")
    lam = eigvalsh_stack(hermitize(centered(f).values))
    per_state = np.sum(np.abs(lam) ** p, axis=-1)
    return float(np.sum(f.space.joint_weights * per_state))


def log_trace_mgf(f: MatrixField, theta: float) -> float:
    """log E_μ tr̄ exp(θ(f − E_μ f)), evaluated stably."""
    lam = eigvalsh_stack(hermitize(centered(f).values))
    w = f.space.joint_weights[..., None] / f.dim
    return float(logsumexp(theta * lam, b=np.broadcast_to(w, lam.shape)))


def trace_mgf(f: MatrixField, theta: float) -> float:
    """Normalized trace mgf m(θ) = E_μ tr̄ exp(θ(f − E_μ f))."""
    return float(np.exp(log_trace_mgf(f, theta)))


def variance_proxy(f: MatrixField) -> float:
    """max_z ‖Γ(f)(z)‖."""
    lam = eigvalsh_stack(hermitize(carre_du_champ(f).values))
    return float(np.max(np.maximum(np.abs(lam[..., 0]), np.abs(lam[..., -1]))))


def r_beta(f: MatrixField, beta: float) -> float:
    """r(β) = (1/β)·log E_μ tr̄ exp(β·Γ(f))."""
    if not beta > 0:
        raise DomainError(f"beta must be positive, got {beta}")
    lam = eigvalsh_stack(hermitize(carre_du_champ(f).values))
    w = f.space.joint_weights[..., None] / f.dim
    return float(logsumexp(beta * lam, b=np.broadcast_to(w, lam.shape))) / beta


def limit_formula_gamma(f: MatrixField, g: MatrixField, t: float) -> MatrixField:
    """(1/2t)·E[(f(Z_t) − f(z))(g(Z_t) − g(z)) | Z₀ = z]; tends to Γ(f, g) as t ↓ 0."""
    if not t > 0:
        raise DomainError(f"limit formula needs t > 0, got {t}")
    space = f.space
    fv, gv = f.values, g.values
    pt = lambda v: _semigroup(v, space, t, "factorized")
    out = (pt(fv @ gv) - fv @ pt(gv) - pt(fv) @ gv + fv @ gv) / (2.0 * t)
    return MatrixField(space, out)


def triple_product_density(f: MatrixField, g: MatrixField, h: MatrixField) -> RealArray:
    """Pointwise tr[L(fgh) − L(fg)h − L(hf)g − L(gh)f + L(f)gh + L(g)hf + L(h)fg].

    This is the short-time rate of tr E[(Δf)(Δg)(Δh)]; its μ-average is zero
    for a reversible semigroup.
    """
    space = f.space
    F, G, H = f.values, g.values, h.values
    L = lambda v: _generator(v, space)
    out = (
        L(F @ G @ H)
        - L(F @ G) @ H
        - L(H @ F) @ G
        - L(G @ H) @ F
        + L(F) @ G @ H
        + L(G) @ H @ F
        + L(H) @ F @ G
    )
    return np.real(np.einsum("...ii->...", out))


def scalar_components(f: MatrixField, u: npt.ArrayLike) -> list[MatrixField]:
    """The real scalar fields Re(u* f eⱼ) and Im(u* f eⱼ), as 1×1 fields."""
    u = np.asarray(u, dtype=np.complex128)
    rows = np.einsum("i,...ij->...j", np.conj(u), f.values)
    out = []
    for j in range(f.dim):
        for part in (rows[..., j].real, rows[..., j].imag):
            out.append(MatrixField(f.space, part[..., None, None].astype(np.complex128)))
    return out


# ══════════════════════════════════════════════════════════════════════════════
# Dissipation
# ══════════════════════════════════════════════════════════════════════════════

def _central_difference(quantity: Callable[[float], ComplexArray], t: float, h: float) -> ComplexArray:
    if not (h > 0 and t >= h):
        raise DomainError(f"central difference needs 0 < h <= t, got h={h}, t={t}")
    return (quantity(t + h) - quantity(t - h)) / (2.0 * h)


def variance_derivative(f: MatrixField, t: float, h: float = 1e-5, *, measure: Optional[FiniteProductSpace] = None) -> ComplexArray:
    """d/dt Var(P_t f), by central difference."""
    return _central_difference(lambda s: matrix_variance(semigroup_apply(f, s), measure), t, h)


def energy_derivative(f: MatrixField, t: float, h: float = 1e-5, *, measure: Optional[FiniteProductSpace] = None) -> ComplexArray:
    """d/dt E(P_t f), by central difference."""
    return _central_difference(lambda s: dirichlet_form(semigroup_apply(f, s), measure=measure), t, h)


def energy_dissipation(f: MatrixField, t: float, *, measure: Optional[FiniteProductSpace] = None) -> ComplexArray:
    """−2·E_μ[(L P_t f)²], the exact rate of change of E(P_t f)."""
    lpf = generator_apply(semigroup_apply(f, t))
    return -2.0 * expectation(lpf @ lpf, measure)
