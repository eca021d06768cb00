"""Closed-form constants and the uniform model wrapper used by Monte Carlo checks."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import singledispatch
from typing import Any, Callable, Optional

import numpy as np

from errors import DomainError
from lab.euclidean import (
    GaussianSeries,
    LogConcaveModel,
    MatrixValuedMap,
    gamma2_euclidean,
    gamma_euclidean,
    langevin_sample,
)
from lab.finite import (
    FiniteProductSpace,
    MatrixField,
    carre_du_champ,
    carre_du_champ2,
    rademacher_series,
    sample_states,
    variance_proxy,
)
from lab.hermitian import ComplexArray, op_norm
from lab.orthogonal import SOConjugationModel, gamma_so_conjugation, so_sample_haar
from lab.sphere import (
    SphereLinearModel,
    SphereQuadraticModel,
    gamma_sphere_linear,
    gamma_sphere_quadratic,
    sphere_quadratic_constant_a,
    sphere_quadratic_constant_b,
    sphere_sample,
)
from models import FunctionKind, FunctionSpec, ModelKind, ModelSpec

logger = logging.getLogger(__name__)


# ══════════════════════════════════════════════════════════════════════════════
# Constants
# ══════════════════════════════════════════════════════════════════════════════

@singledispatch
def variance_proxy_closed_form(model: Any) -> float:
    """Upper bound on v_f = sup ‖Γ(f)‖ for the models with a closed form."""
    raise DomainError(f"No closed-form variance proxy for {type(model).__name__}")


@variance_proxy_closed_form.register
def _(model: SphereLinearModel) -> float:
    a = model.coefficients
    return float(op_norm(np.einsum("iab,ibc->ac", a, a)))


@variance_proxy_closed_form.register
def _(model: SphereQuadraticModel) -> float:
    a = sphere_quadratic_constant_a(model)
    b = sphere_quadratic_constant_b(model)
    return min(2.0 * a**2, 4.0 * b**2)


@variance_proxy_closed_form.register
def _(model: SOConjugationModel) -> float:
    a = model.coefficients
    d = model.d
    tr = np.trace(a, axis1=-2, axis2=-1)
    tr_sq = np.einsum("iab,iba->i", a, a)
    centered = a - (tr / d)[:, None, None] * np.eye(d)
    spread = np.atleast_1d(op_norm(centered))
    return float(0.5 * np.sum(tr_sq - tr**2 / d + d * spread**2))


@variance_proxy_closed_form.register
def _(model: GaussianSeries) -> float:
    a = model.coefficients
    return float(op_norm(np.einsum("iab,ibc->ac", a, a)))


@singledispatch
def bakry_emery_constant(model: Any) -> float:
    raise DomainError(f"No Bakry–Émery constant is known for {type(model).__name__}")


@bakry_emery_constant.register
def _(model: FiniteProductSpace) -> float:
    return 2.0


@bakry_emery_constant.register
def _(model: LogConcaveModel) -> float:
    return 1.0 / model.eta


@bakry_emery_constant.register(SphereLinearModel)
@bakry_emery_constant.register(SphereQuadraticModel)
def _(model) -> float:
    return 1.0 / (model.n - 1)


@bakry_emery_constant.register
def _(model: SOConjugationModel) -> float:
    return 4.0 / (model.d - 1)


# ══════════════════════════════════════════════════════════════════════════════
# Uniform model wrapper
# ══════════════════════════════════════════════════════════════════════════════

Points = np.ndarray


@dataclass(frozen=True)
class SemigroupModel:
    """A sampler, a matrix function and its carré du champ, under one interface.

    ``source`` keeps the underlying lab object (space, log-concave model,
    sphere or SO(d) model) for checks that dispatch on it.
    """

    kind: ModelKind
    c: float
    d: int
    sampler: Callable[[np.random.Generator, int], Points]
    function: Callable[[Points], ComplexArray]
    gamma: Callable[[Points], ComplexArray]
    variance_proxy: float
    gamma2: Optional[Callable[[Points], ComplexArray]] = None
    source: Any = None

    def sample(self, rng: np.random.Generator, count: int) -> Points:
        return self.sampler(rng, count)

    def evaluate(self, points: Points) -> ComplexArray:
        return self.function(points)


def _constant_function(a: ComplexArray) -> tuple[Callable, Callable]:
    def value(points: Points) -> ComplexArray:
        return np.broadcast_to(a, (len(points),) + a.shape)

    def gamma(points: Points) -> ComplexArray:
        return np.zeros((len(points),) + a.shape, dtype=np.complex128)

    return value, gamma


def _coefficients(spec: ModelSpec) -> np.ndarray:
    return np.stack([c.to_array() for c in spec.coefficients])


def _finite_space(spec: ModelSpec, function: FunctionSpec) -> FiniteProductSpace:
    if spec.factors is not None:
        weights = tuple(spec.factors)
    else:
        weights = tuple(np.full(m, 1.0 / m) for m in spec.sizes)
    if spec.n is not None and spec.n != len(weights):
        raise DomainError(f"model n={spec.n} but {len(weights)} factors were given")
    if function.kind == FunctionKind.RADEMACHER_SERIES:
        if any(len(w) != 2 for w in weights):
            raise DomainError("rademacher-series needs two-point factors")
        return FiniteProductSpace(weights=weights, labels=tuple([-1.0, 1.0] for _ in weights))
    return FiniteProductSpace(weights=weights)


def _finite_field(space: FiniteProductSpace, function: FunctionSpec, rng: np.random.Generator) -> MatrixField:
    if function.kind == FunctionKind.RANDOM:
        return MatrixField.random(space, function.d, rng)
    if function.kind == FunctionKind.CONSTANT:
        return MatrixField.constant(space, function.matrix.to_array())
    if function.kind == FunctionKind.FIELD:
        f = MatrixField.from_literal(function.field.model_dump(exclude_none=True))
        if not f.space.same_as(space):
            raise DomainError("field literal lives on a different space than the model")
        return MatrixField(space, f.values)
    if function.kind == FunctionKind.RADEMACHER_SERIES:
        return rademacher_series(space, [c.to_array() for c in function.coefficients])
    raise DomainError("finite-product models need an explicit function (random, constant, field or rademacher-series)")


def _build_finite(spec: ModelSpec, function: FunctionSpec, rng: np.random.Generator) -> SemigroupModel:
    space = _finite_space(spec, function)
    f = _finite_field(space, function, rng)
    gamma_field = carre_du_champ(f)
    gamma2_field = carre_du_champ2(f)

    def lookup(field: MatrixField) -> Callable[[Points], ComplexArray]:
        return lambda points: field.values[tuple(np.asarray(points).T)]

    return SemigroupModel(
        kind=ModelKind.FINITE_PRODUCT,
        c=bakry_emery_constant(space),
        d=f.dim,
        sampler=lambda rng, count: sample_states(space, count, rng),
        function=lookup(f),
        gamma=lookup(gamma_field),
        gamma2=lookup(gamma2_field),
        variance_proxy=variance_proxy(f),
        source=f,
    )


def _build_euclidean(spec: ModelSpec, function: FunctionSpec) -> SemigroupModel:
    series = GaussianSeries(_coefficients(spec))
    if spec.kind == ModelKind.GAUSSIAN_SERIES:
        lc = LogConcaveModel.gaussian(series.n)
        sampler = lambda rng, count: rng.standard_normal((count, series.n))
    else:
        lc = LogConcaveModel.quartic(series.n, spec.eta, spec.kappa)
        sampler = lambda rng, count: langevin_sample(lc, count, rng, h=spec.step, burn_in=spec.burn_in, thin=spec.thin)
    c = bakry_emery_constant(lc)
    if function.kind == FunctionKind.CONSTANT:
        value, gamma = _constant_function(function.matrix.to_array())
        return SemigroupModel(spec.kind, c, series.d, sampler, value, gamma, 0.0, gamma2=gamma, source=lc)
    if function.kind != FunctionKind.MODEL:
        raise DomainError(f"{spec.kind.value} models support the 'model' and 'constant' functions")
    fmap: MatrixValuedMap = series.as_map()
    return SemigroupModel(
        kind=spec.kind,
        c=c,
        d=series.d,
        sampler=sampler,
        function=fmap,
        gamma=lambda z: gamma_euclidean(fmap, z),
        gamma2=lambda z: gamma2_euclidean(fmap, lc, z),
        variance_proxy=variance_proxy_closed_form(series),
        source=lc,
    )


def _build_manifold(spec: ModelSpec, function: FunctionSpec) -> SemigroupModel:
    coefficients = _coefficients(spec)
    if spec.kind == ModelKind.SPHERE_LINEAR:
        model = SphereLinearModel(coefficients)
        evaluate, gamma = model.as_map(), lambda x: gamma_sphere_linear(model, x)
        sampler = lambda rng, count: sphere_sample(model.n, rng, (count,))
    elif spec.kind == ModelKind.SPHERE_QUADRATIC:
        model = SphereQuadraticModel(coefficients)
        evaluate, gamma = model.as_map(), lambda x: gamma_sphere_quadratic(model, x)
        sampler = lambda rng, count: sphere_sample(model.n, rng, (count,))
    else:
        model = SOConjugationModel(coefficients)
        evaluate, gamma = model, lambda o: gamma_so_conjugation(model, o)
        sampler = lambda rng, count: so_sample_haar(model.d, rng, (count, model.n))
    c = bakry_emery_constant(model)
    if function.kind == FunctionKind.CONSTANT:
        value, zero = _constant_function(function.matrix.to_array())
        return SemigroupModel(spec.kind, c, model.d, sampler, value, zero, 0.0, source=model)
    if function.kind != FunctionKind.MODEL:
        raise DomainError(f"{spec.kind.value} models support the 'model' and 'constant' functions")
    return SemigroupModel(
        kind=spec.kind,
        c=c,
        d=model.d,
        sampler=sampler,
        function=evaluate,
        gamma=gamma,
        variance_proxy=variance_proxy_closed_form(model),
        source=model,
    )


def build_model(spec: ModelSpec, function: FunctionSpec, rng: Optional[np.random.Generator] = None) -> SemigroupModel:
    """Turn a config model and function description into a :class:`SemigroupModel`."""
    logger.debug("build_model: kind=%s function=%s", spec.kind.value, function.kind.value)
    if spec.kind == ModelKind.FINITE_PRODUCT:
        return _build_finite(spec, function, rng or np.random.default_rng(0))
    if spec.kind in (ModelKind.GAUSSIAN_SERIES, ModelKind.LANGEVIN):
        return _build_euclidean(spec, function)
    return _build_manifold(spec, function)


