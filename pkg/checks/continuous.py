"""Oracle cross-checks for the Euclidean, sphere and SO(d) models."""

import logging
import math
from typing import Optional, Sequence, Union

import numpy as np

from checks.finite import check_bakry_emery
from checks.harness import EXACT_TOL, MarginTracker, identity_margin, matrix_literal, scalar_margin, worst_psd
from checks.registry import CheckContext, check
from errors import DimensionMismatch
from lab.continuous import bakry_emery_constant, variance_proxy_closed_form
from lab.euclidean import LogConcaveModel, MatrixValuedMap, gamma2_euclidean, gamma_euclidean, langevin_sample, polynomial_map
from lab.hermitian import random_hermitian
from lab.orthogonal import (
    SOConjugationModel,
    gamma_geodesic_fd,
    gamma_so_conjugation,
    skew_basis_sum,
    skew_basis_sum_closed_form,
    so_sample_haar,
)
from lab.sphere import (
    SphereLinearModel,
    SphereQuadraticModel,
    gamma_from_tangential,
    gamma_sphere_linear,
    gamma_sphere_quadratic,
    sphere_brownian_path,
    sphere_sample,
)
from models import VerificationReport

logger = logging.getLogger(__name__)

ORACLE_TOL = 1e-9
GEODESIC_RTOL = 1e-3
SKEW_TOL = 1e-12
STDERR_BAND = 4.0


@check_bakry_emery.register
def _(target: LogConcaveModel, f, c: Optional[float] = None, tol: float = EXACT_TOL, *, ctx=None, points=None) -> VerificationReport:
    """Γ(f) ⪯ c·Γ₂(f) at the given points, with Γ₂ from the potential's Hessian."""
    c = bakry_emery_constant(target) if c is None else c
    ctx = ctx if ctx is not None else CheckContext(name="gaussian-bakry-emery", seed=0)
    maps = [f] if isinstance(f, MatrixValuedMap) else list(f)
    if points is None:
        points = ctx.rng().standard_normal((64, target.n))
    tracker = MarginTracker(ctx, tol)
    for fmap in maps:
        tracker.trial()
        g1 = gamma_euclidean(fmap, points)
        g2 = gamma2_euclidean(fmap, target, points)
        margin, (k,) = worst_psd(c * g2 - g1, g2)
        tracker.observe(margin, lambda: {"z": points[k], "gamma": matrix_literal(g1[k]), "gamma2": matrix_literal(g2[k])})
    return tracker.report()


def random_polynomial_map(n: int, d: int, rng: np.random.Generator, degree: int = 2) -> MatrixValuedMap:
    """A0 + Σ zᵢAᵢ (+ Σ zᵢzⱼBᵢⱼ when degree is 2) with random Hermitian coefficients."""
    quadratic = random_hermitian(d, rng, (n, n)) if degree >= 2 else None
    return polynomial_map(random_hermitian(d, rng), random_hermitian(d, rng, (n,)), quadratic)


def stderr_margin(error: float, stderr: float, band: float = STDERR_BAND) -> float:
    """(band·stderr − |error|)/(1 + band·stderr): nonnegative inside the band."""
    width = band * stderr
    return (width - abs(error)) / (1.0 + width)


# ══════════════════════════════════════════════════════════════════════════════
# Euclidean
# ══════════════════════════════════════════════════════════════════════════════

@check(
    "gaussian-bakry-emery",
    anchor="Log-concave measures: Bakry–Émery with c = 1/η",
    description="Γ(f) ⪯ c·Γ₂(f) for polynomial maps under the Gaussian and a quartic potential",
    family="continuous",
)
def run_gaussian_bakry_emery(ctx: CheckContext) -> VerificationReport:
    rng = ctx.rng()
    n, d = int(ctx.get("n", 3)), int(ctx.get("d", 2))
    trials = int(ctx.get("trials", 50))
    eta, kappa = float(ctx.get("eta", 0.5)), float(ctx.get("kappa", 0.25))
    tol = float(ctx.get("tol", EXACT_TOL))
    maps = [random_polynomial_map(n, d, rng, degree=1 + (k % 2)) for k in range(trials)]
    points = 2.0 * rng.standard_normal((64, n))
    reports = [
        check_bakry_emery(model, maps, None, tol, ctx=ctx, points=points)
        for model in (LogConcaveModel.gaussian(n), LogConcaveModel.quartic(n, eta, kappa))
    ]
    return min(reports, key=lambda r: r.margin).model_copy(update={"trials": sum(r.trials for r in reports)})


@check(
    "langevin-stationarity",
    anchor="Langevin diffusion with log-concave stationary law",
    description="Euler–Maruyama draws for the Gaussian potential have unit coordinate variance within 5%",
    family="continuous",
)
def run_langevin_stationarity(ctx: CheckContext) -> VerificationReport:
    rng = ctx.rng()
    n = int(ctx.get("n", 3))
    rel = float(ctx.get("rel_tol", 0.05))
    draws = langevin_sample(LogConcaveModel.gaussian(n), int(ctx.get("samples", 20000)), rng, h=float(ctx.get("step", 0.01)))
    tracker = MarginTracker(ctx, 0.0)
    tracker.trial()
    variances = draws.var(axis=0, ddof=1)
    worst = int(np.argmax(np.abs(variances - 1.0)))
    tracker.observe(scalar_margin(abs(variances[worst] - 1.0), rel), {"coordinate": worst, "variance": variances[worst]})
    tracker.summary["samples"] = len(draws)
    return tracker.report()


# ══════════════════════════════════════════════════════════════════════════════
# Sphere
# ══════════════════════════════════════════════════════════════════════════════

def _sphere_gamma_report(
    ctx: CheckContext,
    model: Union[SphereLinearModel, SphereQuadraticModel],
    closed_form,
    points: np.ndarray,
    extra: bool,
) -> VerificationReport:
    tracker = MarginTracker(ctx, float(ctx.get("tol", ORACLE_TOL)), identity=True)
    fmap = model.as_map()
    exact = closed_form(model, points)
    oracle = gamma_from_tangential(fmap, points)
    for k in range(len(points)):
        tracker.trial()
        tracker.observe(identity_margin(exact[k], oracle[k]), lambda: {"x": points[k], "gamma": exact[k], "oracle": oracle[k]})
    if extra:
        f = fmap(points)
        total = np.einsum("iab,ibc->ac", model.coefficients, model.coefficients)
        tracker.observe(identity_margin(exact + f @ f, np.broadcast_to(total, exact.shape)), {"relation": "gamma + f^2 = sum A^2"})
    v = variance_proxy_closed_form(model)
    slack = v * np.eye(model.d) - exact
    margin, (k,) = worst_psd(slack, exact)
    if margin < -EXACT_TOL:
        tracker.observe(margin, lambda: {"x": points[k], "variance_proxy": v})
    return tracker.report()


def _random_sphere_coefficients(ctx: CheckContext, rng: np.random.Generator) -> np.ndarray:
    n, d = int(ctx.get("n", 10)), int(ctx.get("d", 2))
    return random_hermitian(d, rng, (n + 1,))


@check(
    "sphere-linear-gamma",
    anchor="Sphere, linear model: Γ(f) = Σ Aᵢ² − f²",
    description="closed-form Γ against the tangential-projection oracle and the variance proxy",
    family="continuous",
)
def run_sphere_linear_gamma(ctx: CheckContext) -> VerificationReport:
    rng = ctx.rng()
    model = SphereLinearModel(_random_sphere_coefficients(ctx, rng))
    points = sphere_sample(model.n, rng, (int(ctx.get("trials", 100)),))
    return _sphere_gamma_report(ctx, model, gamma_sphere_linear, points, extra=True)


@check(
    "sphere-quadratic-gamma",
    anchor="Sphere, quadratic model: Γ(f) = 2Σ xᵢ²xⱼ²(Aᵢ − Aⱼ)²",
    description="closed-form Γ against the tangential-projection oracle and min(2a², 4b²)",
    family="continuous",
)
def run_sphere_quadratic_gamma(ctx: CheckContext) -> VerificationReport:
    rng = ctx.rng()
    model = SphereQuadraticModel(_random_sphere_coefficients(ctx, rng))
    points = sphere_sample(model.n, rng, (int(ctx.get("trials", 100)),))
    return _sphere_gamma_report(ctx, model, gamma_sphere_quadratic, points, extra=False)


@check(
    "sphere-brownian-stationarity",
    anchor="Brownian motion on the sphere leaves the uniform measure invariant",
    description="after geodesic steps from uniform starts, first and second moments stay within 4·stderr",
    family="continuous",
)
def run_sphere_brownian_stationarity(ctx: CheckContext) -> VerificationReport:
    rng = ctx.rng()
    n = int(ctx.get("n", 4))
    samples = int(ctx.get("samples", 4000))
    steps = int(ctx.get("steps", 50))
    h = float(ctx.get("step", 0.01))
    start = sphere_sample(n, rng, (samples,))
    end = sphere_brownian_path(start, h, steps, rng)[-1]
    tracker = MarginTracker(ctx, 0.0)
    tracker.trial()
    root = math.sqrt(samples)
    for name, values, expected in (("x", end, 0.0), ("x^2", end**2, 1.0 / (n + 1))):
        mean = values.mean(axis=0)
        se = values.std(axis=0, ddof=1) / root
        for i in range(n + 1):
            tracker.observe(stderr_margin(mean[i] - expected, se[i]), {"moment": name, "coordinate": i, "mean": mean[i], "stderr": se[i]})
    return tracker.report()


# ══════════════════════════════════════════════════════════════════════════════
# SO(d)
# ══════════════════════════════════════════════════════════════════════════════

def random_symmetric(d: int, rng: np.random.Generator, size: Sequence[int] = ()) -> np.ndarray:
    g = rng.standard_normal(tuple(size) + (d, d))
    return 0.5 * (g + np.swapaxes(g, -1, -2))


@check(
    "so-gamma-geodesic",
    anchor="SO(d) conjugation model: closed-form carré du champ",
    description="closed-form Γ against a geodesic finite-difference oracle, relative 1e-3",
    family="continuous",
)
def run_so_gamma_geodesic(ctx: CheckContext) -> VerificationReport:
    rng = ctx.rng()
    n, d = int(ctx.get("n", 2)), int(ctx.get("d", 3))
    h = float(ctx.get("h", 1e-5))
    tracker = MarginTracker(ctx, float(ctx.get("tol", GEODESIC_RTOL)), identity=True)
    for _ in range(int(ctx.get("trials", 100))):
        tracker.trial()
        model = SOConjugationModel(random_symmetric(d, rng, (n,)))
        rotations = so_sample_haar(d, rng, (n,))
        exact = gamma_so_conjugation(model, rotations)
        oracle = gamma_geodesic_fd(model, rotations, h)
        tracker.observe(identity_margin(oracle, exact), lambda: {"rotations": rotations, "gamma": exact, "oracle": oracle})
        v = variance_proxy_closed_form(model)
        margin, _ = worst_psd(v * np.eye(d) - exact, exact)
        if margin < -EXACT_TOL:
            tracker.observe(margin, {"variance_proxy": v, "gamma": exact})
    return tracker.report()


@check(
    "skew-basis-identity",
    anchor="Skew basis: Σ S_kl M S_kl = −½(tr[M]·I − Mᵀ) for any real M",
    description="direct sum over the skew basis against the closed form",
    family="continuous",
)
def run_skew_basis_identity(ctx: CheckContext) -> VerificationReport:
    rng = ctx.rng()
    trials = int(ctx.get("trials", 10000))
    dims = [int(x) for x in ctx.get("dims", [2, 3, 4, 5])]
    tracker = MarginTracker(ctx, float(ctx.get("tol", SKEW_TOL)), identity=True)
    per_dim = max(1, trials // len(dims))
    for d in dims:
        m = rng.standard_normal((per_dim, d, d))
        direct, closed = skew_basis_sum(m), skew_basis_sum_closed_form(m)
        errors = np.max(np.abs(direct - closed), axis=(-2, -1)) / (1.0 + np.max(np.abs(closed), axis=(-2, -1)))
        k = int(np.argmax(errors))
        tracker.trials += per_dim
        tracker.observe(-float(errors[k]), lambda: {"d": d, "M": m[k]})
    return tracker.report()


@check(
    "haar-invariants",
    anchor="Haar measure on SO(d)",
    description="sampled rotations satisfy OᵀO = I and det O = 1 to 1e-10; E[O] vanishes within 4·stderr",
    family="continuous",
)
def run_haar_invariants(ctx: CheckContext) -> VerificationReport:
    rng = ctx.rng()
    samples = int(ctx.get("samples", 10000))
    tol = float(ctx.get("tol", 1e-10))
    tracker = MarginTracker(ctx, tol, identity=True)
    for d in [int(x) for x in ctx.get("dims", [2, 3, 4])]:
        tracker.trial()
        o = so_sample_haar(d, rng, (samples,))
        if o.shape[-2:] != (d, d):
            raise DimensionMismatch(f"Haar sampler returned shape {o.shape}")
        ortho = float(np.max(np.abs(np.swapaxes(o, -1, -2) @ o - np.eye(d))))
        det = float(np.max(np.abs(np.linalg.det(o) - 1.0)))
        tracker.observe(-max(ortho, det), {"d": d, "orthogonality": ortho, "determinant": det})
        mean = o.mean(axis=0)
        se = o.std(axis=0, ddof=1) / math.sqrt(samples)
        margins = (STDERR_BAND * se - np.abs(mean)) / (1.0 + STDERR_BAND * se)
        a, b = np.unravel_index(int(np.argmin(margins)), margins.shape)
        if margins[a, b] < 0:
            tracker.observe(float(margins[a, b]), {"d": d, "entry": [int(a), int(b)], "mean": mean[a, b]})
    return tracker.report()
