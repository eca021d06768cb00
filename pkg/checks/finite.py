"""Exact checks on the finite product-measure engine."""

import logging
import math
from functools import singledispatch
from typing import Optional, Sequence, Union

import numpy as np

from checks.harness import (
    EXACT_TOL,
    MarginTracker,
    field_witness,
    identity_margin,
    random_fields,
    scalar_margin,
    worst_psd,
)
from checks.registry import CheckContext, check
from errors import DomainError
from lab.bounds import CUBE, TraceFunction, mgf_bound, poly_moment_bound, standard_trace_functions
from lab.finite import (
    FiniteProductSpace,
    MatrixField,
    carre_du_champ,
    carre_du_champ2,
    carre_du_champ2_from_definition,
    carre_du_champ_from_definition,
    dirichlet_form,
    energy_derivative,
    energy_dissipation,
    expectation,
    generator_apply,
    limit_formula_gamma,
    log_trace_mgf,
    matrix_variance,
    r_beta,
    scalar_components,
    semigroup_apply,
    trace_moment,
    triple_product_density,
    variance_derivative,
)
from lab.hermitian import eigvalsh_stack, hermitize, trace
from lab.orthogonal import SOConjugationModel
from lab.sphere import SphereLinearModel, SphereQuadraticModel
from models import VerificationReport

logger = logging.getLogger(__name__)

DEFAULT_T_GRID = (0.25, 1.0, 4.0)
IDENTITY_FUNCTION = TraceFunction(name="identity", phi=lambda x: x, psi=lambda x: np.ones_like(x))

FieldOrFields = Union[MatrixField, Sequence[MatrixField]]


def _fields(f: FieldOrFields) -> list[MatrixField]:
    return [f] if isinstance(f, MatrixField) else list(f)


def _context(ctx: Optional[CheckContext], name: str) -> CheckContext:
    return ctx if ctx is not None else CheckContext(name=name, seed=0)


def _tol(ctx: CheckContext, default: float = EXACT_TOL) -> float:
    return float(ctx.get("tol", default))


def _weighted_trace_power(values: np.ndarray, weights: np.ndarray, q: float) -> float:
    lam = eigvalsh_stack(hermitize(values))
    return float(np.sum(weights * np.sum(np.abs(lam) ** q, axis=-1)))


# ══════════════════════════════════════════════════════════════════════════════
# Bakry–Émery and its consequences
# ══════════════════════════════════════════════════════════════════════════════

@singledispatch
def check_bakry_emery(target, f, c: float = 2.0, tol: float = EXACT_TOL, *, ctx: Optional[CheckContext] = None, points=None) -> VerificationReport:
    """Γ(f) ⪯ c·Γ₂(f), checked pointwise."""
    raise DomainError(f"No Γ₂ is available for {type(target).__name__}")


@check_bakry_emery.register(SphereLinearModel)
@check_bakry_emery.register(SphereQuadraticModel)
@check_bakry_emery.register(SOConjugationModel)
def _(target, f, c: float = 2.0, tol: float = EXACT_TOL, *, ctx=None, points=None) -> VerificationReport:
    raise DomainError(
        f"{type(target).__name__} has no Γ₂ evaluator: the curvature term needs the Ricci tensor, "
        "so its Bakry–Émery constant is taken as known rather than checked"
    )


@check_bakry_emery.register
def _(target: FiniteProductSpace, f, c: float = 2.0, tol: float = EXACT_TOL, *, ctx=None, points=None) -> VerificationReport:
    tracker = MarginTracker(_context(ctx, "bakry-emery"), tol)
    for field in _fields(f):
        tracker.trial()
        g1, g2 = carre_du_champ(field).values, carre_du_champ2(field).values
        margin, state = worst_psd(c * g2 - g1, g2)
        tracker.observe(margin, lambda: field_witness(field.space, state, f=field.values, gamma=g1, gamma2=g2))
    return tracker.report()


def check_local_ergodicity(
    f: FieldOrFields, t_grid: Sequence[float] = DEFAULT_T_GRID, c: float = 2.0, tol: float = EXACT_TOL, *, ctx=None
) -> VerificationReport:
    """Γ(P_t f) ⪯ e^{−2t/c}·P_tΓ(f) at every state."""
    tracker = MarginTracker(_context(ctx, "local-ergodicity"), tol)
    for field in _fields(f):
        tracker.trial()
        gamma_f = carre_du_champ(field)
        for t in t_grid:
            lhs = carre_du_champ(semigroup_apply(field, t)).values
            rhs = math.exp(-2.0 * t / c) * semigroup_apply(gamma_f, t).values
            margin, state = worst_psd(rhs - lhs, rhs)
            tracker.observe(margin, lambda: {"t": t, **field_witness(field.space, state, lhs=lhs, rhs=rhs)})
    return tracker.report()


def check_local_poincare(
    f: FieldOrFields, t_grid: Sequence[float] = DEFAULT_T_GRID, c: float = 2.0, tol: float = EXACT_TOL, *, ctx=None
) -> VerificationReport:
    """P_t(f²) − (P_t f)² ⪯ c(1 − e^{−2t/c})·P_tΓ(f) at every state."""
    tracker = MarginTracker(_context(ctx, "local-poincare"), tol)
    for field in _fields(f):
        tracker.trial()
        gamma_f = carre_du_champ(field)
        square = field @ field
        for t in t_grid:
            ptf = semigroup_apply(field, t).values
            lhs = semigroup_apply(square, t).values - ptf @ ptf
            rhs = c * (-math.expm1(-2.0 * t / c)) * semigroup_apply(gamma_f, t).values
            margin, state = worst_psd(rhs - lhs, rhs)
            tracker.observe(margin, lambda: {"t": t, **field_witness(field.space, state, lhs=lhs, rhs=rhs)})
    return tracker.report()


def _matrix_witness(**matrices: np.ndarray) -> dict:
    return {k: hermitize(v) for k, v in matrices.items()}


def check_poincare(f: FieldOrFields, alpha: float = 1.0, tol: float = EXACT_TOL, *, ctx=None) -> VerificationReport:
    """Var(f) ⪯ α·E(f)."""
    tracker = MarginTracker(_context(ctx, "poincare"), tol)
    for field in _fields(f):
        tracker.trial()
        var, energy = matrix_variance(field), alpha * dirichlet_form(field)
        margin, _ = worst_psd(energy - var, energy)
        tracker.observe(margin, lambda: _matrix_witness(variance=var, energy=energy))
    return tracker.report()


def check_variance_ergodicity(
    f: FieldOrFields, t_grid: Sequence[float] = DEFAULT_T_GRID, alpha: float = 1.0, tol: float = EXACT_TOL, *, ctx=None
) -> VerificationReport:
    """Var(P_t f) ⪯ e^{−2t/α}·Var(f)."""
    tracker = MarginTracker(_context(ctx, "variance-ergodicity"), tol)
    for field in _fields(f):
        tracker.trial()
        var = matrix_variance(field)
        for t in t_grid:
            lhs = matrix_variance(semigroup_apply(field, t))
            rhs = math.exp(-2.0 * t / alpha) * var
            margin, _ = worst_psd(rhs - lhs, rhs)
            tracker.observe(margin, lambda: {"t": t, **_matrix_witness(lhs=lhs, rhs=rhs)})
    return tracker.report()


def check_energy_ergodicity(
    f: FieldOrFields, t_grid: Sequence[float] = DEFAULT_T_GRID, alpha: float = 1.0, tol: float = EXACT_TOL, *, ctx=None
) -> VerificationReport:
    """E(P_t f) ⪯ e^{−2t/α}·E(f)."""
    tracker = MarginTracker(_context(ctx, "energy-ergodicity"), tol)
    for field in _fields(f):
        tracker.trial()
        energy = dirichlet_form(field)
        for t in t_grid:
            lhs = dirichlet_form(semigroup_apply(field, t))
            rhs = math.exp(-2.0 * t / alpha) * energy
            margin, _ = worst_psd(rhs - lhs, rhs)
            tracker.observe(margin, lambda: {"t": t, **_matrix_witness(lhs=lhs, rhs=rhs)})
    return tracker.report()


def check_jensen(
    f: FieldOrFields,
    t_grid: Sequence[float] = (0.25, 1.0),
    q_list: Sequence[float] = (1.0, 2.0, 3.0),
    tol: float = EXACT_TOL,
    *,
    reverse: bool = False,
    ctx=None,
) -> VerificationReport:
    """E tr(P_tΓ(f))^q ≤ E tr Γ(f)^q, or the opposite inequality when ``reverse``."""
    tracker = MarginTracker(_context(ctx, "jensen"), tol)
    for field in _fields(f):
        tracker.trial()
        gamma_f = carre_du_champ(field)
        w = field.space.joint_weights
        for q in q_list:
            rhs = _weighted_trace_power(gamma_f.values, w, q)
            for t in t_grid:
                lhs = _weighted_trace_power(semigroup_apply(gamma_f, t).values, w, q)
                margin = scalar_margin(rhs, lhs) if reverse else scalar_margin(lhs, rhs)
                tracker.observe(margin, {"q": q, "t": t, "lhs": lhs, "rhs": rhs})
    return tracker.report()


# ══════════════════════════════════════════════════════════════════════════════
# Identities
# ══════════════════════════════════════════════════════════════════════════════

def check_reversibility(
    f: FieldOrFields,
    g: FieldOrFields,
    t_grid: Sequence[float] = (0.5, 1.0),
    tol: float = EXACT_TOL,
    *,
    measure: Optional[Sequence[FiniteProductSpace]] = None,
    ctx=None,
) -> VerificationReport:
    """E[(P_t f)·g] = E[f·(P_t g)] and E[(Lf)·g] = E[f·(Lg)].

    ``measure`` replaces μ by other measures (one per pair) in the outer
    expectations, which breaks both identities.
    """
    tracker = MarginTracker(_context(ctx, "reversibility"), tol, identity=True)
    fs, gs = _fields(f), _fields(g)
    measures = list(measure) if measure is not None else [None] * len(fs)
    for a, b, nu in zip(fs, gs, measures):
        tracker.trial()
        for t in t_grid:
            left = expectation(semigroup_apply(a, t) @ b, nu)
            right = expectation(a @ semigroup_apply(b, t), nu)
            tracker.observe(identity_margin(left, right), lambda: {"t": t, "left": left, "right": right})
        left = expectation(generator_apply(a) @ b, nu)
        right = expectation(a @ generator_apply(b), nu)
        tracker.observe(identity_margin(left, right), lambda: {"generator": True, "left": left, "right": right})
    return tracker.report()


def check_semigroup_law(
    f: FieldOrFields, grid: Sequence[float] = (0.1, 0.5, 1.0), tol: float = EXACT_TOL, *, ctx=None
) -> VerificationReport:
    """P_t P_s f = P_{s+t} f, and the subset and factorized evaluations agree."""
    tracker = MarginTracker(_context(ctx, "semigroup-law"), tol, identity=True)
    for field in _fields(f):
        tracker.trial()
        for s in grid:
            ps = semigroup_apply(field, s)
            for t in grid:
                composed = semigroup_apply(ps, t).values
                direct = semigroup_apply(field, s + t).values
                tracker.observe(identity_margin(composed, direct), {"s": s, "t": t})
        subset = semigroup_apply(field, 0.7, method="subset").values
        factorized = semigroup_apply(field, 0.7, method="factorized").values
        tracker.observe(identity_margin(factorized, subset), {"methods": ["subset", "factorized"], "t": 0.7})
        mean_drift = identity_margin(expectation(semigroup_apply(field, 1.0)), expectation(field))
        tracker.observe(mean_drift, {"mean-preserved": True})
    return tracker.report()


def check_triple_product(
    fields: Sequence[tuple[MatrixField, MatrixField, MatrixField]],
    tol: float = EXACT_TOL,
    *,
    measure: Optional[Sequence[FiniteProductSpace]] = None,
    ctx=None,
) -> VerificationReport:
    """The average of the triple-product trace expression vanishes."""
    tracker = MarginTracker(_context(ctx, "triple-product"), tol, identity=True)
    measures = list(measure) if measure is not None else [None] * len(fields)
    for (f, g, h), nu in zip(fields, measures):
        tracker.trial()
        density = triple_product_density(f, g, h)
        weights = (nu or f.space).joint_weights
        value = float(np.sum(weights * density))
        scale = float(np.sum(weights * np.abs(density)))
        tracker.observe(-abs(value) / (1.0 + scale), {"average": value, "scale": scale})
    return tracker.report()


def check_dimension_reduction(
    f: FieldOrFields,
    rng: np.random.Generator,
    tol: float = EXACT_TOL,
    *,
    measure: Optional[Sequence[FiniteProductSpace]] = None,
    ctx=None,
) -> VerificationReport:
    """u*Γ(f)u = Σⱼ Γ(Re u*f eⱼ) + Γ(Im u*f eⱼ), and the same for Γ₂.

    ``measure`` evaluates the scalar components' operators under other
    product measures (one per field), which breaks the identity.
    """
    tracker = MarginTracker(_context(ctx, "dimension-reduction"), tol, identity=True)
    fields = _fields(f)
    measures = list(measure) if measure is not None else [None] * len(fields)
    for field, nu in zip(fields, measures):
        tracker.trial()
        u = rng.standard_normal(field.dim) + 1j * rng.standard_normal(field.dim)
        u /= np.linalg.norm(u)
        parts = scalar_components(field, u)
        if nu is not None:
            parts = [MatrixField(nu, p.values) for p in parts]
        for op in (carre_du_champ, carre_du_champ2):
            full = np.einsum("i,...ij,j->...", np.conj(u), op(field).values, u)
            reduced = sum(op(p).values[..., 0, 0] for p in parts)
            tracker.observe(identity_margin(full, reduced), {"operator": op.__name__, "u": u.tolist()})
    return tracker.report()


def check_dissipation(
    f: FieldOrFields,
    t_grid: Sequence[float] = (0.5, 1.0),
    h: float = 1e-5,
    tol: float = 1e-6,
    *,
    measure: Optional[Sequence[FiniteProductSpace]] = None,
    ctx=None,
) -> VerificationReport:
    """d/dt Var(P_t f) = −2·E(P_t f) and d/dt E(P_t f) = −2·E_μ[(L P_t f)²].

    ``measure`` takes every outer expectation under another measure (one per
    field) while the semigroup stays the μ-semigroup.
    """
    tracker = MarginTracker(_context(ctx, "dissipation"), tol, identity=True)
    fields = _fields(f)
    measures = list(measure) if measure is not None else [None] * len(fields)
    for field, nu in zip(fields, measures):
        tracker.trial()
        for t in t_grid:
            dvar = variance_derivative(field, t, h, measure=nu)
            expected = -2.0 * dirichlet_form(semigroup_apply(field, t), measure=nu)
            tracker.observe(identity_margin(dvar, expected), {"t": t, "quantity": "variance"})
            denergy = energy_derivative(field, t, h, measure=nu)
            dissipated = energy_dissipation(field, t, measure=nu)
            tracker.observe(identity_margin(denergy, dissipated), {"t": t, "quantity": "energy"})
    return tracker.report()


def check_carre_du_champ_definition(f: FieldOrFields, g: FieldOrFields, tol: float = EXACT_TOL, *, ctx=None) -> VerificationReport:
    """Explicit Γ, Γ₂ against their generator definitions, plus the integrated forms."""
    tracker = MarginTracker(_context(ctx, "carre-du-champ-definition"), tol, identity=True)
    for a, b in zip(_fields(f), _fields(g)):
        tracker.trial()
        tracker.observe(identity_margin(carre_du_champ(a, b).values, carre_du_champ_from_definition(a, b).values), {"operator": "gamma"})
        tracker.observe(identity_margin(carre_du_champ2(a, b).values, carre_du_champ2_from_definition(a, b).values), {"operator": "gamma2"})
        la = generator_apply(a)
        tracker.observe(identity_margin(expectation(carre_du_champ2(a)), expectation(la @ la)), {"operator": "mean-gamma2"})
        tracker.observe(identity_margin(dirichlet_form(a, b), -expectation(a @ generator_apply(b))), {"operator": "dirichlet"})
    return tracker.report()


def check_carre_du_champ_limit(f: FieldOrFields, g: FieldOrFields, t: float = 1e-7, tol: float = 1e-5, *, ctx=None) -> VerificationReport:
    """(1/2t)·E[(f(Z_t) − f(z))(g(Z_t) − g(z))] ≈ Γ(f, g) for small t."""
    tracker = MarginTracker(_context(ctx, "carre-du-champ-limit"), tol, identity=True)
    for a, b in zip(_fields(f), _fields(g)):
        tracker.trial()
        tracker.observe(identity_margin(limit_formula_gamma(a, b, t).values, carre_du_champ(a, b).values), {"t": t})
    return tracker.report()


# ══════════════════════════════════════════════════════════════════════════════
# Carré du champ inequalities
# ══════════════════════════════════════════════════════════════════════════════

def check_carre_du_champ_young(
    f: FieldOrFields,
    g: FieldOrFields,
    s_grid: Sequence[float] = (0.5, 1.0, 2.0),
    tol: float = EXACT_TOL,
    *,
    reverse: bool = False,
    ctx=None,
) -> VerificationReport:
    """Γ(f, g) + Γ(g, f) ⪯ s·Γ(f) + s⁻¹·Γ(g), reversed when ``reverse``."""
    tracker = MarginTracker(_context(ctx, "carre-du-champ-young"), tol)
    for a, b in zip(_fields(f), _fields(g)):
        tracker.trial()
        cross = carre_du_champ(a, b).values + carre_du_champ(b, a).values
        ga, gb = carre_du_champ(a).values, carre_du_champ(b).values
        for s in s_grid:
            rhs = s * ga + gb / s
            margin, state = worst_psd(cross - rhs if reverse else rhs - cross, rhs)
            tracker.observe(margin, {"s": s, "state": list(state)})
    return tracker.report()


def check_carre_du_champ_convexity(
    f: FieldOrFields,
    g: FieldOrFields,
    taus: Sequence[float] = (0.25, 0.5, 0.75),
    tol: float = EXACT_TOL,
    *,
    reverse: bool = False,
    ctx=None,
) -> VerificationReport:
    """Γ(τf + (1−τ)g) ⪯ τΓ(f) + (1−τ)Γ(g), reversed when ``reverse``."""
    tracker = MarginTracker(_context(ctx, "carre-du-champ-convexity"), tol)
    for a, b in zip(_fields(f), _fields(g)):
        tracker.trial()
        ga, gb = carre_du_champ(a).values, carre_du_champ(b).values
        for tau in taus:
            lhs = carre_du_champ(tau * a + (1.0 - tau) * b).values
            rhs = tau * ga + (1.0 - tau) * gb
            margin, state = worst_psd(lhs - rhs if reverse else rhs - lhs, rhs)
            tracker.observe(margin, {"tau": tau, "state": list(state)})
    return tracker.report()


def check_chain_rule(
    f: FieldOrFields,
    g: FieldOrFields,
    functions: Sequence[TraceFunction] = (IDENTITY_FUNCTION, CUBE),
    tol: float = EXACT_TOL,
    *,
    reverse: bool = False,
    ctx=None,
) -> VerificationReport:
    """E tr Γ(g, φ(f)) ≤ (E tr[Γ(f)ψ(f)] · E tr[Γ(g)ψ(f)])^{1/2} with ψ = |φ′| convex.

    ``reverse`` asserts the opposite inequality.
    """
    tracker = MarginTracker(_context(ctx, "chain-rule"), tol)
    for a, b in zip(_fields(f), _fields(g)):
        tracker.trial()
        ga, gb = carre_du_champ(a).values, carre_du_champ(b).values
        for fn in functions:
            psi_f = a.apply(fn.psi).values
            lhs = float(trace(expectation(carre_du_champ(b, a.apply(fn.phi)))))
            first = float(trace(expectation(MatrixField(a.space, ga @ psi_f))))
            second = float(trace(expectation(MatrixField(a.space, gb @ psi_f))))
            rhs = math.sqrt(max(first, 0.0) * max(second, 0.0))
            margin = scalar_margin(rhs, lhs) if reverse else scalar_margin(lhs, rhs)
            tracker.observe(margin, {"phi": fn.name, "lhs": lhs, "rhs": rhs})
    return tracker.report()


# ══════════════════════════════════════════════════════════════════════════════
# Moment theorems
# ══════════════════════════════════════════════════════════════════════════════

def check_poly_theorem(
    f: FieldOrFields,
    q_list: Sequence[float] = (1.0, 1.5, 2.0, 3.0),
    c: float = 2.0,
    tol: float = EXACT_TOL,
    *,
    min_positive_fraction: float = 0.95,
    ctx=None,
) -> VerificationReport:
    """[E tr|f − Ef|^{2q}]^{1/(2q)} ≤ √(c(2q−1))·(E tr Γ(f)^q)^{1/(2q)}.

    The fraction of (field, q) pairs with strictly positive slack is recorded
    in the report witness. A fraction below ``min_positive_fraction`` is
    itself a failing observation with margin ``fraction − min_positive_fraction``.
    """
    tracker = MarginTracker(_context(ctx, "poly-moment"), tol)
    positive = total = 0
    for field in _fields(f):
        tracker.trial()
        gamma_values = carre_du_champ(field).values
        w = field.space.joint_weights
        for q in q_list:
            lhs = trace_moment(field, 2.0 * q) ** (1.0 / (2.0 * q))
            rhs = poly_moment_bound(c, q, _weighted_trace_power(gamma_values, w, q))
            positive += rhs - lhs > 1e-12 * (1.0 + rhs)
            total += 1
            tracker.observe(scalar_margin(lhs, rhs), {"q": q, "lhs": lhs, "rhs": rhs})
    fraction = positive / total if total else 1.0
    if fraction < min_positive_fraction:
        tracker.observe(fraction - min_positive_fraction, {"positive_slack_fraction": fraction})
    tracker.summary["positive_slack_fraction"] = fraction
    return tracker.report()


def mgf_theta_grid(beta: float, c: float, points: int = 11, shrink: float = 0.95) -> np.ndarray:
    return shrink * math.sqrt(beta / c) * np.linspace(-1.0, 1.0, points)


def check_mgf_theorem(
    f: FieldOrFields, beta_grid: Sequence[float] = (1.0, 10.0, 100.0), c: float = 2.0, tol: float = EXACT_TOL, *, theta_points: int = 11, ctx=None
) -> VerificationReport:
    """log E tr̄ e^{θ(f − Ef)} ≤ cθ²r(β)/(2(1 − cθ²/β)) on a θ-grid inside the admissible interval."""
    tracker = MarginTracker(_context(ctx, "mgf-theorem"), tol)
    for field in _fields(f):
        tracker.trial()
        for beta in beta_grid:
            r = r_beta(field, beta)
            for theta in mgf_theta_grid(beta, c, theta_points):
                lhs = log_trace_mgf(field, float(theta))
                rhs = mgf_bound(c, float(theta), beta, r)
                tracker.observe(scalar_margin(lhs, rhs), {"beta": beta, "theta": float(theta), "lhs": lhs, "rhs": rhs})
    return tracker.report()


# ══════════════════════════════════════════════════════════════════════════════
# Catalog entries
# ══════════════════════════════════════════════════════════════════════════════

def _single(ctx: CheckContext) -> list[MatrixField]:
    return [fields[0] for _, fields in random_fields(ctx)]


def _pairs(ctx: CheckContext) -> tuple[list[MatrixField], list[MatrixField]]:
    pairs = [fields for _, fields in random_fields(ctx, 2)]
    return [p[0] for p in pairs], [p[1] for p in pairs]


def _grid(ctx: CheckContext, key: str, default: Sequence[float]) -> list[float]:
    return [float(x) for x in ctx.get(key, default)]


def _tilted(ctx: CheckContext, fields: Sequence[MatrixField]) -> list[FiniteProductSpace]:
    rng = np.random.default_rng(np.random.SeedSequence(ctx.seed, spawn_key=ctx.spawn_key + (1,)))
    strength = float(ctx.get("strength", 1.0))
    return [f.space.tilted(strength, rng) for f in fields]


@check(
    "bakry-emery",
    anchor="Product measure Bakry–Émery criterion, holds with c = 2",
    description="Γ(f) ⪯ c·Γ₂(f) at every state of random finite fields",
    family="finite",
)
def run_bakry_emery(ctx: CheckContext) -> VerificationReport:
    fields = _single(ctx)
    return check_bakry_emery(fields[0].space, fields, float(ctx.get("c", 2.0)), _tol(ctx), ctx=ctx)


@check(
    "bakry-emery-small-c",
    anchor="Product measure Bakry–Émery criterion (constant too small)",
    description="Γ(f) ⪯ 0.1·Γ₂(f) should fail on some field",
    family="finite",
    negative_control=True,
)
def run_bakry_emery_small_c(ctx: CheckContext) -> VerificationReport:
    fields = _single(ctx)
    return check_bakry_emery(fields[0].space, fields, float(ctx.get("c", 0.1)), _tol(ctx), ctx=ctx)


@check(
    "local-ergodicity",
    anchor="Bakry–Émery consequences: local ergodicity",
    description="Γ(P_t f) ⪯ e^{−2t/c}·P_tΓ(f) with c = 2",
    family="finite",
)
def run_local_ergodicity(ctx: CheckContext) -> VerificationReport:
    return check_local_ergodicity(_single(ctx), _grid(ctx, "t_grid", DEFAULT_T_GRID), float(ctx.get("c", 2.0)), _tol(ctx), ctx=ctx)


@check(
    "local-ergodicity-small-c",
    anchor="Bakry–Émery consequences: local ergodicity (constant too small)",
    description="local ergodicity with c = 0.5 should fail on some field",
    family="finite",
    negative_control=True,
)
def run_local_ergodicity_small_c(ctx: CheckContext) -> VerificationReport:
    return check_local_ergodicity(_single(ctx), _grid(ctx, "t_grid", DEFAULT_T_GRID), float(ctx.get("c", 0.5)), _tol(ctx), ctx=ctx)


@check(
    "local-poincare",
    anchor="Bakry–Émery consequences: local Poincaré inequality",
    description="P_t(f²) − (P_t f)² ⪯ c(1 − e^{−2t/c})·P_tΓ(f)",
    family="finite",
)
def run_local_poincare(ctx: CheckContext) -> VerificationReport:
    return check_local_poincare(_single(ctx), _grid(ctx, "t_grid", DEFAULT_T_GRID), float(ctx.get("c", 2.0)), _tol(ctx), ctx=ctx)


@check(
    "poincare",
    anchor="matrix Poincaré inequality with constant α = 1",
    description="Var(f) ⪯ α·E(f) for product measures",
    family="finite",
)
def run_poincare(ctx: CheckContext) -> VerificationReport:
    return check_poincare(_single(ctx), float(ctx.get("alpha", 1.0)), _tol(ctx), ctx=ctx)


@check(
    "variance-ergodicity",
    anchor="Poincaré consequences: exponential ergodicity of variance",
    description="Var(P_t f) ⪯ e^{−2t/α}·Var(f)",
    family="finite",
)
def run_variance_ergodicity(ctx: CheckContext) -> VerificationReport:
    return check_variance_ergodicity(_single(ctx), _grid(ctx, "t_grid", DEFAULT_T_GRID), float(ctx.get("alpha", 1.0)), _tol(ctx), ctx=ctx)


@check(
    "energy-ergodicity",
    anchor="Poincaré consequences: exponential ergodicity of energy",
    description="E(P_t f) ⪯ e^{−2t/α}·E(f)",
    family="finite",
)
def run_energy_ergodicity(ctx: CheckContext) -> VerificationReport:
    return check_energy_ergodicity(_single(ctx), _grid(ctx, "t_grid", DEFAULT_T_GRID), float(ctx.get("alpha", 1.0)), _tol(ctx), ctx=ctx)


@check(
    "jensen",
    anchor="semigroup Jensen inequality for trace powers",
    description="E tr(P_tΓ(f))^q ≤ E tr Γ(f)^q for q in {1, 2, 3}",
    family="finite",
)
def run_jensen(ctx: CheckContext) -> VerificationReport:
    return check_jensen(_single(ctx), _grid(ctx, "t_grid", (0.25, 1.0)), _grid(ctx, "q_list", (1.0, 2.0, 3.0)), _tol(ctx), ctx=ctx)


@check(
    "reversibility",
    anchor="Reversibility: the semigroup acting on matrix-valued functions is symmetric",
    description="E[(P_t f)g] = E[f(P_t g)] and E[(Lf)g] = E[f(Lg)]",
    family="finite",
)
def run_reversibility(ctx: CheckContext) -> VerificationReport:
    fs, gs = _pairs(ctx)
    return check_reversibility(fs, gs, _grid(ctx, "t_grid", (0.5, 1.0)), _tol(ctx), ctx=ctx)


@check(
    "reversibility-broken-measure",
    anchor="Reversibility (outer expectation under a perturbed measure)",
    description="symmetry should fail when expectations use tilted weights",
    family="finite",
    negative_control=True,
)
def run_reversibility_broken(ctx: CheckContext) -> VerificationReport:
    fs, gs = _pairs(ctx)
    measures = _tilted(ctx, fs)
    return check_reversibility(fs, gs, _grid(ctx, "t_grid", (0.5, 1.0)), _tol(ctx), measure=measures, ctx=ctx)


@check(
    "semigroup-law",
    anchor="Markov semigroup property P_{s+t} = P_s P_t",
    description="semigroup law, subset/factorized agreement and mean preservation",
    family="finite",
)
def run_semigroup_law(ctx: CheckContext) -> VerificationReport:
    return check_semigroup_law(_single(ctx), _grid(ctx, "grid", (0.1, 0.5, 1.0)), _tol(ctx), ctx=ctx)


def _triples(ctx: CheckContext) -> list[tuple[MatrixField, MatrixField, MatrixField]]:
    return [tuple(fields) for _, fields in random_fields(ctx, 3)]


@check(
    "triple-product",
    anchor="Triple product lemma",
    description="the μ-average of the triple-product trace expression is zero",
    family="finite",
)
def run_triple_product(ctx: CheckContext) -> VerificationReport:
    return check_triple_product(_triples(ctx), _tol(ctx), ctx=ctx)


@check(
    "triple-product-broken-measure",
    anchor="Triple product lemma (average under a perturbed measure)",
    description="the triple-product average should be nonzero under tilted weights",
    family="finite",
    negative_control=True,
)
def run_triple_product_broken(ctx: CheckContext) -> VerificationReport:
    triples = _triples(ctx)
    measures = _tilted(ctx, [t[0] for t in triples])
    return check_triple_product(triples, _tol(ctx), measure=measures, ctx=ctx)


@check(
    "dimension-reduction",
    anchor="Dimension reduction of carré du champ",
    description="u*Γ(f)u and u*Γ₂(f)u as sums over real scalar components",
    family="finite",
)
def run_dimension_reduction(ctx: CheckContext) -> VerificationReport:
    rng = np.random.default_rng(np.random.SeedSequence(ctx.seed, spawn_key=ctx.spawn_key + (1,)))
    return check_dimension_reduction(_single(ctx), rng, _tol(ctx), ctx=ctx)


@check(
    "dissipation",
    anchor="Dissipation of variance and energy",
    description="central-difference derivatives of Var(P_t f) and E(P_t f) match their closed forms",
    family="finite",
)
def run_dissipation(ctx: CheckContext) -> VerificationReport:
    return check_dissipation(_single(ctx), _grid(ctx, "t_grid", (0.5, 1.0)), float(ctx.get("h", 1e-5)), _tol(ctx, 1e-6), ctx=ctx)


@check(
    "carre-du-champ-definition",
    anchor="Product measure carré du champs lemma",
    description="explicit Γ and Γ₂ match the generator definitions; E Γ₂ = E (Lf)²; E(f, g) = −E[f Lg]",
    family="finite",
)
def run_carre_du_champ_definition(ctx: CheckContext) -> VerificationReport:
    fs, gs = _pairs(ctx)
    return check_carre_du_champ_definition(fs, gs, _tol(ctx), ctx=ctx)


@check(
    "carre-du-champ-limit",
    anchor="carré du champ as a short-time limit",
    description="(1/2t)·E[(Δf)(Δg)] → Γ(f, g) as t ↓ 0",
    family="finite",
)
def run_carre_du_champ_limit(ctx: CheckContext) -> VerificationReport:
    fs, gs = _pairs(ctx)
    return check_carre_du_champ_limit(fs, gs, float(ctx.get("t", 1e-7)), _tol(ctx, 1e-5), ctx=ctx)


@check(
    "carre-du-champ-young",
    anchor="Young inequality for the carré du champ",
    description="Γ(f, g) + Γ(g, f) ⪯ sΓ(f) + s⁻¹Γ(g)",
    family="finite",
)
def run_carre_du_champ_young(ctx: CheckContext) -> VerificationReport:
    fs, gs = _pairs(ctx)
    return check_carre_du_champ_young(fs, gs, _grid(ctx, "s_grid", (0.5, 1.0, 2.0)), _tol(ctx), ctx=ctx)


@check(
    "carre-du-champ-convexity",
    anchor="operator convexity of the carré du champ",
    description="Γ(τf + (1−τ)g) ⪯ τΓ(f) + (1−τ)Γ(g)",
    family="finite",
)
def run_carre_du_champ_convexity(ctx: CheckContext) -> VerificationReport:
    fs, gs = _pairs(ctx)
    return check_carre_du_champ_convexity(fs, gs, _grid(ctx, "taus", (0.25, 0.5, 0.75)), _tol(ctx), ctx=ctx)


@check(
    "chain-rule",
    anchor="Chain rule inequality, ψ := |φ′| convex",
    description="E tr Γ(g, φ(f)) ≤ (E tr[Γ(f)ψ(f)]·E tr[Γ(g)ψ(f)])^{1/2}",
    family="finite",
)
def run_chain_rule(ctx: CheckContext) -> VerificationReport:
    fs, gs = _pairs(ctx)
    functions = [IDENTITY_FUNCTION] + standard_trace_functions()
    return check_chain_rule(fs, gs, functions, _tol(ctx), ctx=ctx)


@check(
    "poly-moment",
    anchor="Polynomial moments theorem, for q = 1 and q ≥ 1.5",
    description="exact trace moments against √(c(2q−1))·(E tr Γ^q)^{1/(2q)}",
    family="finite",
)
def run_poly_moment(ctx: CheckContext) -> VerificationReport:
    return check_poly_theorem(
        _single(ctx),
        _grid(ctx, "q_list", (1.0, 1.5, 2.0, 3.0)),
        float(ctx.get("c", 2.0)),
        _tol(ctx),
        min_positive_fraction=float(ctx.get("min_positive_fraction", 0.95)),
        ctx=ctx,
    )


@check(
    "mgf-theorem",
    anchor="Exponential moments theorem, θ in (−√(β/c), √(β/c))",
    description="exact log trace mgf against cθ²r(β)/(2(1 − cθ²/β))",
    family="finite",
)
def run_mgf_theorem(ctx: CheckContext) -> VerificationReport:
    return check_mgf_theorem(
        _single(ctx),
        _grid(ctx, "beta_grid", (1.0, 10.0, 100.0)),
        float(ctx.get("c", 2.0)),
        _tol(ctx),
        theta_points=int(ctx.get("theta_points", 11)),
        ctx=ctx,
    )


# ══════════════════════════════════════════════════════════════════════════════
# Negative controls
# ══════════════════════════════════════════════════════════════════════════════

@check(
    "dimension-reduction-broken-measure",
    anchor="Dimension reduction of carré du champ (components under a perturbed measure)",
    description="the scalar decomposition should fail when the components live on tilted weights",
    family="finite",
    negative_control=True,
)
def run_dimension_reduction_broken(ctx: CheckContext) -> VerificationReport:
    fields = _single(ctx)
    measures = _tilted(ctx, fields)
    rng = np.random.default_rng(np.random.SeedSequence(ctx.seed, spawn_key=ctx.spawn_key + (2,)))
    return check_dimension_reduction(fields, rng, _tol(ctx), measure=measures, ctx=ctx)


@check(
    "dissipation-broken-measure",
    anchor="Dissipation of variance and energy (expectations under a perturbed measure)",
    description="the dissipation identities should fail when expectations use tilted weights",
    family="finite",
    negative_control=True,
)
def run_dissipation_broken(ctx: CheckContext) -> VerificationReport:
    fields = _single(ctx)
    return check_dissipation(
        fields, _grid(ctx, "t_grid", (0.5, 1.0)), float(ctx.get("h", 1e-5)), _tol(ctx, 1e-6), measure=_tilted(ctx, fields), ctx=ctx
    )


@check(
    "local-poincare-small-c",
    anchor="Bakry–Émery consequences: local Poincaré inequality (constant too small)",
    description="local Poincaré with c = 0.25 should fail once P_t has mixed",
    family="finite",
    negative_control=True,
)
def run_local_poincare_small_c(ctx: CheckContext) -> VerificationReport:
    return check_local_poincare(_single(ctx), _grid(ctx, "t_grid", DEFAULT_T_GRID), float(ctx.get("c", 0.25)), _tol(ctx), ctx=ctx)


@check(
    "poincare-small-alpha",
    anchor="matrix Poincaré inequality (constant too small)",
    description="Var(f) ⪯ 0.25·E(f) should fail on some field",
    family="finite",
    negative_control=True,
)
def run_poincare_small_alpha(ctx: CheckContext) -> VerificationReport:
    return check_poincare(_single(ctx), float(ctx.get("alpha", 0.25)), _tol(ctx), ctx=ctx)


@check(
    "variance-ergodicity-small-alpha",
    anchor="Poincaré consequences: exponential ergodicity of variance (constant too small)",
    description="Var(P_t f) ⪯ e^{−8t}·Var(f) should fail on some field",
    family="finite",
    negative_control=True,
)
def run_variance_ergodicity_small_alpha(ctx: CheckContext) -> VerificationReport:
    return check_variance_ergodicity(_single(ctx), _grid(ctx, "t_grid", DEFAULT_T_GRID), float(ctx.get("alpha", 0.25)), _tol(ctx), ctx=ctx)


@check(
    "energy-ergodicity-small-alpha",
    anchor="Poincaré consequences: exponential ergodicity of energy (constant too small)",
    description="E(P_t f) ⪯ e^{−8t}·E(f) should fail on some field",
    family="finite",
    negative_control=True,
)
def run_energy_ergodicity_small_alpha(ctx: CheckContext) -> VerificationReport:
    return check_energy_ergodicity(_single(ctx), _grid(ctx, "t_grid", DEFAULT_T_GRID), float(ctx.get("alpha", 0.25)), _tol(ctx), ctx=ctx)


@check(
    "jensen-reversed",
    anchor="semigroup Jensen inequality for trace powers (direction reversed)",
    description="E tr(P_tΓ(f))^q ≥ E tr Γ(f)^q for q in {2, 3} should fail",
    family="finite",
    negative_control=True,
)
def run_jensen_reversed(ctx: CheckContext) -> VerificationReport:
    return check_jensen(_single(ctx), _grid(ctx, "t_grid", (0.25, 1.0)), _grid(ctx, "q_list", (2.0, 3.0)), _tol(ctx), reverse=True, ctx=ctx)


@check(
    "chain-rule-reversed",
    anchor="Chain rule inequality (direction reversed)",
    description="E tr Γ(g, φ(f)) ≥ (E tr[Γ(f)ψ(f)]·E tr[Γ(g)ψ(f)])^{1/2} should fail",
    family="finite",
    negative_control=True,
)
def run_chain_rule_reversed(ctx: CheckContext) -> VerificationReport:
    fs, gs = _pairs(ctx)
    functions = [IDENTITY_FUNCTION] + standard_trace_functions()
    return check_chain_rule(fs, gs, functions, _tol(ctx), reverse=True, ctx=ctx)


@check(
    "carre-du-champ-young-reversed",
    anchor="Young inequality for the carré du champ (direction reversed)",
    description="Γ(f, g) + Γ(g, f) ⪰ sΓ(f) + s⁻¹Γ(g) should fail",
    family="finite",
    negative_control=True,
)
def run_carre_du_champ_young_reversed(ctx: CheckContext) -> VerificationReport:
    fs, gs = _pairs(ctx)
    return check_carre_du_champ_young(fs, gs, _grid(ctx, "s_grid", (0.5, 1.0, 2.0)), _tol(ctx), reverse=True, ctx=ctx)


@check(
    "carre-du-champ-convexity-reversed",
    anchor="operator convexity of the carré du champ (direction reversed)",
    description="Γ(τf + (1−τ)g) ⪰ τΓ(f) + (1−τ)Γ(g) should fail",
    family="finite",
    negative_control=True,
)
def run_carre_du_champ_convexity_reversed(ctx: CheckContext) -> VerificationReport:
    fs, gs = _pairs(ctx)
    return check_carre_du_champ_convexity(fs, gs, _grid(ctx, "taus", (0.25, 0.5, 0.75)), _tol(ctx), reverse=True, ctx=ctx)


@check(
    "poly-moment-small-c",
    anchor="Polynomial moments theorem (constant too small)",
    description="trace moments against √(0.1(2q−1))·(E tr Γ^q)^{1/(2q)} should fail",
    family="finite",
    negative_control=True,
)
def run_poly_moment_small_c(ctx: CheckContext) -> VerificationReport:
    return check_poly_theorem(_single(ctx), _grid(ctx, "q_list", (1.0, 2.0)), float(ctx.get("c", 0.1)), _tol(ctx), ctx=ctx)


@check(
    "mgf-theorem-small-c",
    anchor="Exponential moments theorem (constant too small)",
    description="log trace mgf against the bound with c = 0.05 should fail",
    family="finite",
    negative_control=True,
)
def run_mgf_theorem_small_c(ctx: CheckContext) -> VerificationReport:
    return check_mgf_theorem(
        _single(ctx),
        _grid(ctx, "beta_grid", (0.1, 1.0)),
        float(ctx.get("c", 0.05)),
        _tol(ctx),
        theta_points=int(ctx.get("theta_points", 11)),
        ctx=ctx,
    )
