"""Monte Carlo tail curves and their comparison with the concentration bounds."""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Literal, Optional, Sequence

import numpy as np

from checks.harness import MarginTracker, scalar_margin
from checks.registry import CheckContext, check
from errors import DomainError
from lab.bounds import exp_tail_bound, expectation_bound, submanifold_tail, subgaussian_tail
from lab.continuous import SemigroupModel, build_model
from lab.finite import MatrixField, r_beta
from lab.hermitian import eigvalsh_stack, hermitize
from models import FunctionSpec, MatrixLiteral, MCEstimate, ModelKind, ModelSpec, TailRow, VerificationReport

logger = logging.getLogger(__name__)

STDERR_BAND = 4.0
PILOT_BAND = 5.0
TAIL_FLOOR = 1e-3

Branch = Literal["max", "min"]
BoundCurve = Callable[[float], float]

# σz, σx and σy/2: a non-commuting 2×2 series with v = ‖ΣAᵢ²‖ = 2.25
DEFAULT_SERIES = (
    [[1.0, 0.0], [0.0, -1.0]],
    [[0.0, 1.0], [1.0, 0.0]],
    [[0.0, -0.5j], [0.5j, 0.0]],
)


def default_series_model() -> SemigroupModel:
    coefficients = [MatrixLiteral.from_array(np.array(a, dtype=np.complex128)) for a in DEFAULT_SERIES]
    return build_model(ModelSpec(kind=ModelKind.GAUSSIAN_SERIES, coefficients=coefficients), FunctionSpec())


@dataclass(frozen=True)
class TailCurve:
    """Empirical P{λ(f − Ef) ≥ t} on a grid, plus the pilot mean it was centered with."""

    points: list[tuple[float, MCEstimate]]
    centered_stats: np.ndarray
    pilot_stderr: float
    branch: Branch

    @property
    def t_grid(self) -> list[float]:
        return [t for t, _ in self.points]


def _extreme_eigenvalue(values: np.ndarray, mean: np.ndarray, branch: Branch) -> np.ndarray:
    lam = eigvalsh_stack(hermitize(values - mean))
    return lam[..., -1] if branch == "max" else -lam[..., 0]


def default_t_grid(pilot_stderr: float, stats: np.ndarray, d: int, points: int) -> np.ndarray:
    """Evenly spaced t from 5·pilot_stderr·√d up to the empirical 1 − 10⁻³ quantile."""
    start = PILOT_BAND * pilot_stderr * math.sqrt(d)
    stop = float(np.quantile(stats, 1.0 - TAIL_FLOOR)) if stats.size else 0.0
    if stop <= start:
        stop = start + 1.0
    if start == 0.0:
        return np.linspace(stop / points, stop, points)
    return np.linspace(start, stop, points)


def mc_tail_curve(
    model: SemigroupModel,
    samples: int,
    t_grid: Optional[Sequence[float]],
    seed: int,
    *,
    branch: Branch = "max",
    points: int = 20,
    spawn_key: tuple[int, ...] = (),
) -> TailCurve:
    """Exceedance frequencies of λ_max(f − Ef) (or −λ_min) with binomial standard errors.

    E f comes from an independent pilot run of the same size; the main and
    pilot streams are children of SeedSequence(seed, spawn_key).
    """
    if samples < 2:
        raise DomainError(f"Monte Carlo needs at least 2 samples, got {samples}")
    pilot_seq, main_seq = np.random.SeedSequence(seed, spawn_key=spawn_key).spawn(2)
    pilot = model.evaluate(model.sample(np.random.default_rng(pilot_seq), samples))
    mean = pilot.mean(axis=0)
    spread = np.std(pilot.real, axis=0, ddof=1) + np.std(pilot.imag, axis=0, ddof=1)
    pilot_stderr = float(np.max(spread)) / math.sqrt(samples)

    values = model.evaluate(model.sample(np.random.default_rng(main_seq), samples))
    stats = _extreme_eigenvalue(values, mean, branch)
    grid = default_t_grid(pilot_stderr, stats, model.d, points) if t_grid is None else np.asarray(t_grid, dtype=float)
    logger.debug("mc_tail_curve: samples=%d branch=%s pilot_stderr=%.3g grid=[%g, %g]", samples, branch, pilot_stderr, grid[0], grid[-1])

    out = []
    for t in grid:
        p = float(np.mean(stats >= t))
        out.append((float(t), MCEstimate(value=p, stderr=math.sqrt(p * (1.0 - p) / samples), samples=samples, seed=seed)))
    return TailCurve(points=out, centered_stats=stats, pilot_stderr=pilot_stderr, branch=branch)


def bound_curve(
    model: SemigroupModel,
    kind: Literal["subgaussian", "exponential", "submanifold"] = "subgaussian",
    c: Optional[float] = None,
    v: Optional[float] = None,
) -> BoundCurve:
    """The tail bound for ``model`` as a function of t, clipped to a probability."""
    c = model.c if c is None else c
    v = model.variance_proxy if v is None else v
    d = model.d
    if kind == "subgaussian":
        return lambda t: min(1.0, subgaussian_tail(d, c, v, t))
    if kind == "submanifold":
        return lambda t: min(1.0, submanifold_tail(d, 1.0 / c, v, t))
    # r(β) is exact for finite fields; elsewhere the variance proxy majorizes it
    if isinstance(model.source, MatrixField):
        field = model.source
        return lambda t: min(1.0, exp_tail_bound(d, c, lambda beta: r_beta(field, beta), t))
    return lambda t: min(1.0, exp_tail_bound(d, c, v, t))


def tail_rows(curve: TailCurve, bound: BoundCurve, band: float = STDERR_BAND) -> list[TailRow]:
    rows = []
    for t, est in curve.points:
        b = bound(t)
        rows.append(TailRow(t=t, empirical=est.value, stderr=est.stderr, bound=b, passed=est.value - band * est.stderr <= b))
    return rows


def check_tail_dominance(
    model: SemigroupModel,
    bound: BoundCurve,
    samples: int,
    seed: int,
    *,
    t_grid: Optional[Sequence[float]] = None,
    points: int = 20,
    branches: Sequence[Branch] = ("max", "min"),
    ctx: Optional[CheckContext] = None,
) -> VerificationReport:
    """Empirical tail − 4·stderr ≤ bound at every grid t, for each eigenvalue branch."""
    ctx = ctx if ctx is not None else CheckContext(name="tail-dominance", seed=seed)
    tracker = MarginTracker(ctx, 0.0)
    for i, branch in enumerate(branches):
        tracker.trial()
        curve = mc_tail_curve(model, samples, t_grid, seed, branch=branch, points=points, spawn_key=ctx.spawn_key + (i,))
        for row in tail_rows(curve, bound):
            tracker.observe(
                scalar_margin(row.empirical - STDERR_BAND * row.stderr, row.bound),
                {"branch": branch, "t": row.t, "empirical": row.empirical, "stderr": row.stderr, "bound": row.bound},
            )
    tracker.summary["samples"] = samples
    return tracker.report()


def mc_expectation(model: SemigroupModel, samples: int, seed: int, *, branch: Branch = "max", spawn_key: tuple[int, ...] = ()) -> MCEstimate:
    """E λ_max(f − Ef) with E f from an independent pilot run."""
    curve = mc_tail_curve(model, samples, [0.0], seed, branch=branch, spawn_key=spawn_key)
    stats = curve.centered_stats
    return MCEstimate(value=float(stats.mean()), stderr=float(stats.std(ddof=1)) / math.sqrt(samples), samples=samples, seed=seed)


def check_expectation_bound(
    model: SemigroupModel,
    c: Optional[float],
    v: Optional[float],
    samples: int,
    seed: int,
    *,
    ctx: Optional[CheckContext] = None,
) -> VerificationReport:
    """Empirical E λ_max(f − Ef) − 4·stderr ≤ √(2cv·log d).

    This is a dominance check: the band is subtracted from the estimate, so
    a run fails only when the mean exceeds the bound by more than four
    standard errors. Both λ_max(f − Ef) and λ_max(Ef − f) are sampled and
    the worse branch is reported.
    """
    ctx = ctx if ctx is not None else CheckContext(name="expectation-bound", seed=seed)
    c = model.c if c is None else c
    v = model.variance_proxy if v is None else v
    bound = expectation_bound(model.d, c, v)
    tracker = MarginTracker(ctx, 0.0)
    for i, branch in enumerate(("max", "min")):
        tracker.trial()
        est = mc_expectation(model, samples, seed, branch=branch, spawn_key=ctx.spawn_key + (i,))
        tracker.observe(
            scalar_margin(est.value - STDERR_BAND * est.stderr, bound),
            {"branch": branch, "mean": est.value, "stderr": est.stderr, "bound": bound},
        )
    return tracker.report()


def _context_model(ctx: CheckContext) -> SemigroupModel:
    return ctx.model if ctx.model is not None else default_series_model()


@check(
    "tail-dominance",
    anchor="Exponential concentration and its subgaussian corollary",
    description="Monte Carlo P{λ_max(f − Ef) ≥ t} − 4·stderr against the tail bound on a t-grid",
    family="monte-carlo",
)
def run_tail_dominance(ctx: CheckContext) -> VerificationReport:
    model = _context_model(ctx)
    bound = bound_curve(model, ctx.get("bound", "subgaussian"), ctx.get("c", None), ctx.get("v", None))
    return check_tail_dominance(
        model,
        bound,
        int(ctx.get("samples", 100_000)),
        ctx.seed,
        t_grid=ctx.get("t_grid", None),
        points=int(ctx.get("points", 20)),
        ctx=ctx,
    )


@check(
    "expectation-bound",
    anchor="Expectation bound E λ_max(f − Ef) ≤ √(2cv·log d)",
    description="Monte Carlo mean of the extreme eigenvalues against √(2cv·log d)",
    family="monte-carlo",
)
def run_expectation_bound(ctx: CheckContext) -> VerificationReport:
    model = _context_model(ctx)
    return check_expectation_bound(model, ctx.get("c", None), ctx.get("v", None), int(ctx.get("samples", 100_000)), ctx.seed, ctx=ctx)
