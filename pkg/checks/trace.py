"""Randomized checks of the trace inequalities."""

import logging
from typing import Optional, Sequence

import numpy as np

from checks.harness import EXACT_TOL, MarginTracker, identity_margin, scalar_margin
from checks.registry import CheckContext, check
from lab.bounds import (
    CONCAVE_ROOT,
    TraceFunction,
    gibbs_state,
    mean_value_lhs,
    mean_value_rhs,
    standard_trace_functions,
    young_entropy_check,
)
from lab.hermitian import random_hermitian
from models import VerificationReport

logger = logging.getLogger(__name__)

GIBBS_TOL = 1e-9


def check_mean_value(
    trials: int,
    dims: Sequence[int],
    functions: Sequence[TraceFunction],
    seed: int,
    tol: float = EXACT_TOL,
    *,
    ctx: Optional[CheckContext] = None,
) -> VerificationReport:
    """tr[C(φ(A) − φ(B))] ≤ inf_s ¼·tr[(s(A−B)² + s⁻¹C²)(ψ(A) + ψ(B))] on random triples."""
    ctx = ctx if ctx is not None else CheckContext(name="trace", seed=seed)
    rng = ctx.rng()
    tracker = MarginTracker(ctx, tol)
    violations = 0
    for trial in range(trials):
        tracker.trial()
        d = int(dims[trial % len(dims)])
        a, b, c = random_hermitian(d, rng, (3,))
        for fn in functions:
            lhs = mean_value_lhs(a, b, c, fn.phi)
            rhs = mean_value_rhs(a, b, c, fn.psi)
            margin = scalar_margin(lhs, rhs)
            violations += margin < -tol
            tracker.observe(margin, lambda: {"phi": fn.name, "A": a, "B": b, "C": c, "lhs": lhs, "rhs": rhs})
    tracker.summary["violations"] = violations
    return tracker.report()


def _random_density(d: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    y = g @ np.conj(g.T)
    return d * y / np.real(np.trace(y))


def check_young_entropy(trials: int, dims: Sequence[int], seed: int, tol: float = EXACT_TOL, *, ctx: Optional[CheckContext] = None) -> VerificationReport:
    """tr̄[XY] ≤ log tr̄ e^X + tr̄[Y log Y] for random pairs, with equality at the Gibbs state."""
    ctx = ctx if ctx is not None else CheckContext(name="trace", seed=seed)
    rng = ctx.rng()
    tracker = MarginTracker(ctx, tol)
    gibbs_gap = 0.0
    for trial in range(trials):
        tracker.trial()
        d = int(dims[trial % len(dims)])
        x = random_hermitian(d, rng)
        y = _random_density(d, rng)
        lhs, rhs = young_entropy_check(x, y)
        tracker.observe(scalar_margin(lhs, rhs), lambda: {"X": x, "Y": y, "lhs": lhs, "rhs": rhs})
        g_lhs, g_rhs = young_entropy_check(x, gibbs_state(x))
        gap = -identity_margin(g_lhs, g_rhs)
        gibbs_gap = max(gibbs_gap, gap)
        tracker.observe(0.0 if gap <= GIBBS_TOL else -gap, lambda: {"gibbs": True, "X": x, "gap": gap})
    tracker.summary["gibbs_gap"] = gibbs_gap
    return tracker.report()


@check(
    "mean-value-trace",
    anchor="Mean value trace inequality, ψ := |φ′| convex",
    description="tr[C(φ(A) − φ(B))] against its closed-form right-hand side on random Hermitian triples",
    family="trace",
)
def run_mean_value(ctx: CheckContext) -> VerificationReport:
    return check_mean_value(
        int(ctx.get("trials", 10000)),
        ctx.get("dims", [3]),
        standard_trace_functions(),
        ctx.seed,
        float(ctx.get("tol", EXACT_TOL)),
        ctx=ctx,
    )


@check(
    "mean-value-concave",
    anchor="Mean value trace inequality with ψ concave (φ(x) = x|x|^{1/2})",
    description="counterexample search for the mean value inequality outside its hypothesis",
    family="trace",
    negative_control=True,
)
def run_mean_value_concave(ctx: CheckContext) -> VerificationReport:
    return check_mean_value(
        int(ctx.get("trials", 10000)),
        ctx.get("dims", [3]),
        [CONCAVE_ROOT],
        ctx.seed,
        float(ctx.get("tol", EXACT_TOL)),
        ctx=ctx,
    )


@check(
    "young-entropy",
    anchor="Young's inequality for matrix entropy",
    description="tr̄[XY] ≤ log tr̄ e^X + tr̄[Y log Y]; equality at Y = e^X/tr̄ e^X",
    family="trace",
)
def run_young_entropy(ctx: CheckContext) -> VerificationReport:
    return check_young_entropy(int(ctx.get("trials", 10000)), ctx.get("dims", [3]), ctx.seed, float(ctx.get("tol", EXACT_TOL)), ctx=ctx)
