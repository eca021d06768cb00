"""Margin bookkeeping and random inputs shared by the checks."""

import logging
import math
import time
from typing import Any, Callable, Dict, Iterator, Optional, Sequence, Union

import numpy as np

from checks.registry import CheckContext
from lab.finite import FiniteProductSpace, MatrixField
from lab.hermitian import HermitianMatrix, eigvalsh_stack, hermitize
from models import CheckStatus, VerificationReport
from settings import get_settings

logger = logging.getLogger(__name__)

EXACT_TOL = 1e-10

Witness = Union[Dict[str, Any], Callable[[], Dict[str, Any]], None]


def classify(margin: float, tolerance: float, identity: bool = False) -> CheckStatus:
    """pass iff margin ≥ −tolerance; margins in (−tolerance, 0) are marginal unless ``identity``."""
    if math.isnan(margin):
        return CheckStatus.FAIL
    if margin >= 0:
        return CheckStatus.PASS
    if margin >= -tolerance:
        return CheckStatus.PASS if identity else CheckStatus.PASS_MARGINAL
    return CheckStatus.FAIL


def jsonable(value: Any) -> Any:
    """Convert numpy values in a witness to plain JSON types."""
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        if value.ndim == 2 and value.shape[0] == value.shape[1] and np.iscomplexobj(value):
            return matrix_literal(value)
        return jsonable(value.tolist())
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        return float(value)
    if isinstance(value, complex):
        return {"re": value.real, "im": value.imag}
    return value


def matrix_literal(a: np.ndarray) -> Dict[str, Any]:
    return HermitianMatrix(hermitize(a)).to_literal()


class MarginTracker:
    """Keeps the worst margin seen over a check's trials and where it happened."""

    def __init__(self, ctx: CheckContext, tolerance: float, identity: bool = False):
        self.ctx = ctx
        self.tolerance = tolerance
        self.identity = identity
        self.worst = math.inf
        self.witness: Optional[Dict[str, Any]] = None
        self.trials = 0
        self.summary: Dict[str, Any] = {}
        self._start = time.perf_counter()

    def observe(self, margin: float, witness: Witness = None) -> None:
        margin = float(margin)
        if margin < self.worst or (math.isnan(margin) and not math.isnan(self.worst)):
            self.worst = margin
            w = witness() if callable(witness) else witness
            self.witness = None if w is None else jsonable(w)

    def trial(self) -> None:
        self.trials += 1

    @property
    def margin(self) -> float:
        return 0.0 if self.worst == math.inf else self.worst

    def report(self) -> VerificationReport:
        elapsed = time.perf_counter() - self._start if get_settings().record_timing else 0.0
        witness = self.witness
        if self.summary:
            witness = {**(witness or {}), **jsonable(self.summary)}
        return VerificationReport(
            name=self.ctx.name,
            status=classify(self.margin, self.tolerance, self.identity),
            margin=self.margin,
            tolerance=self.tolerance,
            trials=self.trials,
            seed=self.ctx.seed,
            witness=witness,
            elapsed_s=elapsed,
            negative_control=bool(self.ctx.negative_control),
        )


# ══════════════════════════════════════════════════════════════════════════════
# Margins
# ══════════════════════════════════════════════════════════════════════════════

def psd_margins(slack: np.ndarray, reference: np.ndarray) -> np.ndarray:
    """λ_min(slack)/(1 + ‖reference‖) at every matrix of a stack."""
    lam = eigvalsh_stack(hermitize(slack))[..., 0]
    ref = eigvalsh_stack(hermitize(reference))
    scale = 1.0 + np.maximum(np.abs(ref[..., 0]), np.abs(ref[..., -1]))
    return lam / scale


def worst_psd(slack: np.ndarray, reference: np.ndarray) -> tuple[float, tuple[int, ...]]:
    """Smallest normalized psd margin and the index where it occurs."""
    margins = np.atleast_1d(psd_margins(slack, reference))
    flat = int(np.argmin(margins))
    return float(margins.flat[flat]), tuple(int(i) for i in np.unravel_index(flat, margins.shape))


def scalar_margin(lhs: float, rhs: float) -> float:
    return (rhs - lhs) / (1.0 + abs(rhs))


def identity_margin(actual: np.ndarray, expected: np.ndarray) -> float:
    """−max|actual − expected|/(1 + max|expected|)."""
    actual, expected = np.asarray(actual), np.asarray(expected)
    err = float(np.max(np.abs(actual - expected))) if actual.size else 0.0
    scale = 1.0 + (float(np.max(np.abs(expected))) if expected.size else 0.0)
    return -err / scale


# ══════════════════════════════════════════════════════════════════════════════
# Random inputs
# ══════════════════════════════════════════════════════════════════════════════

def random_space(rng: np.random.Generator, n: int = 3, max_size: int = 3, sizes: Optional[Sequence[int]] = None) -> FiniteProductSpace:
    """A product of ``n`` factors with 2..max_size states and Dirichlet weights."""
    if sizes is None:
        sizes = rng.integers(2, max_size + 1, size=n)
    return FiniteProductSpace.random([int(m) for m in sizes], rng)


def random_fields(ctx: CheckContext, count: int = 1) -> Iterator[tuple[FiniteProductSpace, list[MatrixField]]]:
    """Per trial: a fresh random space and ``count`` random fields on it.

    Parameters read from the context: trials, n, max_size, sizes, d.
    """
    rng = ctx.rng()
    trials = int(ctx.get("trials", 100))
    n = int(ctx.get("n", 3))
    max_size = int(ctx.get("max_size", 3))
    sizes = ctx.get("sizes", None)
    d = int(ctx.get("d", 2))
    for _ in range(trials):
        space = random_space(rng, n, max_size, sizes)
        yield space, [MatrixField.random(space, d, rng) for _ in range(count)]


def field_witness(space: FiniteProductSpace, state: Sequence[int], **matrices: np.ndarray) -> Dict[str, Any]:
    out: Dict[str, Any] = {"space": space.to_literal(), "state": list(state)}
    for key, m in matrices.items():
        out[key] = matrix_literal(np.asarray(m)[tuple(state)])
    return out
