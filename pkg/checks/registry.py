"""Catalog of named checks."""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterable, Optional

import numpy as np

from errors import ConfigError
from models import VerificationReport

logger = logging.getLogger(__name__)


@dataclass
class CheckContext:
    """What a registered check receives: its parameters, seed and optional model."""

    name: str
    seed: int
    params: Dict[str, Any] = field(default_factory=dict)
    model: Optional[Any] = None
    negative_control: Optional[bool] = None
    spawn_key: tuple[int, ...] = ()

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=self.spawn_key))

    def get(self, key: str, default: Any) -> Any:
        return self.params.get(key, default)


@dataclass(frozen=True)
class CheckEntry:
    name: str
    anchor: str
    description: str
    family: str
    func: Callable[[CheckContext], VerificationReport]
    negative_control: bool = False


CHECKS: Dict[str, CheckEntry] = {}


def check(name: str, *, anchor: str, description: str, family: str, negative_control: bool = False):
    """Register a check runner under ``name``."""

    def register(func: Callable[[CheckContext], VerificationReport]):
        if name in CHECKS:
            raise ValueError(f"check {name!r} registered twice")
        CHECKS[name] = CheckEntry(name, anchor, description, family, func, negative_control)
        return func

    return register


def validate_check_names(names: Iterable[str]) -> None:
    unknown = [n for n in names if n not in CHECKS]
    if unknown:
        raise ConfigError(f"Unknown check names: {', '.join(unknown)}")


def run_check(ctx: CheckContext) -> VerificationReport:
    entry = CHECKS[ctx.name]
    if ctx.negative_control is None:
        ctx.negative_control = entry.negative_control
    report = entry.func(ctx)
    if entry.negative_control and report.passed:
        logger.warning("Negative control %s found no violation (margin %.3g)", ctx.name, report.margin)
    elif report.status.value == "pass-marginal":
        logger.warning("Check %s passed marginally (margin %.3g)", ctx.name, report.margin)
    else:
        logger.info("Check %s: %s (margin %.3g, %d trials)", ctx.name, report.status.value, report.margin, report.trials)
    return report
