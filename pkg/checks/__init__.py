"""Verification checks. Importing this package fills the catalog."""

from checks import continuous, finite, monte_carlo, trace  # noqa: F401  (registration)
from checks.registry import CHECKS, CheckContext, run_check, validate_check_names

__all__ = ["CHECKS", "CheckContext", "run_check", "validate_check_names"]
