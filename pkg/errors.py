"""Exception hierarchy for the matrix concentration lab."""


class LabError(Exception):
    """Base class for every error raised by the lab."""

    exit_code = 2


class ConfigError(LabError):
    """Invalid experiment config or environment setting."""


class DomainError(LabError, ValueError):
    """An input lies outside the domain of the requested operation."""


class DimensionMismatch(DomainError):
    """Two matrix-valued operands do not share a dimension or space."""


class ResourceError(LabError):
    """A state-space or factor cap would be exceeded."""


class NumericError(LabError):
    """A numerical routine failed to converge or produced non-finite values."""

    exit_code = 3

    def __init__(self, message: str, **diagnostics: float):
        self.diagnostics = diagnostics
        if diagnostics:
            details = ", ".join(f"{k}={v:.6g}" for k, v in diagnostics.items())
            message = f"{message} ({details})"
        super().__init__(message)
