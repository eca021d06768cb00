from enum import Enum
from typing import Any, Dict, List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

FORMAT_VERSION = 1
SEED_LIMIT = 2**64


class LabModel(BaseModel):
    model_config = ConfigDict(
        populate_by_name=True,
        from_attributes=True,
        extra="forbid",
    )


class CheckStatus(str, Enum):
    PASS = "pass"
    PASS_MARGINAL = "pass-marginal"
    FAIL = "fail"


class ModelKind(str, Enum):
    FINITE_PRODUCT = "finite-product"
    GAUSSIAN_SERIES = "gaussian-series"
    LANGEVIN = "langevin"
    SPHERE_LINEAR = "sphere-linear"
    SPHERE_QUADRATIC = "sphere-quadratic"
    SO_CONJUGATION = "so-conjugation"


class FunctionKind(str, Enum):
    MODEL = "model"  # the model's own coefficient map
    CONSTANT = "constant"
    RANDOM = "random"
    FIELD = "field"
    RADEMACHER_SERIES = "rademacher-series"


# ══════════════════════════════════════════════════════════════════════════════
# Literals
# ══════════════════════════════════════════════════════════════════════════════

class MatrixLiteral(LabModel):
    """{"d", "re", "im"?}: a Hermitian matrix in JSON."""

    d: int = Field(ge=1)
    re: List[List[float]]
    im: Optional[List[List[float]]] = None

    @model_validator(mode="after")
    def check_hermitian(self):
        a = self.to_array()
        if a.shape != (self.d, self.d):
            raise ValueError(f"matrix literal arrays must be {self.d}x{self.d}")
        if not np.all(np.isfinite(a)):
            raise ValueError("matrix literal has non-finite entries")
        scale = float(np.max(np.abs(a))) if a.size else 0.0
        if float(np.max(np.abs(a - a.conj().T))) > 1e-12 * scale:
            raise ValueError("matrix literal is not Hermitian")
        return self

    def to_array(self) -> np.ndarray:
        re = np.asarray(self.re, dtype=float)
        im = np.zeros_like(re) if self.im is None else np.asarray(self.im, dtype=float)
        if re.shape != im.shape:
            raise ValueError(f"re and im shapes differ: {re.shape} vs {im.shape}")
        return re + 1j * im

    @classmethod
    def from_array(cls, a) -> "MatrixLiteral":
        a = np.asarray(a, dtype=np.complex128)
        im = a.imag.tolist() if np.any(a.imag != 0.0) else None
        return cls(d=a.shape[-1], re=a.real.tolist(), im=im)


class SpaceLiteral(LabModel):
    factors: List[List[float]] = Field(min_length=1)


class FieldLiteral(LabModel):
    """A finite field in mixed-radix state order."""

    space: SpaceLiteral
    d: int = Field(ge=1)
    values: List[MatrixLiteral]

    @model_validator(mode="after")
    def check_counts(self):
        count = int(np.prod([len(f) for f in self.space.factors]))
        if len(self.values) != count:
            raise ValueError(f"field needs {count} values, got {len(self.values)}")
        if any(v.d != self.d for v in self.values):
            raise ValueError(f"every field value must have d={self.d}")
        return self


# ══════════════════════════════════════════════════════════════════════════════
# Experiment configuration
# ══════════════════════════════════════════════════════════════════════════════

class ModelSpec(LabModel):
    kind: ModelKind
    n: Optional[int] = Field(default=None, ge=1)
    d: Optional[int] = Field(default=None, ge=1)
    eta: float = Field(default=1.0, gt=0.0)
    kappa: float = Field(default=0.0, ge=0.0)
    coefficients: Optional[List[MatrixLiteral]] = None
    factors: Optional[List[List[float]]] = None
    sizes: Optional[List[int]] = None
    step: float = Field(default=0.01, gt=0.0)
    burn_in: Optional[int] = Field(default=None, ge=0)
    thin: Optional[int] = Field(default=None, ge=1)

    @model_validator(mode="after")
    def check_shape(self):
        if self.kind == ModelKind.FINITE_PRODUCT:
            if self.factors is None and self.sizes is None:
                raise ValueError("finite-product models need 'factors' or 'sizes'")
            return self
        if not self.coefficients:
            raise ValueError(f"{self.kind.value} models need 'coefficients'")
        dims = {c.d for c in self.coefficients}
        if len(dims) != 1:
            raise ValueError(f"coefficients disagree on dimension: {sorted(dims)}")
        if self.kind in (ModelKind.SPHERE_LINEAR, ModelKind.SPHERE_QUADRATIC) and len(self.coefficients) < 3:
            raise ValueError("sphere models need n >= 2, i.e. at least 3 coefficients")
        return self


class FunctionSpec(LabModel):
    kind: FunctionKind = FunctionKind.MODEL
    coefficients: Optional[List[MatrixLiteral]] = None
    matrix: Optional[MatrixLiteral] = None
    field: Optional[FieldLiteral] = None
    d: int = Field(default=2, ge=1)

    @model_validator(mode="after")
    def check_payload(self):
        required = {
            FunctionKind.CONSTANT: "matrix",
            FunctionKind.FIELD: "field",
            FunctionKind.RADEMACHER_SERIES: "coefficients",
        }.get(self.kind)
        if required and getattr(self, required) is None:
            raise ValueError(f"function kind {self.kind.value!r} needs {required!r}")
        return self


class CheckSpec(LabModel):
    name: str
    params: Dict[str, Any] = Field(default_factory=dict)
    gating: Optional[bool] = None  # overrides the catalog's negative-control flag


class TailExperimentSpec(LabModel):
    samples: int = Field(default=100_000, ge=2)
    t_grid: Optional[List[float]] = None
    points: int = Field(default=20, ge=1)
    bound: Literal["subgaussian", "exponential", "submanifold"] = "subgaussian"
    branch: Literal["max", "min"] = "max"
    c: Optional[float] = Field(default=None, gt=0.0)
    v: Optional[float] = Field(default=None, ge=0.0)

    @field_validator("t_grid", mode="before")
    @classmethod
    def sort_grid(cls, v):
        if v is None:
            return None
        v = [float(t) for t in v]
        if any(t < 0 for t in v):
            raise ValueError("t_grid values must be >= 0")
        return sorted(v)


class OutputSpec(LabModel):
    path: Optional[str] = None
    format: Literal["json", "csv"] = "json"


class ExperimentConfig(LabModel):
    model: Optional[ModelSpec] = None
    function: FunctionSpec = Field(default_factory=FunctionSpec)
    checks: List[CheckSpec] = Field(default_factory=list)
    experiment: Optional[TailExperimentSpec] = None
    seed: int = Field(ge=0, lt=SEED_LIMIT)
    output: OutputSpec = Field(default_factory=OutputSpec)

    @field_validator("checks")
    @classmethod
    def known_checks(cls, v):
        from checks.registry import CHECKS

        unknown = [c.name for c in v if c.name not in CHECKS]
        if unknown:
            raise ValueError(f"unknown check names: {', '.join(unknown)}")
        return v


# ══════════════════════════════════════════════════════════════════════════════
# Results
# ══════════════════════════════════════════════════════════════════════════════

class MCEstimate(LabModel):
    value: float
    stderr: float = Field(ge=0.0)
    samples: int = Field(ge=2)
    seed: Optional[int] = None


class VerificationReport(LabModel):
    v: int = FORMAT_VERSION
    name: str
    status: CheckStatus
    margin: float
    tolerance: float = Field(ge=0.0)
    trials: int = Field(ge=0)
    seed: int
    witness: Optional[Dict[str, Any]] = None
    elapsed_s: float = 0.0
    negative_control: bool = False

    @property
    def passed(self) -> bool:
        return self.status != CheckStatus.FAIL

    @property
    def gating(self) -> bool:
        return not self.negative_control


class TailRow(LabModel):
    t: float
    empirical: float
    stderr: float = Field(ge=0.0)
    bound: float
    passed: bool = Field(alias="pass")
    v: int = FORMAT_VERSION
