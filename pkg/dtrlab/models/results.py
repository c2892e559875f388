"""
Result and report models returned by estimators, checkers and the consistency lab.
"""
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator

from dtrlab.models.specs import EstimationMethod


class ValueEstimate(BaseModel):
    """
    Point estimate of a regime's value with its standard error.

    value is on the offset scale of the data it was computed from; offset is that
    per-stage shift, so raw_value removes it from both stage rewards.
    Monte Carlo values are already raw and carry offset 0.
    """
    value: float
    sd: float = Field(ge=0)
    method: EstimationMethod
    n_used: int = Field(ge=1)
    offset: float = 0.0

    @property
    def raw_value(self) -> float:
        return self.value - 2.0 * self.offset

    def to_report(self) -> dict:
        """Raw-scale summary for CLI and HTTP output."""
        return {"value": self.raw_value, "sd": self.sd, "method": str(self.method), "n": self.n_used, "offset": self.offset}


class TauVector(BaseModel):
    """(T(+1,+1), T(+1,-1), T(-1,+1), T(-1,-1)), all strictly positive."""
    model_config = ConfigDict(frozen=True)

    tau: tuple[float, float, float, float]

    @field_validator("tau")
    @classmethod
    def _strictly_positive(cls, value):
        if any(not t > 0 for t in value):
            raise ValueError(f"tau entries must be strictly positive, got {value}")
        return value

    @classmethod
    def parse(cls, text: str) -> "TauVector":
        """Build from 'a,b,c,d'."""
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != 4:
            raise ValueError(f"tau needs exactly 4 comma-separated values, got {text!r}")
        return cls(tau=tuple(float(p) for p in parts))


class PsiMaximizer(BaseModel):
    x: float
    y: float
    z: float
    value: float


class TauRule(BaseModel):
    """Optimal decisions implied by a tau table."""
    d1: int
    d2_plus: int   # d2*(., a1=+1)
    d2_minus: int  # d2*(., a1=-1)


class ExactValues(BaseModel):
    """Exact value, optimal value, surrogate value and optimal surrogate value of a discrete law."""
    value: float
    optimal_value: float
    surrogate_value: float
    optimal_surrogate_value: float

    @property
    def regret(self) -> float:
        return self.optimal_value - self.value

    @property
    def surrogate_regret(self) -> float:
        return self.optimal_surrogate_value - self.surrogate_value


class CheckReport(BaseModel):
    """Outcome of a grid check; failures lists human-readable reasons."""
    surrogate: str
    check: str
    passed: bool
    rejected: bool = False
    n_checked: int = 0
    failures: list[str] = []


class SurrogateSelection(BaseModel):
    """Cross-validated choice among sigmoid surrogates; scores are mean held-out IPW values."""
    best: str
    scores: dict[str, float]
    folds: int


class SweepReport(BaseModel):
    """Outcome of a randomized property sweep; examples holds the first few counterexamples."""
    check: str
    trials: int
    violations: int
    examples: list[str] = []

    @property
    def passed(self) -> bool:
        return self.violations == 0


class ConsistencyReport(BaseModel):
    """Psi-transform maximizer at one tau, the tau-optimal rule, and the verdict comparing them."""
    surrogate: str
    tau: tuple[float, float, float, float]
    x: float
    y: float
    z: float
    value: float
    sign_x: int
    sign_y: int
    sign_z: int
    d1_star: int
    d2_star_plus: int
    d2_star_minus: int
    verdict: Literal["consistent", "inconsistent"]
    hinge_x_nonpositive: bool | None = None
