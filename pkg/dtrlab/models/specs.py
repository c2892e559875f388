"""
Vocabularies and static descriptors: surrogate kinds, policy classes, estimation methods.
"""
try:
    from enum import StrEnum
except ImportError:  # Python < 3.11
    from enum import Enum

    class StrEnum(str, Enum):
        __str__ = str.__str__
        __format__ = str.__format__

from pydantic import BaseModel, ConfigDict


class SurrogateKind(StrEnum):
    """
    Surrogate families selectable by config key.
    The first four are Condition-2 sigmoids; the rest are comparators.
    """
    RATIONAL_SIGMOID = "rational"          # 1 + x/(1+|x|)
    ARCTAN_SIGMOID = "arctan"              # 1 + (2/pi) arctan(pi x / 2)
    ALGEBRAIC_SIGMOID = "algebraic"        # 1 + x/sqrt(1+x^2)
    LOGISTIC_SIGMOID = "logistic"          # 2/(1+exp(-x))
    HINGE_BIVARIATE = "hinge"              # min(x-1, y-1, 0)
    EXPONENTIAL_CONCAVE = "exp-concave"    # -exp(-x-y)
    LOGISTIC_CONCAVE = "logistic-concave"  # -log(1+exp(-x)+exp(-y))


SIGMOID_KINDS = frozenset({
    SurrogateKind.RATIONAL_SIGMOID,
    SurrogateKind.ARCTAN_SIGMOID,
    SurrogateKind.ALGEBRAIC_SIGMOID,
    SurrogateKind.LOGISTIC_SIGMOID,
})


class TypeClass(StrEnum):
    """Derivative-envelope class of a sigmoid surrogate."""
    A = "A"                                 # polynomial decay B(1+|x|)^-kappa
    B = "B"                                 # exponential decay B exp(-kappa|x|)
    NOT_CONDITION_TWO = "not-condition-two"


class SurrogateSpec(BaseModel):
    """
    A univariate phi (or a bivariate comparator) with its envelope constants.

    input_scale rescales the argument before phi is applied; it is 1 for every
    canonical kind and 2 for the 1+tanh alias of the logistic kind.
    """
    model_config = ConfigDict(frozen=True)

    key: str
    kind: SurrogateKind
    c_phi: float
    type_class: TypeClass
    b_phi: float
    kappa: float
    input_scale: float = 1.0

    @property
    def is_sigmoid(self) -> bool:
        return self.kind in SIGMOID_KINDS


class PolicyClass(StrEnum):
    """Score-function families for f1, f2."""
    LINEAR = "linear"
    SPLINE = "spline"
    WAVELET = "wavelet"
    MLP = "mlp"


class QForm(StrEnum):
    """Q-function families for the regression baseline."""
    LINEAR = "linear"
    MLP = "mlp"


class EstimationMethod(StrEnum):
    IPW = "ipw"
    MONTE_CARLO = "mc"
    DOUBLY_ROBUST = "dr"
