"""
Surrogate family: sigmoid phi's with C_phi = 2, the product psi = phi(x)phi(y),
three comparator psi's, analytic derivatives and grid checkers.

All evaluators are vectorized: scalars in give numpy scalars out, arrays in give arrays.
"""
import logging

import numpy as np
from scipy.special import expit

from dtrlab.errors import UnsupportedSurrogateError
from dtrlab.models.results import CheckReport
from dtrlab.models.specs import SurrogateKind, SurrogateSpec, TypeClass

logger = logging.getLogger(__name__)

SYMMETRY_TOLERANCE = 1e-12
ENVELOPE_SLACK = 1e-12
TAIL_POINT = 1e3
TAIL_TOLERANCE = 0.05

_NOT_C2 = {"c_phi": 0.0, "type_class": TypeClass.NOT_CONDITION_TWO, "b_phi": 0.0, "kappa": 0.0}

SURROGATES: dict[str, SurrogateSpec] = {
    "rational": SurrogateSpec(
        key="rational", kind=SurrogateKind.RATIONAL_SIGMOID, c_phi=2.0, type_class=TypeClass.A, b_phi=1.0, kappa=2.0
    ),
    "arctan": SurrogateSpec(
        key="arctan", kind=SurrogateKind.ARCTAN_SIGMOID, c_phi=2.0, type_class=TypeClass.A, b_phi=2.0, kappa=2.0
    ),
    "algebraic": SurrogateSpec(
        key="algebraic", kind=SurrogateKind.ALGEBRAIC_SIGMOID, c_phi=2.0, type_class=TypeClass.A,
        b_phi=2.0 ** 1.5, kappa=3.0,
    ),
    "logistic": SurrogateSpec(
        key="logistic", kind=SurrogateKind.LOGISTIC_SIGMOID, c_phi=2.0, type_class=TypeClass.B, b_phi=2.0, kappa=1.0
    ),
    # 1 + tanh(x) == 2 / (1 + exp(-2x))
    "tanh": SurrogateSpec(
        key="tanh", kind=SurrogateKind.LOGISTIC_SIGMOID, c_phi=2.0, type_class=TypeClass.B, b_phi=2.0, kappa=1.0,
        input_scale=2.0,
    ),
    "hinge": SurrogateSpec(key="hinge", kind=SurrogateKind.HINGE_BIVARIATE, **_NOT_C2),
    "exp-concave": SurrogateSpec(key="exp-concave", kind=SurrogateKind.EXPONENTIAL_CONCAVE, **_NOT_C2),
    "logistic-concave": SurrogateSpec(key="logistic-concave", kind=SurrogateKind.LOGISTIC_CONCAVE, **_NOT_C2),
}

SIGMOID_KEYS = ("rational", "arctan", "algebraic", "logistic")


def get_surrogate(key: str) -> SurrogateSpec:
    try:
        return SURROGATES[key]
    except KeyError:
        raise UnsupportedSurrogateError(
            f"unknown surrogate {key!r}; choose one of {sorted(SURROGATES)}"
        ) from None


def _require_sigmoid(s: SurrogateSpec, operation: str) -> None:
    if not s.is_sigmoid:
        raise UnsupportedSurrogateError(f"{operation} is only defined for sigmoid surrogates, not {s.key!r}")


def phi_eval(s: SurrogateSpec, x):
    _require_sigmoid(s, "phi_eval")
    x = np.asarray(x, dtype=np.float64) * s.input_scale
    match s.kind:
        case SurrogateKind.RATIONAL_SIGMOID:
            return 1.0 + x / (1.0 + np.abs(x))
        case SurrogateKind.ARCTAN_SIGMOID:
            return 1.0 + (2.0 / np.pi) * np.arctan(np.pi * x / 2.0)
        case SurrogateKind.ALGEBRAIC_SIGMOID:
            return 1.0 + x / np.sqrt(1.0 + x * x)
        case SurrogateKind.LOGISTIC_SIGMOID:
            return 2.0 * expit(x)


def phi_grad(s: SurrogateSpec, x):
    _require_sigmoid(s, "phi_grad")
    x = np.asarray(x, dtype=np.float64) * s.input_scale
    match s.kind:
        case SurrogateKind.RATIONAL_SIGMOID:
            grad = 1.0 / (1.0 + np.abs(x)) ** 2
        case SurrogateKind.ARCTAN_SIGMOID:
            grad = 1.0 / (1.0 + (np.pi * x / 2.0) ** 2)
        case SurrogateKind.ALGEBRAIC_SIGMOID:
            grad = (1.0 + x * x) ** -1.5
        case SurrogateKind.LOGISTIC_SIGMOID:
            e = expit(x)
            grad = 2.0 * e * (1.0 - e)
    return s.input_scale * grad


def psi_eval(s: SurrogateSpec, x, y):
    """psi(x, y): phi(x)phi(y) for sigmoid kinds, the comparator formula otherwise."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    match s.kind:
        case SurrogateKind.HINGE_BIVARIATE:
            return np.minimum(np.minimum(x - 1.0, y - 1.0), 0.0)
        case SurrogateKind.EXPONENTIAL_CONCAVE:
            return -np.exp(-x - y)
        case SurrogateKind.LOGISTIC_CONCAVE:
            return -np.logaddexp(np.logaddexp(0.0, -x), -y)
    return phi_eval(s, x) * phi_eval(s, y)


def psi_grad(s: SurrogateSpec, x, y, allow_inconsistent: bool = False):
    """
    Partial derivatives (d psi/dx, d psi/dy).

    Comparators are differentiated only when allow_inconsistent is set; the hinge
    then returns a subgradient ((1,0) or (0,1) on its strictly negative pieces, else 0).

    Raises:
        UnsupportedSurrogateError: comparator kind without allow_inconsistent.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if s.is_sigmoid:
        return phi_grad(s, x) * phi_eval(s, y), phi_eval(s, x) * phi_grad(s, y)
    if not allow_inconsistent:
        raise UnsupportedSurrogateError(
            f"psi_grad on {s.key!r} needs allow_inconsistent=True (not a Condition-2 surrogate)"
        )
    match s.kind:
        case SurrogateKind.EXPONENTIAL_CONCAVE:
            g = np.exp(-x - y)
            return g, g.copy()
        case SurrogateKind.LOGISTIC_CONCAVE:
            # d/dx -log(1+e^-x+e^-y) = e^-x / (1+e^-x+e^-y)
            log_norm = np.logaddexp(np.logaddexp(0.0, -x), -y)
            return np.exp(-x - log_norm), np.exp(-y - log_norm)
        case SurrogateKind.HINGE_BIVARIATE:
            x_active = (x - 1.0 < 0.0) & (x <= y)
            y_active = (y - 1.0 < 0.0) & (y < x)
            return x_active.astype(np.float64), y_active.astype(np.float64)


def check_condition_two(s: SurrogateSpec, grid) -> CheckReport:
    """
    Grid evidence for Condition 2: positivity, phi(x)+phi(-x)=C_phi, strict increase, tail limits.

    Comparator kinds are rejected without evaluation.
    """
    if not s.is_sigmoid:
        return CheckReport(
            surrogate=s.key, check="condition-two", passed=False, rejected=True,
            failures=[f"{s.key} is flagged {s.type_class}; not checked"],
        )
    grid = np.sort(np.asarray(grid, dtype=np.float64))
    failures: list[str] = []
    values = phi_eval(s, grid)

    for x in grid[values <= 0]:
        failures.append(f"phi({x:g}) <= 0")
    gap = np.abs(values + phi_eval(s, -grid) - s.c_phi)
    for x, g in zip(grid[gap > SYMMETRY_TOLERANCE], gap[gap > SYMMETRY_TOLERANCE]):
        failures.append(f"|phi({x:g}) + phi({-x:g}) - C| = {g:.3e}")
    steps = np.diff(values)
    for i in np.flatnonzero(steps <= 0):
        failures.append(f"phi not strictly increasing on [{grid[i]:g}, {grid[i + 1]:g}]")
    upper = float(phi_eval(s, TAIL_POINT))
    lower = float(phi_eval(s, -TAIL_POINT))
    if abs(upper - s.c_phi) > TAIL_TOLERANCE:
        failures.append(f"phi({TAIL_POINT:g}) = {upper:.4f} not within {TAIL_TOLERANCE} of {s.c_phi}")
    if abs(lower) > TAIL_TOLERANCE:
        failures.append(f"phi({-TAIL_POINT:g}) = {lower:.4f} not within {TAIL_TOLERANCE} of 0")

    if failures:
        logger.debug(f"Condition-2 check failed for {s.key}: {len(failures)} failures")
    return CheckReport(
        surrogate=s.key, check="condition-two", passed=not failures, n_checked=int(grid.size), failures=failures
    )


def envelope(s: SurrogateSpec, x):
    """Derivative envelope B(1+|x|)^-kappa (type A) or B exp(-kappa|x|) (type B)."""
    x = np.abs(np.asarray(x, dtype=np.float64))
    if s.type_class == TypeClass.A:
        return s.b_phi * (1.0 + x) ** -s.kappa
    return s.b_phi * np.exp(-s.kappa * x)


def check_type_bounds(s: SurrogateSpec, grid) -> CheckReport:
    """
    |phi'(x)| <= envelope(x) + slack at every nonzero grid point.

    The bound is tight for the rational kind, so the comparison is non-strict.
    Zero is outside the definition and is skipped.
    """
    if not s.is_sigmoid:
        return CheckReport(
            surrogate=s.key, check="type-bounds", passed=False, rejected=True,
            failures=[f"{s.key} has no envelope constants"],
        )
    grid = np.asarray(grid, dtype=np.float64)
    grid = grid[grid != 0.0]
    slope = np.abs(phi_grad(s, grid))
    bound = envelope(s, grid)
    bad = slope > bound + ENVELOPE_SLACK
    failures = [
        f"|phi'({x:g})| = {g:.6g} > {b:.6g}" for x, g, b in zip(grid[bad], slope[bad], bound[bad])
    ]
    return CheckReport(
        surrogate=s.key, check="type-bounds", passed=not failures, n_checked=int(grid.size), failures=failures
    )


def calibration_gap(s: SurrogateSpec, eta: float, grid) -> float:
    """
    sup over grid of eta*phi(x) + (1-eta)*phi(-x), minus C_phi*max(eta, 1-eta).

    Zero in the limit of an unbounded grid for every Condition-2 phi; slightly
    negative on a finite grid.
    """
    grid = np.asarray(grid, dtype=np.float64)
    risk = eta * phi_eval(s, grid) + (1.0 - eta) * phi_eval(s, -grid)
    return float(np.max(risk) - s.c_phi * max(eta, 1.0 - eta))
