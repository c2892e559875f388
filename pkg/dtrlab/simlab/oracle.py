"""
Known optimal regimes of the simulation settings.

Each oracle holds the true stage-wise Q-functions on the raw reward scale:
    q2(H2, a) = E[Y2 | H2, A2 = a]
    q1(H1, a) = E[Y1 + max_a2 q2(H2, a2) | H1, A1 = a]
and decides d_t = +1 iff q_t(+1) >= q_t(-1) (within TIE_TOLERANCE).

The expectations in q1 are exact: finite enumeration (settings 1, 3, 5 over
binary O2), closed forms (settings 2, 4, the folded-normal mean in setting 3)
and Gauss-Hermite quadrature over the stage-1 noise (setting 5).
"""
from dataclasses import dataclass
from itertools import product
from typing import Callable

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy.special import expit
from scipy.stats import norm

from dtrlab.errors import ConfigError
from dtrlab.simlab.settings import (
    DIMENSIONS, S5_BETA, S5_C1, S5_C2_TILDE, S5_D1, S5_D2,
)

TIE_TOLERANCE = 1e-9
QUADRATURE_NODES = 40

QFunction = Callable[[np.ndarray, float], np.ndarray]


@dataclass(frozen=True, eq=False)
class OracleQ:
    """Oracle Q-function shaped like a fitted model: predict(H, A) on the data's offset scale."""
    oracle: "OracleRule"
    stage: int

    def predict(self, H: np.ndarray, A) -> np.ndarray:
        H = np.atleast_2d(np.asarray(H, dtype=np.float64))
        A = np.broadcast_to(np.asarray(A, dtype=np.float64), (H.shape[0],))
        if self.stage == 2:
            values = np.where(A > 0, self.oracle.q2(H, 1.0), self.oracle.q2(H, -1.0))
            return values + self.oracle.offset
        values = np.where(A > 0, self.oracle.q1(H, 1.0), self.oracle.q1(H, -1.0))
        return values + 2.0 * self.oracle.offset


@dataclass(frozen=True, eq=False)
class OracleRule:
    """
    Optimal regime of one setting. Stage-2 histories arrive on the offset scale
    (Y1 shifted by offset) and are unshifted before q2 is evaluated.
    """
    setting: int
    stage_one: QFunction
    stage_two: QFunction
    offset: float = 0.0

    @property
    def _y1_column(self) -> int:
        return DIMENSIONS[self.setting][0]

    def _raw(self, H2: np.ndarray) -> np.ndarray:
        H2 = np.array(np.atleast_2d(H2), dtype=np.float64)
        H2[:, self._y1_column] -= self.offset
        return H2

    def q1(self, H1: np.ndarray, a: float) -> np.ndarray:
        return self.stage_one(np.atleast_2d(np.asarray(H1, dtype=np.float64)), float(a))

    def q2(self, H2: np.ndarray, a: float) -> np.ndarray:
        return self.stage_two(self._raw(H2), float(a))

    def d1(self, H1: np.ndarray) -> np.ndarray:
        return np.where(self.q1(H1, 1.0) - self.q1(H1, -1.0) >= -TIE_TOLERANCE, 1.0, -1.0)

    def d2(self, H2: np.ndarray) -> np.ndarray:
        return np.where(self.q2(H2, 1.0) - self.q2(H2, -1.0) >= -TIE_TOLERANCE, 1.0, -1.0)

    def q_models(self) -> tuple[OracleQ, OracleQ]:
        """(Q1, Q2) for doubly robust evaluation."""
        return OracleQ(self, 1), OracleQ(self, 2)


# setting 1 ------------------------------------------------------------------

def _s1_q2(H2: np.ndarray, a: float) -> np.ndarray:
    x11, x12, y1, x21 = H2[:, 0], H2[:, 1], H2[:, 3], H2[:, 4]
    return expit((0.5 * x11 + x12 - 0.2 * x21 + y1) * a)


def _s1_q1(H1: np.ndarray, a: float) -> np.ndarray:
    x11, x12, x13 = H1[:, 0], H1[:, 1], H1[:, 2]
    p_y1 = expit((x13 - 0.5 * x12) * a)
    p_x21 = norm.cdf(-1.75 * x12 * a)
    total = p_y1.copy()
    for y1, x21 in product((0.0, 1.0), repeat=2):
        prob = np.where(y1, p_y1, 1.0 - p_y1) * np.where(x21, p_x21, 1.0 - p_x21)
        m = 0.5 * x11 + x12 - 0.2 * x21 + y1
        total += prob * np.maximum(expit(m), expit(-m))
    return total


# setting 2 ------------------------------------------------------------------

def _s2_q2(H2: np.ndarray, a: float) -> np.ndarray:
    x1, x2 = H2[:, 0], H2[:, 2]
    return a * (2.0 * (x2 > x1 ** 2) - 1.0)


def _s2_q1(H1: np.ndarray, a: float) -> np.ndarray:
    return a * (2.0 * (np.abs(H1[:, 0]) < 1) - 1.0) + 1.0


# setting 3 ------------------------------------------------------------------

S3_NOISE_SD = 0.5


def _folded_normal_mean(m: np.ndarray, s: float) -> np.ndarray:
    """E|N(m, s^2)|."""
    return s * np.sqrt(2.0 / np.pi) * np.exp(-m ** 2 / (2.0 * s ** 2)) + m * (1.0 - 2.0 * norm.cdf(-m / s))


def _s3_q2(H2: np.ndarray, a: float) -> np.ndarray:
    y1, x21, x22, a1 = H2[:, 3], H2[:, 4], H2[:, 5], H2[:, 6]
    return 10.0 + a * (-0.5 + 0.5 * y1 + 0.5 * a1 + 0.5 * x21 - 0.5 * x22)


def _s3_q1(H1: np.ndarray, a: float) -> np.ndarray:
    x11, x12, x13 = H1[:, 0], H1[:, 1], H1[:, 2]
    mean_y1 = 10.0 + a * (1.0 + 1.5 * x13)
    p21 = norm.cdf(1.25 * x11 * a)
    p22 = norm.cdf(-1.75 * x12 * a)
    stage_two = np.zeros_like(mean_y1)
    for x21, x22 in product((0.0, 1.0), repeat=2):
        prob = np.where(x21, p21, 1.0 - p21) * np.where(x22, p22, 1.0 - p22)
        # the contrast is linear in Y1 with slope 0.5, so its noise sd is 0.5
        m = -0.5 + 0.5 * mean_y1 + 0.5 * a + 0.5 * x21 - 0.5 * x22
        stage_two += prob * _folded_normal_mean(m, S3_NOISE_SD)
    return mean_y1 + 10.0 + stage_two


# setting 4 ------------------------------------------------------------------

def _s4_gain(x13: np.ndarray) -> np.ndarray:
    return 1.0 + 1.5 * (x13 > 0)


def _s4_q2(H2: np.ndarray, a: float) -> np.ndarray:
    x12, x13, x21, a1 = H2[:, 1], H2[:, 2], H2[:, 4], H2[:, 5]
    boundary = np.sign(0.01 * x12 ** 2 - 0.05 * x13 ** 2)
    return 2.0 + a1 * _s4_gain(x13) + 10.0 * a * boundary + x21


def _s4_q1(H1: np.ndarray, a: float) -> np.ndarray:
    x12, x13 = H1[:, 1], H1[:, 2]
    boundary = np.sign(0.01 * x12 ** 2 - 0.05 * x13 ** 2)
    return 4.0 + 2.0 * a * _s4_gain(x13) + 10.0 * np.abs(boundary)


# setting 5 ------------------------------------------------------------------

def _s5_z_prob(x1: np.ndarray, x2: np.ndarray, z21: float, z22: float) -> np.ndarray:
    p21 = norm.cdf(1.25 * x1)
    p22 = norm.cdf(-1.75 * x2)
    return np.where(z21, p21, 1.0 - p21) * np.where(z22, p22, 1.0 - p22)


def _s5_q2(H2: np.ndarray, a: float) -> np.ndarray:
    x, y1, z, a1 = H2[:, :6], H2[:, 6], H2[:, 7:9], H2[:, 9]
    ones = np.ones(H2.shape[0])
    main = y1 + S5_BETA + 0.25 * x[:, 0] - x[:, 1] - 0.5 * x[:, 2]
    h21 = np.column_stack([ones, x[:, :4], a1, z])
    wobble = (z @ S5_C2_TILDE) * y1 * np.sin(np.sum(z ** 2, axis=1) / (np.abs(y1) + 1.0))
    return main + a * (h21 @ S5_D2) + wobble


def _s5_q1(H1: np.ndarray, a: float) -> np.ndarray:
    x = H1
    n = x.shape[0]
    ones = np.ones(n)
    mu1 = np.column_stack([ones, x]) @ S5_C1 + a * (np.column_stack([ones, x[:, 1:]]) @ S5_D1)
    nodes, weights = hermegauss(QUADRATURE_NODES)
    weights = weights / np.sqrt(2.0 * np.pi)
    y1_nodes = mu1[:, None] + nodes[None, :]
    total = 2.0 * mu1 + S5_BETA + 0.25 * x[:, 0] - x[:, 1] - 0.5 * x[:, 2]
    for z21, z22 in product((0.0, 1.0), repeat=2):
        z = np.array([z21, z22])
        h21 = np.column_stack([ones, x[:, :4], np.full(n, a), np.full(n, z21), np.full(n, z22)])
        wobble = (z @ S5_C2_TILDE) * (y1_nodes * np.sin(z @ z / (np.abs(y1_nodes) + 1.0))) @ weights
        total += _s5_z_prob(x[:, 0], x[:, 1], z21, z22) * (np.abs(h21 @ S5_D2) + wobble)
    return total


_Q_FUNCTIONS: dict[int, tuple[QFunction, QFunction]] = {
    1: (_s1_q1, _s1_q2),
    2: (_s2_q1, _s2_q2),
    3: (_s3_q1, _s3_q2),
    4: (_s4_q1, _s4_q2),
    5: (_s5_q1, _s5_q2),
}


def oracle_rule(setting: int, offset: float = 0.0) -> OracleRule:
    """Optimal regime of a setting, reading stage-2 histories built with the given offset."""
    try:
        stage_one, stage_two = _Q_FUNCTIONS[int(setting)]
    except KeyError:
        raise ConfigError(f"no oracle for setting {setting}") from None
    return OracleRule(setting=int(setting), stage_one=stage_one, stage_two=stage_two, offset=offset)
