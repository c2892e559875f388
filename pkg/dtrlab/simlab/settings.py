"""
Data-generating processes for the five simulation settings, and Monte Carlo evaluation.

Every drawer consumes the random stream in a fixed order (covariates, noise,
action uniforms) before any action is chosen. Running a drawer with a forced
regime therefore reuses the exact covariates and noise of the observational
draw with the same seed (common random numbers across regimes).

Setting 5 coefficient mapping (coefficient vectors placed on blocks):
    H10 = (1, X1..X6)                        b1 = (-0.1, 1, -1, 0.1) on (1, X1, X2, X3), rest 0
    H11 = (1, X2..X6)                        c1 on H10, d1 on H11 (lengths match)
    H20 = (Y1, 1, X1..X6, A1, Z21, Z22)      b2 = (0, .5, .1, -1, 1, -.1) on (Y1, 1, X1..X4), rest 0
                                             c2 = (1, beta, .25, -1, -.5) on (Y1, 1, X1, X2, X3), rest 0
    H21 = (1, X1..X4, A1, Z21, Z22)          d2 on H21 (length matches)
    X_2 = (Z21, Z22)                         b2~ = (.25, -.25), c2~ = (.5, -.5)
    beta = 10; the sine denominator uses |Y1| + 1.
"""
import logging
from dataclasses import dataclass
from itertools import product

import numpy as np
from scipy.special import expit
from scipy.stats import norm

from dtrlab.core import smallest_offset, stage_two_history
from dtrlab.errors import ConfigError
from dtrlab.models.configs import SettingSpec
from dtrlab.models.data import DEFAULT_POSITIVITY_FLOOR, Dataset
from dtrlab.models.law import DiscreteDtr, HistoryNode, StageTwoOutcome, Transition
from dtrlab.models.results import ValueEstimate
from dtrlab.models.specs import EstimationMethod
from dtrlab.policy import Regime

logger = logging.getLogger(__name__)

DIMENSIONS = {1: (3, 1), 2: (1, 1), 3: (3, 2), 4: (3, 1), 5: (6, 2)}

S5_SIGMA = 0.9
S5_RHO = 0.1
S5_BETA = 10.0
S5_B1 = np.array([-0.1, 1.0, -1.0, 0.1, 0.0, 0.0, 0.0])
S5_C1 = np.array([0.5, 0.2, -1.0, -1.0, 0.1, -0.1, 0.1])
S5_D1 = np.array([1.0, -2.0, -2.0, -0.1, 0.1, -1.5])
S5_B2 = np.array([0.0, 0.5, 0.1, -1.0, 1.0, -0.1, 0.0, 0.0, 0.0, 0.0, 0.0])
S5_B2_TILDE = np.array([0.25, -0.25])
S5_C2 = np.array([1.0, S5_BETA, 0.25, -1.0, -0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0])
S5_D2 = np.array([1.0, 0.1, -0.1, 0.1, -0.1, 0.25, -1.0, -0.5])
S5_C2_TILDE = np.array([0.5, -0.5])
S5_FLOOR = 1e-5


@dataclass(frozen=True)
class RawDraw:
    """Unshifted columns straight from a drawer."""
    o1: np.ndarray
    a1: np.ndarray
    y1: np.ndarray
    o2: np.ndarray
    a2: np.ndarray
    y2: np.ndarray
    pi1: np.ndarray
    pi2: np.ndarray


def _act(u: np.ndarray, p_plus, forced: np.ndarray | None) -> tuple[np.ndarray, np.ndarray]:
    """Observed action from a uniform (or the forced one) and its propensity."""
    p_plus = np.broadcast_to(np.asarray(p_plus, dtype=np.float64), u.shape)
    a = np.where(u < p_plus, 1.0, -1.0) if forced is None else np.asarray(forced, dtype=np.float64)
    return a, np.where(a > 0, p_plus, 1.0 - p_plus)


def _forced_d1(regime: Regime | None, H1: np.ndarray):
    return None if regime is None else regime.d1(H1)


def _forced_d2(regime: Regime | None, o1, y1, o2, a1):
    if regime is None:
        return None
    return regime.d2(stage_two_history(o1, y1 + regime.offset, o2, a1))


def _setting_one(rng: np.random.Generator, n: int, regime: Regime | None) -> RawDraw:
    x1 = np.where(rng.random((n, 3)) < 0.5, 1.0, -1.0)
    eps1 = rng.standard_normal(n)
    uy1 = rng.random(n)
    uy2 = rng.random(n)
    u1 = rng.random(n)
    u2 = rng.random(n)

    a1, pi1 = _act(u1, 0.5, _forced_d1(regime, x1))
    x21 = (-1.75 * x1[:, 1] * a1 + eps1 > 0).astype(np.float64)
    y1 = (uy1 < expit((x1[:, 2] - 0.5 * x1[:, 1]) * a1)).astype(np.float64)
    o2 = x21[:, None]
    a2, pi2 = _act(u2, 0.5, _forced_d2(regime, x1, y1, o2, a1))
    y2 = (uy2 < expit((0.5 * x1[:, 0] + x1[:, 1] - 0.2 * x21 + y1) * a2)).astype(np.float64)
    return RawDraw(x1, a1, y1, o2, a2, y2, pi1, pi2)


def _setting_two(rng: np.random.Generator, n: int, regime: Regime | None) -> RawDraw:
    x1 = rng.standard_normal(n)
    x2 = rng.standard_normal(n)
    eps1 = rng.standard_normal(n)
    eps2 = rng.standard_normal(n)
    u1 = rng.random(n)
    u2 = rng.random(n)

    o1 = x1[:, None]
    o2 = x2[:, None]
    a1, pi1 = _act(u1, 0.5, _forced_d1(regime, o1))
    y1 = a1 * (2.0 * (np.abs(x1) < 1) - 1.0) + eps1
    a2, pi2 = _act(u2, 0.5, _forced_d2(regime, o1, y1, o2, a1))
    y2 = a2 * (2.0 * (x2 > x1 ** 2) - 1.0) + eps2
    return RawDraw(o1, a1, y1, o2, a2, y2, pi1, pi2)


def _setting_three(rng: np.random.Generator, n: int, regime: Regime | None) -> RawDraw:
    x1 = rng.standard_normal((n, 3))
    e1 = rng.standard_normal(n)
    e2 = rng.standard_normal(n)
    eps1 = rng.standard_normal(n)
    eps2 = rng.standard_normal(n)
    u1 = rng.random(n)
    u2 = rng.random(n)

    a1, pi1 = _act(u1, 0.5, _forced_d1(regime, x1))
    x21 = (1.25 * x1[:, 0] * a1 + e1 > 0).astype(np.float64)
    x22 = (-1.75 * x1[:, 1] * a1 + e2 > 0).astype(np.float64)
    y1 = 10.0 + a1 * (1.0 + 1.5 * x1[:, 2]) + eps1
    o2 = np.column_stack([x21, x22])
    a2, pi2 = _act(u2, 0.5, _forced_d2(regime, x1, y1, o2, a1))
    y2 = 10.0 + a2 * (-0.5 + 0.5 * y1 + 0.5 * a1 + 0.5 * x21 - 0.5 * x22) + eps2
    return RawDraw(x1, a1, y1, o2, a2, y2, pi1, pi2)


def _setting_four(rng: np.random.Generator, n: int, regime: Regime | None) -> RawDraw:
    x1 = rng.standard_normal((n, 3))
    x21 = rng.standard_normal(n)
    eps1 = rng.standard_normal(n)
    eps2 = rng.standard_normal(n)
    u1 = rng.random(n)
    u2 = rng.random(n)

    a1, pi1 = _act(u1, 0.5, _forced_d1(regime, x1))
    stage_one = a1 * (1.0 + 1.5 * (x1[:, 2] > 0))
    y1 = 2.0 + stage_one + eps1
    o2 = x21[:, None]
    a2, pi2 = _act(u2, 0.5, _forced_d2(regime, x1, y1, o2, a1))
    boundary = np.sign(0.01 * x1[:, 1] ** 2 - 0.05 * x1[:, 2] ** 2)
    y2 = 2.0 + stage_one + 10.0 * a2 * boundary + x21 + eps2
    return RawDraw(x1, a1, y1, o2, a2, y2, pi1, pi2)


def setting_five_covariance() -> np.ndarray:
    return S5_SIGMA ** 2 * np.eye(6) + S5_RHO * np.ones((6, 6))


def _setting_five(rng: np.random.Generator, n: int, regime: Regime | None) -> RawDraw:
    z = rng.multivariate_normal(np.zeros(6), setting_five_covariance(), size=n, method="cholesky")
    ez1 = rng.standard_normal(n)
    ez2 = rng.standard_normal(n)
    eps1 = rng.standard_normal(n)
    eps2 = rng.standard_normal(n)
    u1 = rng.random(n)
    u2 = rng.random(n)

    x = np.floor(z)
    ones = np.ones(n)
    z21 = (1.25 * x[:, 0] + ez1 > 0).astype(np.float64)
    z22 = (-1.75 * x[:, 1] + ez2 > 0).astype(np.float64)
    o2 = np.column_stack([z21, z22])

    h10 = np.column_stack([ones, x])
    h11 = np.column_stack([ones, x[:, 1:]])
    a1, pi1 = _act(u1, expit(h10 @ S5_B1), _forced_d1(regime, x))
    y1 = h10 @ S5_C1 + a1 * (h11 @ S5_D1) + eps1

    h20 = np.column_stack([y1, ones, x, a1, z21, z22])
    h21 = np.column_stack([ones, x[:, :4], a1, z21, z22])
    a2, pi2 = _act(u2, expit(h20 @ S5_B2 + o2 @ S5_B2_TILDE), _forced_d2(regime, x, y1, o2, a1))
    wobble = (o2 @ S5_C2_TILDE) * y1 * np.sin(np.sum(o2 ** 2, axis=1) / (np.abs(y1) + 1.0))
    y2 = h20 @ S5_C2 + a2 * (h21 @ S5_D2) + wobble + eps2
    return RawDraw(x, a1, y1, o2, a2, y2, pi1, pi2)


_DRAWERS = {1: _setting_one, 2: _setting_two, 3: _setting_three, 4: _setting_four, 5: _setting_five}


def _drawer(setting: int):
    try:
        return _DRAWERS[int(setting)]
    except KeyError:
        raise ConfigError(f"setting must be one of {sorted(_DRAWERS)}, got {setting}") from None


def generate(spec: SettingSpec) -> Dataset:
    """
    Observational sample of spec.n trajectories with true propensities, rewards
    shifted by the smallest multiple of 0.5 that makes every reward >= 0.1.
    """
    raw = _drawer(spec.id)(np.random.Generator(np.random.Philox(spec.seed)), spec.n, None)
    offset = smallest_offset(raw.y1, raw.y2)
    floor = S5_FLOOR if spec.id == 5 else DEFAULT_POSITIVITY_FLOOR
    logger.info(f"Generated setting {spec.id}: n={spec.n}, seed={spec.seed}, offset={offset}")
    return Dataset.from_arrays(
        o1=raw.o1, a1=raw.a1, y1=raw.y1 + offset, o2=raw.o2, a2=raw.a2, y2=raw.y2 + offset,
        pi1=raw.pi1, pi2=raw.pi2, offset=offset, positivity_floor=floor, source=f"setting-{spec.id}",
    )


def mc_value(setting: int, regime: Regime, n_eval: int = 10000, seed: int = 0) -> ValueEstimate:
    """
    Mean of Y1 + Y2 (raw scale) over n_eval fresh trajectories with actions
    forced to the regime; stage-2 histories are built on the regime's offset scale.
    """
    raw = _drawer(setting)(np.random.Generator(np.random.Philox(seed)), n_eval, regime)
    total = raw.y1 + raw.y2
    sd = float(np.std(total, ddof=1) / np.sqrt(n_eval)) if n_eval > 1 else 0.0
    return ValueEstimate(value=float(total.mean()), sd=sd, method=EstimationMethod.MONTE_CARLO, n_used=n_eval)


def setting_one_law(offset: float = 0.5) -> DiscreteDtr:
    """
    Setting 1 as an exact finite law; rewards carry the given offset so the
    law's Y values are strictly positive.
    """
    if offset <= 0:
        raise ValueError("setting_one_law needs a positive offset (raw rewards include 0)")
    nodes = []
    for x11, x12, x13 in product((1.0, -1.0), repeat=3):
        transitions: dict[int, list[Transition]] = {}
        for a1 in (1, -1):
            p_y1 = float(expit((x13 - 0.5 * x12) * a1))
            p_x21 = float(norm.cdf(-1.75 * x12 * a1))
            outcomes = []
            for y1, x21 in product((0.0, 1.0), repeat=2):
                prob = (p_y1 if y1 else 1.0 - p_y1) * (p_x21 if x21 else 1.0 - p_x21)
                y2_law = {}
                for a2 in (1, -1):
                    p_y2 = float(expit((0.5 * x11 + x12 - 0.2 * x21 + y1) * a2))
                    y2_law[a2] = StageTwoOutcome(values=[offset, 1.0 + offset], probs=[1.0 - p_y2, p_y2])
                outcomes.append(Transition(
                    y1=y1 + offset, o2=[x21], prob=prob, pi2={1: 0.5, -1: 0.5}, y2=y2_law,
                ))
            transitions[a1] = outcomes
        nodes.append(HistoryNode(h1=[x11, x12, x13], prob=0.125, pi1={1: 0.5, -1: 0.5}, transitions=transitions))
    return DiscreteDtr(nodes=nodes)
