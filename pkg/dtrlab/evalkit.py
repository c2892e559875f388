"""
Off-policy value estimation from observed data.

Execution Flow Map:
• ipw_value → mean of (y1 + y2) 1[a1 = d1] 1[a2 = d2] / (pi1 pi2)
• fit_propensity → logistic maximum likelihood by damped Newton on (1, H_t)
• with_estimated_propensities → dataset copy whose pi columns come from fitted models
• dr_summands / dr_value → augmented IPW with stage-wise Q-models
• select_surrogate_cv → K-fold choice of the sigmoid surrogate by held-out IPW value

Estimates live on the offset scale of the dataset; ValueEstimate.raw_value undoes it.
Regimes may carry a different offset than the dataset: stage-2 histories handed to
d2 are rebuilt on the regime's scale.
"""
import logging
from dataclasses import dataclass, replace
from typing import Protocol

import numpy as np
from scipy.special import expit, log_expit

from dtrlab.core import history_matrix, require_positivity
from dtrlab.errors import ConfigError, StageMismatchError
from dtrlab.models.configs import TrainConfig
from dtrlab.models.data import Dataset
from dtrlab.models.results import SurrogateSelection, ValueEstimate
from dtrlab.models.specs import EstimationMethod, PolicyClass
from dtrlab.policy import Regime
from dtrlab.surrogate import SIGMOID_KEYS
from dtrlab.trainer import train

logger = logging.getLogger(__name__)

ESTIMATED_PROPENSITY_FLOOR = 0.01
NEWTON_MAX_ITER = 100
NEWTON_TOLERANCE = 1e-8
LINE_SEARCH_HALVINGS = 30
SEPARATION_NORM = 1e3
SATURATION_LOGIT = 15.0
CV_FOLDS = 5


class QFunction(Protocol):
    def predict(self, H: np.ndarray, A) -> np.ndarray: ...


def _regime_actions(d: Dataset, regime: Regime) -> tuple[np.ndarray, np.ndarray]:
    H1 = history_matrix(d, 1)
    H2 = history_matrix(d, 2)
    shift = float(getattr(regime, "offset", 0.0)) - d.offset
    if shift:
        H2 = H2.copy()
        H2[:, d.p1] += shift
    return np.asarray(regime.d1(H1), dtype=np.float64), np.asarray(regime.d2(H2), dtype=np.float64)


def _estimate(summands: np.ndarray, method: EstimationMethod, offset: float) -> ValueEstimate:
    n = summands.shape[0]
    sd = float(np.std(summands, ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    return ValueEstimate(value=float(summands.mean()), sd=sd, method=method, n_used=n, offset=offset)


def ipw_summands(d: Dataset, regime: Regime) -> np.ndarray:
    d1, d2 = _regime_actions(d, regime)
    followed = (d.a1 == d1) & (d.a2 == d2)
    return np.where(followed, (d.y1 + d.y2) / (d.pi1 * d.pi2), 0.0)


def ipw_value(d: Dataset, regime: Regime) -> ValueEstimate:
    """
    Inverse-propensity plug-in estimate of V(d1, d2); sd is the sample SD over sqrt(n).

    Raises:
        PositivityError: any propensity below the dataset's floor.
    """
    require_positivity(d)
    return _estimate(ipw_summands(d, regime), EstimationMethod.IPW, d.offset)


# propensity models ---------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PropensityModel:
    """
    Logistic model P(A_t = +1 | H_t) with weights on (1, H_t).

    Predictions are clipped to [floor, 1 - floor]. separated flags fits whose
    weights or linear predictors ran away (quasi/complete separation).
    """
    stage: int
    weights: np.ndarray
    std_errors: np.ndarray
    converged: bool
    separated: bool
    iterations: int
    floor: float = ESTIMATED_PROPENSITY_FLOOR

    def predict(self, H: np.ndarray) -> np.ndarray:
        H = np.atleast_2d(np.asarray(H, dtype=np.float64))
        if H.shape[1] + 1 != self.weights.shape[0]:
            raise StageMismatchError(
                f"stage-{self.stage} propensity model expects {self.weights.shape[0] - 1} history columns, got {H.shape[1]}"
            )
        return np.clip(expit(_design(H) @ self.weights), self.floor, 1.0 - self.floor)

    def propensity_of(self, H: np.ndarray, A: np.ndarray) -> np.ndarray:
        p = self.predict(H)
        return np.where(np.asarray(A) > 0, p, 1.0 - p)


def _design(H: np.ndarray) -> np.ndarray:
    return np.column_stack([np.ones(H.shape[0]), H])


def _log_likelihood(X: np.ndarray, y: np.ndarray, w: np.ndarray) -> float:
    eta = X @ w
    return float(np.sum(y * log_expit(eta) + (1.0 - y) * log_expit(-eta)))


def fit_propensity(
        d: Dataset,
        stage: int,
        floor: float = ESTIMATED_PROPENSITY_FLOOR,
        max_iter: int = NEWTON_MAX_ITER,
        tol: float = NEWTON_TOLERANCE,
) -> PropensityModel:
    """
    Maximum-likelihood logistic fit of the stage's action on (1, H_t).

    Newton steps are halved until the log-likelihood does not decrease.
    Separation is reported through the model's flag and a warning, never raised.
    """
    if stage not in (1, 2):
        raise StageMismatchError(f"stage must be 1 or 2, got {stage}")
    X = _design(history_matrix(d, stage))
    y = (d.a1 if stage == 1 else d.a2) > 0
    y = y.astype(np.float64)
    n, k = X.shape
    w = np.zeros(k)
    current = _log_likelihood(X, y, w)
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        p = expit(X @ w)
        gradient = X.T @ (y - p)
        if np.linalg.norm(gradient) / n < tol:
            converged = True
            break
        hessian = (X * (p * (1.0 - p))[:, None]).T @ X
        step = np.linalg.lstsq(hessian, gradient, rcond=None)[0]
        scale = 1.0
        for _ in range(LINE_SEARCH_HALVINGS):
            candidate = _log_likelihood(X, y, w + scale * step)
            if candidate >= current:
                break
            scale *= 0.5
        w = w + scale * step
        current = _log_likelihood(X, y, w)
        logger.debug(f"stage-{stage} propensity Newton iteration {iterations}: log-likelihood {current:.10g}")

    eta = X @ w
    p = expit(eta)
    information = (X * (p * (1.0 - p))[:, None]).T @ X
    std_errors = np.sqrt(np.abs(np.diag(np.linalg.pinv(information))))
    separated = bool(np.linalg.norm(w) > SEPARATION_NORM or np.max(np.abs(eta)) > SATURATION_LOGIT)
    if separated:
        logger.warning(
            f"stage-{stage} propensity fit looks separated (|w|={np.linalg.norm(w):.3g}); "
            f"predictions are clipped at {floor}"
        )
    return PropensityModel(
        stage=stage, weights=w, std_errors=std_errors, converged=converged,
        separated=separated, iterations=iterations, floor=floor,
    )


def with_estimated_propensities(d: Dataset, pm1: PropensityModel, pm2: PropensityModel) -> Dataset:
    """Copy of d whose pi1/pi2 are the fitted propensities of the observed actions."""
    pi1 = pm1.propensity_of(history_matrix(d, 1), d.a1)
    pi2 = pm2.propensity_of(history_matrix(d, 2), d.a2)
    floor = min(d.positivity_floor, pm1.floor, pm2.floor)
    return replace(d.with_columns(pi1=pi1, pi2=pi2), positivity_floor=floor)


# doubly robust -----------------------------------------------------------------

def dr_summands(d: Dataset, regime: Regime, q1: QFunction, q2: QFunction) -> np.ndarray:
    """
    Per-trajectory augmented IPW terms:
        Q1d + I1 / pi1 (y1 - Q1d + Q2d) + I1 I2 / (pi1 pi2) (y2 - Q2d)
    with Qtd = Q_t(H_t, d_t(H_t)) and It = 1[a_t = d_t(H_t)].
    """
    d1, d2 = _regime_actions(d, regime)
    q1d = q1.predict(history_matrix(d, 1), d1)
    q2d = q2.predict(history_matrix(d, 2), d2)
    i1 = (d.a1 == d1).astype(np.float64)
    i2 = (d.a2 == d2).astype(np.float64)
    return q1d + i1 / d.pi1 * (d.y1 - q1d + q2d) + i1 * i2 / (d.pi1 * d.pi2) * (d.y2 - q2d)


def dr_value(
        d: Dataset,
        regime: Regime,
        q1: QFunction,
        q2: QFunction,
        pm1: PropensityModel | None = None,
        pm2: PropensityModel | None = None,
) -> ValueEstimate:
    """
    Doubly robust value estimate; the stored propensities are used unless both models are given.

    Raises:
        PositivityError: a propensity in use is below the floor.
    """
    if (pm1 is None) != (pm2 is None):
        raise ConfigError("pass both propensity models or neither")
    if pm1 is not None:
        d = with_estimated_propensities(d, pm1, pm2)
    require_positivity(d)
    return _estimate(dr_summands(d, regime, q1, q2), EstimationMethod.DOUBLY_ROBUST, d.offset)


# surrogate selection ---------------------------------------------------------------

def stratified_folds(a1: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Fold id per row; each A1 arm is shuffled and dealt round-robin over the k folds."""
    folds = np.empty(a1.shape[0], dtype=np.int64)
    for arm in (1.0, -1.0):
        rows = rng.permutation(np.flatnonzero(a1 == arm))
        folds[rows] = np.arange(rows.size) % k
    return folds


def select_surrogate_cv(
        d: Dataset,
        class1: PolicyClass,
        class2: PolicyClass,
        cfg: TrainConfig,
        keys: tuple[str, ...] = SIGMOID_KEYS,
        folds: int = CV_FOLDS,
) -> SurrogateSelection:
    """
    Train on k-1 folds per surrogate, score the held-out fold by IPW and pick
    the surrogate with the largest mean held-out value (first key wins ties).
    """
    if folds < 2 or folds > d.n:
        raise ConfigError(f"folds must be in [2, n={d.n}], got {folds}")
    assignment = stratified_folds(d.a1, folds, np.random.Generator(np.random.Philox(cfg.seed)))
    scores: dict[str, float] = {}
    for key in keys:
        held_out = []
        for fold in range(folds):
            fit_rows = np.flatnonzero(assignment != fold)
            fold_cfg = cfg.model_copy(update={"surrogate": key, "batch_size": min(cfg.batch_size, fit_rows.size)})
            result = train(d.subset(fit_rows), class1, class2, fold_cfg)
            held_out.append(ipw_value(d.subset(np.flatnonzero(assignment == fold)), result.pair).value)
        scores[key] = float(np.mean(held_out))
        logger.info(f"surrogate {key}: mean held-out value {scores[key]:.6g} over {folds} folds")
    best = max(keys, key=lambda k: scores[k])
    return SurrogateSelection(best=best, scores=scores, folds=folds)
