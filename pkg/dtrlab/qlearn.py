"""
Q-learning baseline: backward regression with greedy policy extraction.

Execution Flow Map:
• fit_q2 → regress Y2 on (H2, A2)
• pseudo_outcome → Y1 + max_a Q2(H2, a)
• fit_q1 → regress the pseudo outcome on (H1, A1)
• q_policy → argmax_a Q_t(H_t, a) at each stage, ties to +1
• fit_q_learning → the three fits in order, returning both models and the policy

Linear Q: Q(H, A) = H~'theta0 + A H~'theta1 with H~ = (1, H), solved by ridge-stabilized
normal equations. MLP Q: ReLU network on standardized (H, A) with a standardized target,
trained by RMSprop on squared loss with dropout.
"""
import logging
from dataclasses import dataclass

import numpy as np

from dtrlab.core import history_matrix
from dtrlab.errors import SingularDesignError
from dtrlab.mlp import MlpNetwork
from dtrlab.models.data import Dataset
from dtrlab.models.specs import QForm
from dtrlab.optim import RMSprop

logger = logging.getLogger(__name__)

RIDGE = 1e-8
MLP_EPOCHS = 20
MLP_BATCH = 128
MLP_LEARNING_RATE = 1e-3
MLP_DROPOUT = 0.5
MLP_HIDDEN = (128, 64)


@dataclass(frozen=True, eq=False)
class QModel:
    """
    Fitted Q-function for one stage.

    Linear form uses theta0 / theta1; the MLP form uses params plus the input
    and target standardization learned at fit time.
    """
    stage: int
    form: QForm
    theta0: np.ndarray | None = None
    theta1: np.ndarray | None = None
    params: np.ndarray | None = None
    x_mean: np.ndarray | None = None
    x_scale: np.ndarray | None = None
    y_mean: float = 0.0
    y_scale: float = 1.0
    fitted: bool = True

    @property
    def network(self) -> MlpNetwork:
        return MlpNetwork(self.x_mean.shape[0], MLP_HIDDEN)

    def predict(self, H: np.ndarray, A) -> np.ndarray:
        H = np.atleast_2d(np.asarray(H, dtype=np.float64))
        A = np.broadcast_to(np.asarray(A, dtype=np.float64), (H.shape[0],))
        if self.form == QForm.LINEAR:
            Ht = _with_intercept(H)
            return Ht @ self.theta0 + A * (Ht @ self.theta1)
        X = (np.column_stack([H, A]) - self.x_mean) / self.x_scale
        out, _ = self.network.forward(self.params, X)
        return self.y_mean + self.y_scale * out

    def contrast(self, H: np.ndarray) -> np.ndarray:
        """Q(H, +1) - Q(H, -1)."""
        H = np.atleast_2d(np.asarray(H, dtype=np.float64))
        if self.form == QForm.LINEAR:
            return 2.0 * (_with_intercept(H) @ self.theta1)
        return self.predict(H, 1.0) - self.predict(H, -1.0)

    def max_value(self, H: np.ndarray) -> np.ndarray:
        return np.maximum(self.predict(H, 1.0), self.predict(H, -1.0))

    def to_dict(self) -> dict:
        def listed(v):
            return None if v is None else [float(x) for x in np.ravel(v)]
        return {
            "stage": self.stage, "form": str(self.form),
            "theta0": listed(self.theta0), "theta1": listed(self.theta1), "params": listed(self.params),
            "x_mean": listed(self.x_mean), "x_scale": listed(self.x_scale),
            "y_mean": self.y_mean, "y_scale": self.y_scale,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "QModel":
        def arr(v):
            return None if v is None else np.asarray(v, dtype=np.float64)
        return cls(
            stage=int(data["stage"]), form=QForm(data["form"]),
            theta0=arr(data.get("theta0")), theta1=arr(data.get("theta1")), params=arr(data.get("params")),
            x_mean=arr(data.get("x_mean")), x_scale=arr(data.get("x_scale")),
            y_mean=float(data.get("y_mean", 0.0)), y_scale=float(data.get("y_scale", 1.0)),
        )


def _with_intercept(H: np.ndarray) -> np.ndarray:
    return np.column_stack([np.ones(H.shape[0]), H])


def _fit_linear(stage: int, H: np.ndarray, A: np.ndarray, target: np.ndarray) -> QModel:
    Ht = _with_intercept(H)
    Z = np.hstack([Ht, A[:, None] * Ht])
    gram = Z.T @ Z + RIDGE * np.eye(Z.shape[1])
    try:
        theta = np.linalg.solve(gram, Z.T @ target)
    except np.linalg.LinAlgError as exc:
        raise SingularDesignError(f"stage-{stage} Q design is singular after ridge {RIDGE}") from exc
    if not np.all(np.isfinite(theta)):
        raise SingularDesignError(f"stage-{stage} Q fit produced non-finite coefficients")
    k = Ht.shape[1]
    return QModel(stage=stage, form=QForm.LINEAR, theta0=theta[:k], theta1=theta[k:])


def _fit_mlp(stage: int, H: np.ndarray, A: np.ndarray, target: np.ndarray, seed: int) -> QModel:
    rng = np.random.Generator(np.random.Philox(seed))
    X = np.column_stack([H, A])
    x_mean = X.mean(axis=0)
    x_scale = X.std(axis=0)
    x_scale[x_scale == 0] = 1.0
    y_mean = float(target.mean())
    y_scale = float(target.std()) or 1.0
    Xs = (X - x_mean) / x_scale
    ys = (target - y_mean) / y_scale

    network = MlpNetwork(X.shape[1], MLP_HIDDEN)
    if np.ptp(target) == 0:
        # constant target: an all-zero network reproduces y_mean exactly
        logger.debug(f"stage-{stage} Q mlp target is constant, skipping training")
        return QModel(
            stage=stage, form=QForm.MLP, params=np.zeros(network.n_params),
            x_mean=x_mean, x_scale=x_scale, y_mean=y_mean, y_scale=y_scale,
        )
    params = network.init_params(rng)
    optimizer = RMSprop(MLP_LEARNING_RATE, ascend=False)
    n = X.shape[0]
    batch = min(MLP_BATCH, n)
    for epoch in range(MLP_EPOCHS):
        order = rng.permutation(n)
        for start in range(0, n, batch):
            idx = order[start:start + batch]
            masks = network.dropout_masks(rng, idx.size, MLP_DROPOUT)
            out, cache = network.forward(params, Xs[idx], masks)
            residual = out - ys[idx]
            grad = network.backward(params, cache, 2.0 * residual / idx.size)
            params = optimizer.apply_gradient(params, grad, "params")
        logger.debug(f"stage-{stage} Q mlp epoch {epoch + 1}")
    return QModel(
        stage=stage, form=QForm.MLP, params=params,
        x_mean=x_mean, x_scale=x_scale, y_mean=y_mean, y_scale=y_scale,
    )


def _fit(stage: int, H: np.ndarray, A: np.ndarray, target: np.ndarray, form: QForm, seed: int) -> QModel:
    if QForm(form) == QForm.LINEAR:
        return _fit_linear(stage, H, A, target)
    return _fit_mlp(stage, H, A, target, seed)


def fit_q2(d: Dataset, form: QForm = QForm.LINEAR, seed: int = 0) -> QModel:
    """
    Least-squares fit of Q2(H2, A2) to Y2.

    Raises:
        SingularDesignError: normal equations unsolvable even with ridge.
    """
    return _fit(2, history_matrix(d, 2), d.a2, d.y2, form, seed)


def pseudo_outcome(d: Dataset, q2: QModel) -> np.ndarray:
    return d.y1 + q2.max_value(history_matrix(d, 2))


def fit_q1(d: Dataset, pseudo: np.ndarray, form: QForm = QForm.LINEAR, seed: int = 0) -> QModel:
    return _fit(1, history_matrix(d, 1), d.a1, np.asarray(pseudo, dtype=np.float64), form, seed)


@dataclass(frozen=True, eq=False)
class QPolicy:
    """Greedy regime argmax_a Q_t(H_t, a), ties to +1."""
    q1: QModel
    q2: QModel
    offset: float = 0.0

    def d1(self, H1: np.ndarray) -> np.ndarray:
        return np.where(self.q1.contrast(H1) >= 0, 1.0, -1.0)

    def d2(self, H2: np.ndarray) -> np.ndarray:
        return np.where(self.q2.contrast(H2) >= 0, 1.0, -1.0)

    def to_dict(self) -> dict:
        return {"q1": self.q1.to_dict(), "q2": self.q2.to_dict(), "offset": self.offset}

    @classmethod
    def from_dict(cls, data: dict) -> "QPolicy":
        return cls(q1=QModel.from_dict(data["q1"]), q2=QModel.from_dict(data["q2"]), offset=float(data.get("offset", 0.0)))


def q_policy(q1: QModel, q2: QModel, offset: float = 0.0) -> QPolicy:
    return QPolicy(q1=q1, q2=q2, offset=offset)


def fit_q_learning(d: Dataset, form: QForm = QForm.LINEAR, seed: int = 0) -> tuple[QModel, QModel, QPolicy]:
    """Backward pipeline; stage-2 and stage-1 networks get independent child seeds."""
    seed2, seed1 = np.random.SeedSequence(seed).generate_state(2)
    q2 = fit_q2(d, form, int(seed2))
    q1 = fit_q1(d, pseudo_outcome(d, q2), form, int(seed1))
    logger.info(f"Fitted {form} Q-learning on n={d.n}")
    return q1, q2, q_policy(q1, q2, d.offset)
