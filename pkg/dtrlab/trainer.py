"""
Empirical psi-value objective and its simultaneous two-stage RMSprop ascent.

Execution Flow Map:
• surrogate_value_hat → mean_i w_i psi(a1_i f1(H1_i), a2_i f2(H2_i)), w_i = (y1_i + y2_i) / (pi1_i pi2_i)
• objective_grad → gradient of the batch mean w.r.t. (theta1, theta2), optional L1 subgradient
• train → seeded shuffling, minibatch RMSprop on both stages at once, per-epoch full-data objective

Features are computed once per run; minibatches slice the precomputed matrices.
"""
import logging
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from dtrlab.core import history_matrix, require_positivity
from dtrlab.errors import ConfigError, TrainingDivergedError, UnsupportedSurrogateError
from dtrlab.models.configs import TrainConfig
from dtrlab.models.data import Dataset, Trajectory
from dtrlab.models.specs import PolicyClass, SurrogateSpec
from dtrlab.optim import RMSprop, clip_global_norm
from dtrlab.policy import Policy, PolicyPair
from dtrlab.surrogate import get_surrogate, psi_eval, psi_grad

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class TrainResult:
    pair: PolicyPair
    objective_trace: list[float]
    final_objective: float
    initial_objective: float
    config_echo: TrainConfig
    seconds: float = 0.0

    def trace_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "epoch": np.arange(1, len(self.objective_trace) + 1),
            "objective": self.objective_trace,
        })

    def write_trace(self, path: str | Path) -> Path:
        path = Path(path)
        self.trace_frame().to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
        return path


def _weights(d: Dataset) -> np.ndarray:
    return (d.y1 + d.y2) / (d.pi1 * d.pi2)


def _as_dataset(batch: Dataset | list[Trajectory]) -> Dataset:
    if isinstance(batch, Dataset):
        return batch
    return Dataset.from_trajectories(list(batch))


def surrogate_value_hat(d: Dataset, s: SurrogateSpec, pair: PolicyPair) -> float:
    """
    Raises:
        PositivityError: any propensity below the dataset's floor.
    """
    require_positivity(d)
    f1 = pair.f1.scores(history_matrix(d, 1))
    f2 = pair.f2.scores(history_matrix(d, 2))
    return float(np.mean(_weights(d) * psi_eval(s, d.a1 * f1, d.a2 * f2)))


def _stage_gradients(
        s: SurrogateSpec,
        f1: Policy,
        f2: Policy,
        theta1: np.ndarray,
        theta2: np.ndarray,
        X1: np.ndarray,
        X2: np.ndarray,
        a1: np.ndarray,
        a2: np.ndarray,
        w: np.ndarray,
        masks1=None,
        masks2=None,
        allow_inconsistent: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    s1, cache1 = f1.forward(X1, theta1, masks1)
    s2, cache2 = f2.forward(X2, theta2, masks2)
    gx, gy = psi_grad(s, a1 * s1, a2 * s2, allow_inconsistent=allow_inconsistent)
    n = w.shape[0]
    return (
        f1.gradient(cache1, w * gx * a1 / n, theta1),
        f2.gradient(cache2, w * gy * a2 / n, theta2),
    )


def _objective(s, f1, f2, theta1, theta2, X1, X2, a1, a2, w) -> float:
    s1, _ = f1.forward(X1, theta1)
    s2, _ = f2.forward(X2, theta2)
    return float(np.mean(w * psi_eval(s, a1 * s1, a2 * s2)))


def objective_grad(
        batch: Dataset | list[Trajectory],
        s: SurrogateSpec,
        pair: PolicyPair,
        l1_lambda: float = 0.0,
        allow_inconsistent: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Gradient of the batch-mean objective with respect to (theta1, theta2).

    With l1_lambda > 0 the penalty subgradient l1_lambda * sign(theta) is
    subtracted (sign(0) = 0).

    Raises:
        UnsupportedSurrogateError: comparator surrogate without allow_inconsistent.
    """
    if not s.is_sigmoid and not allow_inconsistent:
        raise UnsupportedSurrogateError(f"surrogate {s.key!r} is not Condition-2; set allow_inconsistent")
    d = _as_dataset(batch)
    require_positivity(d)
    g1, g2 = _stage_gradients(
        s, pair.f1, pair.f2, pair.f1.params, pair.f2.params,
        pair.f1.features(history_matrix(d, 1)), pair.f2.features(history_matrix(d, 2)),
        d.a1, d.a2, _weights(d), allow_inconsistent=allow_inconsistent,
    )
    if l1_lambda > 0:
        g1 = g1 - l1_lambda * np.sign(pair.f1.params)
        g2 = g2 - l1_lambda * np.sign(pair.f2.params)
    return g1, g2


def train(d: Dataset, class1: PolicyClass, class2: PolicyClass, cfg: TrainConfig) -> TrainResult:
    """
    Maximize the empirical psi-value over (f1, f2) by minibatch RMSprop.

    Both parameter vectors move in the same step from the jointly clipped
    gradient. The trace holds the full-data objective after every epoch.

    Raises:
        ConfigError: batch_size larger than the dataset.
        UnsupportedSurrogateError: comparator surrogate without allow_inconsistent_surrogate.
        TrainingDivergedError: NaN/Inf gradient or objective.
    """
    s = get_surrogate(cfg.surrogate)
    if not s.is_sigmoid and not cfg.allow_inconsistent_surrogate:
        raise UnsupportedSurrogateError(
            f"surrogate {s.key!r} is not Condition-2; set allow_inconsistent_surrogate to train with it"
        )
    if cfg.batch_size > d.n:
        raise ConfigError(f"batch_size {cfg.batch_size} exceeds dataset size {d.n}")
    require_positivity(d)

    started = time.perf_counter()
    rng = np.random.Generator(np.random.Philox(cfg.seed))
    H1 = history_matrix(d, 1)
    H2 = history_matrix(d, 2)
    f1 = Policy.initial(PolicyClass(class1), 1, H1, d.p1, d.p2, rng)
    f2 = Policy.initial(PolicyClass(class2), 2, H2, d.p1, d.p2, rng)
    X1 = f1.features(H1)
    X2 = f2.features(H2)
    w = _weights(d)
    theta1 = f1.params.copy()
    theta2 = f2.params.copy()
    optimizer = RMSprop(cfg.learning_rate, cfg.rmsprop_decay, cfg.rmsprop_eps, ascend=True)
    allow = cfg.allow_inconsistent_surrogate

    initial = _objective(s, f1, f2, theta1, theta2, X1, X2, d.a1, d.a2, w)
    logger.info(
        f"Training {class1}/{class2} with {s.key} on n={d.n}: {cfg.epochs} epochs, "
        f"batch {cfg.batch_size}, initial objective {initial:.6g}"
    )

    trace: list[float] = []
    step = 0
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(d.n)
        for start in range(0, d.n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            step += 1
            masks1 = f1.network.dropout_masks(rng, idx.size, cfg.dropout) if f1.class_kind == PolicyClass.MLP else None
            masks2 = f2.network.dropout_masks(rng, idx.size, cfg.dropout) if f2.class_kind == PolicyClass.MLP else None
            g1, g2 = _stage_gradients(
                s, f1, f2, theta1, theta2, X1[idx], X2[idx], d.a1[idx], d.a2[idx], w[idx],
                masks1, masks2, allow_inconsistent=allow,
            )
            if cfg.l1_lambda > 0:
                g1 = g1 - cfg.l1_lambda * np.sign(theta1)
                g2 = g2 - cfg.l1_lambda * np.sign(theta2)
            (g1, g2), norm = clip_global_norm([g1, g2], cfg.clip_norm)
            if not np.isfinite(norm):
                raise TrainingDivergedError(f"non-finite gradient at epoch {epoch}, step {step}")
            theta1 = optimizer.apply_gradient(theta1, g1, "theta1")
            theta2 = optimizer.apply_gradient(theta2, g2, "theta2")

        value = _objective(s, f1, f2, theta1, theta2, X1, X2, d.a1, d.a2, w)
        if not np.isfinite(value):
            raise TrainingDivergedError(f"non-finite objective after epoch {epoch}, step {step}")
        trace.append(value)
        logger.debug(f"epoch {epoch}: objective {value:.6g}")

    pair = PolicyPair(f1=f1.with_params(theta1), f2=f2.with_params(theta2), offset=d.offset)
    seconds = time.perf_counter() - started
    logger.info(f"Training finished in {seconds:.2f}s, final objective {trace[-1]:.6g}")
    return TrainResult(
        pair=pair,
        objective_trace=trace,
        final_objective=trace[-1],
        initial_objective=initial,
        config_echo=cfg,
        seconds=seconds,
    )
