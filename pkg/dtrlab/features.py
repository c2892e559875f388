"""
Feature maps for the basis policy classes.

• linear  → [1, h] at stage 1; [1, h, O1 x O2 pairs, O1 x A1] at stage 2
• spline  → per continuous coordinate (u, N(u)): natural cubic basis, knots at quartiles of u
• wavelet → per continuous coordinate: Daubechies scaling functions at level 0 and wavelets
            at levels 0..J-1 on u, all translates whose support meets [0, 1]
• mlp     → raw h

u is the coordinate rescaled to [0, 1] with training min/max (stored in FeatureMeta).
Binary columns (at most two distinct training values) enter linearly.
"""
from functools import lru_cache

import numpy as np
import pywt
from pydantic import BaseModel

from dtrlab.errors import StageMismatchError
from dtrlab.models.specs import PolicyClass

SPLINE_QUANTILES = (0.25, 0.5, 0.75)
DEFAULT_WAVELET = "db4"
DEFAULT_LEVELS = 5
WAVEFUN_LEVEL = 10
MLP_HIDDEN = (128, 64)


class FeatureMeta(BaseModel):
    """Everything a feature map needs besides the history itself."""
    class_kind: PolicyClass
    stage: int
    p1: int
    p2: int
    lower: list[float] = []
    upper: list[float] = []
    binary: list[bool] = []
    knots: list[list[float]] = []
    wavelet: str = DEFAULT_WAVELET
    levels: int = DEFAULT_LEVELS
    hidden: list[int] = list(MLP_HIDDEN)

    @property
    def history_dim(self) -> int:
        return self.p1 if self.stage == 1 else self.p1 + self.p2 + 2


def history_dim(stage: int, p1: int, p2: int) -> int:
    return p1 if stage == 1 else p1 + p2 + 2


def fit_meta(class_kind: PolicyClass, stage: int, H: np.ndarray, p1: int, p2: int) -> FeatureMeta:
    """Learn rescaling bounds, binary flags and spline knots from training histories."""
    H = np.asarray(H, dtype=np.float64)
    if H.ndim != 2 or H.shape[1] != history_dim(stage, p1, p2):
        raise StageMismatchError(
            f"stage-{stage} histories need {history_dim(stage, p1, p2)} columns, got shape {H.shape}"
        )
    meta = FeatureMeta(class_kind=class_kind, stage=stage, p1=p1, p2=p2)
    if class_kind not in (PolicyClass.SPLINE, PolicyClass.WAVELET):
        return meta

    lower = H.min(axis=0)
    upper = H.max(axis=0)
    binary = [np.unique(H[:, j]).size <= 2 for j in range(H.shape[1])]
    knots: list[list[float]] = []
    for j in range(H.shape[1]):
        if binary[j]:
            knots.append([])
            continue
        u = _rescale(H[:, j], lower[j], upper[j])
        q = np.quantile(u, SPLINE_QUANTILES)
        # heavily tied columns can give repeated quartiles
        if not np.all(np.diff(q) > 0):
            q = np.asarray(SPLINE_QUANTILES)
        knots.append(q.tolist())
    return meta.model_copy(update={
        "lower": lower.tolist(), "upper": upper.tolist(), "binary": binary, "knots": knots,
    })


def _rescale(column: np.ndarray, lo: float, hi: float) -> np.ndarray:
    span = hi - lo
    if span <= 0:
        return np.zeros_like(column)
    return (column - lo) / span


def linear_features(H: np.ndarray, meta: FeatureMeta) -> np.ndarray:
    n = H.shape[0]
    blocks = [np.ones((n, 1)), H]
    if meta.stage == 2:
        p1, p2 = meta.p1, meta.p2
        o1 = H[:, :p1]
        o2 = H[:, p1 + 1:p1 + 1 + p2]
        a1 = H[:, -1:]
        blocks.append((o1[:, :, None] * o2[:, None, :]).reshape(n, p1 * p2))
        blocks.append(o1 * a1)
    return np.hstack(blocks)


def natural_cubic_basis(u: np.ndarray, knots) -> np.ndarray:
    """
    Truncated-power natural cubic spline basis without intercept: columns
    u, d_k(u) - d_{K-1}(u) for k = 1..K-2, where
    d_k(u) = ((u - xi_k)_+^3 - (u - xi_K)_+^3) / (xi_K - xi_k).
    """
    knots = np.asarray(knots, dtype=np.float64)
    n_knots = knots.size
    u = np.asarray(u, dtype=np.float64)

    def d(k: int) -> np.ndarray:
        head = np.maximum(u - knots[k], 0.0) ** 3
        tail = np.maximum(u - knots[-1], 0.0) ** 3
        return (head - tail) / (knots[-1] - knots[k])

    basis = np.empty((u.size, n_knots - 1))
    basis[:, 0] = u
    last = d(n_knots - 2)
    for k in range(n_knots - 2):
        basis[:, k + 1] = d(k) - last
    return basis


def spline_features(H: np.ndarray, meta: FeatureMeta) -> np.ndarray:
    blocks = [np.ones((H.shape[0], 1))]
    for j in range(H.shape[1]):
        if meta.binary[j]:
            blocks.append(H[:, j:j + 1])
            continue
        u = _rescale(H[:, j], meta.lower[j], meta.upper[j])
        blocks.append(natural_cubic_basis(u, meta.knots[j]))
    return np.hstack(blocks)


@lru_cache(maxsize=8)
def wavelet_table(name: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Tabulated (phi, psi, x) of an orthogonal wavelet via the cascade algorithm."""
    phi, psi, x = pywt.Wavelet(name).wavefun(level=WAVEFUN_LEVEL)
    return np.asarray(phi), np.asarray(psi), np.asarray(x)


def wavelet_basis(u: np.ndarray, name: str = DEFAULT_WAVELET, levels: int = DEFAULT_LEVELS) -> np.ndarray:
    """
    Columns: phi(u - k) for translates meeting [0, 1], then 2^{j/2} psi(2^j u - k)
    for j = 0..levels-1, each over translates whose support meets [0, 1].
    u is clipped to [0, 1] first.
    """
    phi, psi, x = wavelet_table(name)
    support = float(x[-1])
    u = np.clip(np.asarray(u, dtype=np.float64), 0.0, 1.0)

    def table(values: np.ndarray, t: np.ndarray) -> np.ndarray:
        return np.interp(t, x, values, left=0.0, right=0.0)

    width = int(np.ceil(support))
    columns = [table(phi, u - k) for k in range(-width + 1, 1)]
    for j in range(levels):
        scale = 2.0 ** j
        for k in range(-width + 1, int(scale)):
            columns.append(np.sqrt(scale) * table(psi, scale * u - k))
    return np.column_stack(columns)


def wavelet_features(H: np.ndarray, meta: FeatureMeta) -> np.ndarray:
    blocks = [np.ones((H.shape[0], 1))]
    for j in range(H.shape[1]):
        if meta.binary[j]:
            blocks.append(H[:, j:j + 1])
            continue
        u = _rescale(H[:, j], meta.lower[j], meta.upper[j])
        blocks.append(wavelet_basis(u, meta.wavelet, meta.levels))
    return np.hstack(blocks)


def featurize_matrix(H: np.ndarray, meta: FeatureMeta) -> np.ndarray:
    """Feature rows for a batch of histories of meta.stage."""
    H = np.atleast_2d(np.asarray(H, dtype=np.float64))
    if H.shape[1] != meta.history_dim:
        raise StageMismatchError(
            f"stage-{meta.stage} policy expects histories of length {meta.history_dim}, got {H.shape[1]}"
        )
    match meta.class_kind:
        case PolicyClass.LINEAR:
            return linear_features(H, meta)
        case PolicyClass.SPLINE:
            return spline_features(H, meta)
        case PolicyClass.WAVELET:
            return wavelet_features(H, meta)
        case PolicyClass.MLP:
            return H


def feature_dim(meta: FeatureMeta) -> int:
    return featurize_matrix(np.zeros((1, meta.history_dim)), meta).shape[1]
