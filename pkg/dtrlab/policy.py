"""
Score-function policies f_t(H_t; theta_t) and regimes built from them.

A Policy is a value object (stage, class, feature metadata, flat params).
The trainer works on copies of params; evaluation never mutates a Policy.

Any object with d1(H1) -> actions, d2(H2) -> actions and an offset attribute
is a Regime; PolicyPair, StaticRegime, the Q-learning policy and the
simulation oracles all qualify.
"""
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import numpy as np

from dtrlab.errors import StageMismatchError
from dtrlab.features import FeatureMeta, feature_dim, featurize_matrix, fit_meta
from dtrlab.mlp import MlpNetwork
from dtrlab.models.data import History
from dtrlab.models.specs import PolicyClass


def sign_tie_plus(scores) -> np.ndarray:
    """+1 where score >= 0, else -1."""
    return np.where(np.asarray(scores) >= 0, 1.0, -1.0)


class Regime(Protocol):
    offset: float

    def d1(self, H1: np.ndarray) -> np.ndarray: ...

    def d2(self, H2: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class StaticRegime:
    """Always treat with a1 at stage 1 and a2 at stage 2."""
    a1: float = 1.0
    a2: float = 1.0
    offset: float = 0.0

    def d1(self, H1: np.ndarray) -> np.ndarray:
        return np.full(np.atleast_2d(H1).shape[0], float(self.a1))

    def d2(self, H2: np.ndarray) -> np.ndarray:
        return np.full(np.atleast_2d(H2).shape[0], float(self.a2))


@dataclass(frozen=True, eq=False)
class Policy:
    stage: int
    class_kind: PolicyClass
    meta: FeatureMeta
    params: np.ndarray

    def __post_init__(self):
        if self.meta.stage != self.stage:
            raise StageMismatchError(f"meta is for stage {self.meta.stage}, policy for stage {self.stage}")
        expected = self.n_params(self.meta)
        if np.shape(self.params) != (expected,):
            raise ValueError(f"{self.class_kind} policy needs {expected} params, got {np.shape(self.params)}")

    @staticmethod
    def n_params(meta: FeatureMeta) -> int:
        if meta.class_kind == PolicyClass.MLP:
            return MlpNetwork(meta.history_dim, tuple(meta.hidden)).n_params
        return feature_dim(meta)

    @classmethod
    def initial(
            cls,
            class_kind: PolicyClass,
            stage: int,
            H: np.ndarray,
            p1: int,
            p2: int,
            rng: np.random.Generator,
    ) -> "Policy":
        """Fit feature metadata on H; zero params for basis classes, Glorot init for the MLP."""
        meta = fit_meta(class_kind, stage, H, p1, p2)
        if class_kind == PolicyClass.MLP:
            params = MlpNetwork(meta.history_dim, tuple(meta.hidden)).init_params(rng)
        else:
            params = np.zeros(feature_dim(meta))
        return cls(stage=stage, class_kind=class_kind, meta=meta, params=params)

    @property
    def network(self) -> MlpNetwork:
        return MlpNetwork(self.meta.history_dim, tuple(self.meta.hidden))

    def with_params(self, params: np.ndarray) -> "Policy":
        return Policy(stage=self.stage, class_kind=self.class_kind, meta=self.meta, params=np.array(params))

    # batched evaluation ---------------------------------------------------

    def features(self, H: np.ndarray) -> np.ndarray:
        return featurize_matrix(H, self.meta)

    def forward(self, X: np.ndarray, params: np.ndarray | None = None, masks=None):
        """
        Scores from precomputed features, plus the cache gradient() needs.
        params defaults to self.params; the trainer passes its working copy.
        """
        params = self.params if params is None else params
        if self.class_kind == PolicyClass.MLP:
            return self.network.forward(params, X, masks)
        return X @ params, X

    def gradient(self, cache, upstream: np.ndarray, params: np.ndarray | None = None) -> np.ndarray:
        """sum_i upstream_i * d f(H_i) / d theta."""
        if self.class_kind == PolicyClass.MLP:
            return self.network.backward(self.params if params is None else params, cache, upstream)
        return cache.T @ upstream

    def scores(self, H: np.ndarray, masks=None) -> np.ndarray:
        return self.forward(self.features(H), masks=masks)[0]

    def decisions(self, H: np.ndarray) -> np.ndarray:
        return sign_tie_plus(self.scores(H))

    # serialization ----------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "stage": self.stage,
            "class_kind": str(self.class_kind),
            "meta": self.meta.model_dump(mode="json"),
            "params": [float(v) for v in self.params],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Policy":
        return cls(
            stage=int(data["stage"]),
            class_kind=PolicyClass(data["class_kind"]),
            meta=FeatureMeta.model_validate(data["meta"]),
            params=np.asarray(data["params"], dtype=np.float64),
        )


def _check_history(p: Policy, h: History) -> np.ndarray:
    if h.stage != p.stage:
        raise StageMismatchError(f"stage-{h.stage} history passed to a stage-{p.stage} policy")
    return np.asarray(h.h, dtype=np.float64)[None, :]


def featurize(p: Policy, h: History) -> np.ndarray:
    return p.features(_check_history(p, h))[0]


def policy_eval(p: Policy, h: History) -> float:
    return float(p.scores(_check_history(p, h))[0])


def policy_grad(p: Policy, h: History, mask_seed: int | None = None, dropout: float = 0.5) -> np.ndarray:
    """
    d f(h) / d theta. For the MLP, mask_seed switches on training-mode dropout
    with masks drawn from Philox(mask_seed).
    """
    H = _check_history(p, h)
    masks = None
    if p.class_kind == PolicyClass.MLP and mask_seed is not None:
        masks = p.network.dropout_masks(np.random.Generator(np.random.Philox(mask_seed)), 1, dropout)
    _, cache = p.forward(p.features(H), masks=masks)
    return p.gradient(cache, np.ones(1))


def decide(p: Policy, h: History) -> int:
    return 1 if policy_eval(p, h) >= 0 else -1


@dataclass(frozen=True, eq=False)
class PolicyPair:
    """
    (f1, f2) plus the reward offset of the data it was trained on, so that
    stage-2 histories are built on the same scale at decision time.
    """
    f1: Policy
    f2: Policy
    offset: float = 0.0
    label: str = field(default="", compare=False)

    def __post_init__(self):
        if self.f1.stage != 1 or self.f2.stage != 2:
            raise StageMismatchError(f"PolicyPair needs stages (1, 2), got ({self.f1.stage}, {self.f2.stage})")

    def d1(self, H1: np.ndarray) -> np.ndarray:
        return self.f1.decisions(H1)

    def d2(self, H2: np.ndarray) -> np.ndarray:
        return self.f2.decisions(H2)

    def to_dict(self) -> dict:
        return {"f1": self.f1.to_dict(), "f2": self.f2.to_dict(), "offset": self.offset}

    @classmethod
    def from_dict(cls, data: dict) -> "PolicyPair":
        return cls(
            f1=Policy.from_dict(data["f1"]),
            f2=Policy.from_dict(data["f2"]),
            offset=float(data.get("offset", 0.0)),
        )

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict()), encoding="utf-8")
        return path

    @classmethod
    def load(cls, path: str | Path) -> "PolicyPair":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
