"""
Observed-data models: one trajectory, a stage history, and the columnar Dataset.

Trajectory and History are pydantic models (row-level, JSON friendly).
Dataset keeps the same information column-wise in numpy arrays because every
estimator in the package works on whole columns at once.
"""
from dataclasses import dataclass, field, replace
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict

DEFAULT_POSITIVITY_FLOOR = 1e-3


class Trajectory(BaseModel):
    """One observed episode (O1, A1, Y1, O2, A2, Y2) with propensities of the observed actions."""
    model_config = ConfigDict(frozen=True)

    o1: list[float]
    a1: float
    y1: float
    o2: list[float]
    a2: float
    y2: float
    pi1: float
    pi2: float


class History(BaseModel):
    """Stage history: H1 = O1, H2 = (O1, Y1, O2, A1)."""
    model_config = ConfigDict(frozen=True)

    stage: Literal[1, 2]
    h: list[float]


class Violation(BaseModel):
    """Single validation finding. row is None for dataset-level problems."""
    row: int | None
    field: str
    message: str


def _column(values) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Dataset:
    """
    Immutable column store of n trajectories.

    o1 has shape (n, p1) and o2 shape (n, p2); every other column has shape (n,).
    p1 and p2 are the declared dimensions; validate() reports arrays that disagree.
    offset is the total constant already added to both reward columns.
    """
    o1: np.ndarray
    a1: np.ndarray
    y1: np.ndarray
    o2: np.ndarray
    a2: np.ndarray
    y2: np.ndarray
    pi1: np.ndarray
    pi2: np.ndarray
    p1: int
    p2: int
    offset: float = 0.0
    positivity_floor: float = DEFAULT_POSITIVITY_FLOOR
    source: str = field(default="", compare=False)

    @classmethod
    def from_arrays(
            cls,
            o1,
            a1,
            y1,
            o2,
            a2,
            y2,
            pi1,
            pi2,
            offset: float = 0.0,
            positivity_floor: float = DEFAULT_POSITIVITY_FLOOR,
            source: str = "",
    ) -> "Dataset":
        y1 = _column(y1)
        n = y1.shape[0]
        o1 = _column(np.reshape(o1, (n, -1)) if np.size(o1) else np.zeros((n, 0)))
        o2 = _column(np.reshape(o2, (n, -1)) if np.size(o2) else np.zeros((n, 0)))
        return cls(
            o1=o1, a1=_column(a1), y1=y1, o2=o2, a2=_column(a2), y2=_column(y2),
            pi1=_column(pi1), pi2=_column(pi2),
            p1=o1.shape[1], p2=o2.shape[1],
            offset=float(offset), positivity_floor=float(positivity_floor), source=source,
        )

    @classmethod
    def from_trajectories(
            cls,
            trajectories: list[Trajectory],
            offset: float = 0.0,
            positivity_floor: float = DEFAULT_POSITIVITY_FLOOR,
    ) -> "Dataset":
        """
        Stack trajectories column-wise.

        Ragged covariate lengths are padded with NaN and the declared p1/p2 come
        from the first trajectory, so validate() can name the offending rows.
        """
        if not trajectories:
            raise ValueError("Dataset needs at least one trajectory")
        p1 = len(trajectories[0].o1)
        p2 = len(trajectories[0].o2)
        width1 = max(len(t.o1) for t in trajectories)
        width2 = max(len(t.o2) for t in trajectories)
        o1 = np.full((len(trajectories), width1), np.nan)
        o2 = np.full((len(trajectories), width2), np.nan)
        for i, t in enumerate(trajectories):
            o1[i, :len(t.o1)] = t.o1
            o2[i, :len(t.o2)] = t.o2
        return cls(
            o1=_column(o1),
            a1=_column([t.a1 for t in trajectories]),
            y1=_column([t.y1 for t in trajectories]),
            o2=_column(o2),
            a2=_column([t.a2 for t in trajectories]),
            y2=_column([t.y2 for t in trajectories]),
            pi1=_column([t.pi1 for t in trajectories]),
            pi2=_column([t.pi2 for t in trajectories]),
            p1=p1,
            p2=p2,
            offset=float(offset),
            positivity_floor=float(positivity_floor),
        )

    @property
    def n(self) -> int:
        return int(self.y1.shape[0])

    @property
    def trajectories(self) -> list[Trajectory]:
        return [self.trajectory(i) for i in range(self.n)]

    def trajectory(self, i: int) -> Trajectory:
        return Trajectory(
            o1=self.o1[i].tolist(), a1=float(self.a1[i]), y1=float(self.y1[i]),
            o2=self.o2[i].tolist(), a2=float(self.a2[i]), y2=float(self.y2[i]),
            pi1=float(self.pi1[i]), pi2=float(self.pi2[i]),
        )

    def subset(self, index) -> "Dataset":
        """Rows selected by an integer or boolean index; metadata is carried over."""
        index = np.asarray(index)
        return replace(
            self,
            o1=_column(self.o1[index]), a1=_column(self.a1[index]), y1=_column(self.y1[index]),
            o2=_column(self.o2[index]), a2=_column(self.a2[index]), y2=_column(self.y2[index]),
            pi1=_column(self.pi1[index]), pi2=_column(self.pi2[index]),
        )

    def with_columns(self, **columns) -> "Dataset":
        return replace(self, **{name: _column(value) for name, value in columns.items()})

    def equals(self, other: "Dataset") -> bool:
        """Field-for-field exact equality (arrays compared element-wise)."""
        arrays = ("o1", "a1", "y1", "o2", "a2", "y2", "pi1", "pi2")
        return (
            all(np.array_equal(getattr(self, name), getattr(other, name)) for name in arrays)
            and (self.p1, self.p2, self.offset, self.positivity_floor)
            == (other.p1, other.p2, other.offset, other.positivity_floor)
        )
