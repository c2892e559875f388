"""
Core data operations: stage histories, dataset validation, reward offsets, CSV I/O.

Execution Flow Map:
• build_history → single-trajectory H1 / H2 (H2 order is O1, Y1, O2, A1)
• history_matrix → the same construction column-wise for a whole Dataset
• validate → list of Violation (never raises)
• apply_offset → shifted copy, offset accumulates; raises OffsetError on non-positive rewards
• write_csv / read_csv → fixed-header CSV plus a small JSON sidecar holding offset and floor

External I/O: local filesystem only (pandas for CSV, json for the sidecar).
"""
import json
import logging
from dataclasses import replace
from pathlib import Path

import numpy as np
import pandas as pd

from dtrlab.errors import OffsetError, PositivityError, StageMismatchError
from dtrlab.models.data import DEFAULT_POSITIVITY_FLOOR, Dataset, History, Trajectory, Violation

logger = logging.getLogger(__name__)

SIDECAR_SUFFIX = ".meta.json"


def build_history(t: Trajectory, stage: int) -> History:
    if stage == 1:
        return History(stage=1, h=list(t.o1))
    if stage == 2:
        return History(stage=2, h=[*t.o1, t.y1, *t.o2, t.a1])
    raise StageMismatchError(f"stage must be 1 or 2, got {stage}")


def history_matrix(d: Dataset, stage: int) -> np.ndarray:
    """Row i is build_history(trajectory i, stage).h."""
    if stage == 1:
        return np.array(d.o1, dtype=np.float64)
    if stage == 2:
        return np.column_stack([d.o1, d.y1, d.o2, d.a1])
    raise StageMismatchError(f"stage must be 1 or 2, got {stage}")


def stage_two_history(o1: np.ndarray, y1: np.ndarray, o2: np.ndarray, a1: np.ndarray) -> np.ndarray:
    """H2 from raw columns; used by generators that need H2 before a Dataset exists."""
    n = y1.shape[0]
    return np.column_stack([np.reshape(o1, (n, -1)), y1, np.reshape(o2, (n, -1)), a1])


def validate(d: Dataset) -> list[Violation]:
    """
    Check identifiability assumptions and shape consistency.

    Reports non-binary actions, propensities outside [floor, 1], non-positive
    rewards and dimension mismatches. An empty list means the dataset is valid.
    """
    violations: list[Violation] = []
    n = d.n

    for name in ("a1", "o1", "o2", "a2", "y2", "pi1", "pi2"):
        length = getattr(d, name).shape[0]
        if length != n:
            violations.append(Violation(row=None, field=name, message=f"has {length} rows, expected {n}"))
    if violations:
        return violations

    for name, declared in (("o1", d.p1), ("o2", d.p2)):
        block = getattr(d, name)
        if block.shape[1] != declared:
            violations.append(Violation(
                row=None, field=name, message=f"has {block.shape[1]} columns, declared {declared}"
            ))
        for row in np.flatnonzero(~np.isfinite(block).all(axis=1)):
            violations.append(Violation(row=int(row), field=name, message="covariate length mismatch or non-finite value"))

    for name in ("a1", "a2"):
        for row in np.flatnonzero(~np.isin(getattr(d, name), (-1.0, 1.0))):
            violations.append(Violation(
                row=int(row), field=name, message=f"action {getattr(d, name)[row]!r} not in {{-1, +1}}"
            ))

    for name in ("pi1", "pi2"):
        values = getattr(d, name)
        bad = ~((values >= d.positivity_floor) & (values <= 1.0))
        for row in np.flatnonzero(bad):
            violations.append(Violation(
                row=int(row), field=name,
                message=f"propensity {values[row]!r} outside [{d.positivity_floor}, 1]",
            ))

    for name in ("y1", "y2"):
        values = getattr(d, name)
        for row in np.flatnonzero(~(values > 0)):
            violations.append(Violation(
                row=int(row), field=name, message=f"reward {values[row]!r} is not positive after offset {d.offset}"
            ))

    return violations


def require_positivity(d: Dataset) -> None:
    """
    Raises:
        PositivityError: any stored propensity below the dataset's floor.
    """
    low = min(float(d.pi1.min()), float(d.pi2.min()))
    if low < d.positivity_floor:
        raise PositivityError(f"propensity {low} below positivity floor {d.positivity_floor}")


def apply_offset(d: Dataset, c: float) -> Dataset:
    """
    Add c to both reward columns and accumulate it in d.offset.

    Raises:
        OffsetError: if a shifted reward would not be strictly positive.
    """
    y1 = d.y1 + c
    y2 = d.y2 + c
    if not (y1.min() > 0 and y2.min() > 0):
        raise OffsetError(
            f"offset {c} leaves non-positive rewards (min y1+c={y1.min()}, min y2+c={y2.min()})"
        )
    if c == 0:
        return d
    return replace(d.with_columns(y1=y1, y2=y2), offset=d.offset + c)


def smallest_offset(y1: np.ndarray, y2: np.ndarray, step: float = 0.5, margin: float = 0.1) -> float:
    """Smallest multiple of step that lifts every reward to at least margin."""
    low = min(float(np.min(y1)), float(np.min(y2)))
    if low >= margin:
        return 0.0
    return float(np.ceil((margin - low) / step) * step)


def csv_columns(p1: int, p2: int) -> list[str]:
    return [
        *(f"o1_{j}" for j in range(p1)), "a1", "y1",
        *(f"o2_{j}" for j in range(p2)), "a2", "y2", "pi1", "pi2",
    ]


def write_csv(d: Dataset, path: str | Path) -> Path:
    """
    Write the fixed-header CSV and a sidecar with offset / positivity floor.

    Floats are written with repr precision so a read-back is bit-exact.
    """
    path = Path(path)
    frame = pd.DataFrame(
        np.column_stack([d.o1, d.a1, d.y1, d.o2, d.a2, d.y2, d.pi1, d.pi2]),
        columns=csv_columns(d.p1, d.p2),
    )
    frame.to_csv(path, index=False, float_format="%.17g", encoding="utf-8", lineterminator="\n")
    sidecar = path.with_name(path.name + SIDECAR_SUFFIX)
    sidecar.write_text(json.dumps({
        "p1": d.p1, "p2": d.p2, "offset": d.offset, "positivity_floor": d.positivity_floor,
    }, indent=2), encoding="utf-8")
    logger.info(f"Wrote {d.n} trajectories to {path}")
    return path


def read_csv(path: str | Path, positivity_floor: float | None = None) -> Dataset:
    """
    Load a dataset written by write_csv (or any CSV with the same header).

    Offset and floor come from the sidecar when present; an explicit
    positivity_floor argument wins over the sidecar.
    """
    path = Path(path)
    frame = pd.read_csv(path, encoding="utf-8", dtype=np.float64)
    o1_cols = [c for c in frame.columns if c.startswith("o1_")]
    o2_cols = [c for c in frame.columns if c.startswith("o2_")]
    expected = csv_columns(len(o1_cols), len(o2_cols))
    if list(frame.columns) != expected:
        raise StageMismatchError(f"{path}: header {list(frame.columns)} does not match {expected}")

    meta = {"offset": 0.0, "positivity_floor": DEFAULT_POSITIVITY_FLOOR}
    sidecar = path.with_name(path.name + SIDECAR_SUFFIX)
    if sidecar.exists():
        meta.update(json.loads(sidecar.read_text(encoding="utf-8")))
    if positivity_floor is not None:
        meta["positivity_floor"] = positivity_floor

    return Dataset.from_arrays(
        o1=frame[o1_cols].to_numpy(), a1=frame["a1"].to_numpy(), y1=frame["y1"].to_numpy(),
        o2=frame[o2_cols].to_numpy(), a2=frame["a2"].to_numpy(), y2=frame["y2"].to_numpy(),
        pi1=frame["pi1"].to_numpy(), pi2=frame["pi2"].to_numpy(),
        offset=float(meta["offset"]), positivity_floor=float(meta["positivity_floor"]),
        source=str(path),
    )
