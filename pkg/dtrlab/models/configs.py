"""
Validated configuration objects for training, simulation and benchmark runs.
"""
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from dtrlab.models.specs import PolicyClass, QForm

DESK_SCALE_REPS = 50
PAPER_SCALE_REPS = 500


class TrainConfig(BaseModel):
    """
    Hyperparameters of the surrogate-value ascent.

    batch_size <= n is checked by the trainer, which is the first place n is known.
    """
    model_config = ConfigDict(frozen=True)

    surrogate: str = "arctan"
    epochs: int = Field(default=20, ge=1)
    batch_size: int = Field(default=128, ge=1)
    learning_rate: float = Field(default=1e-3, gt=0)
    rmsprop_decay: float = Field(default=0.9, gt=0, lt=1)
    rmsprop_eps: float = Field(default=1e-8, gt=0)
    l1_lambda: float = Field(default=0.0, ge=0)
    clip_norm: float = Field(default=100.0, gt=0)
    dropout: float = Field(default=0.5, ge=0, lt=1)
    seed: int = 0
    allow_inconsistent_surrogate: bool = False


class SettingSpec(BaseModel):
    """Which simulation setting to draw from, how many rows, and the seed."""
    model_config = ConfigDict(frozen=True)

    id: int = Field(ge=1, le=5)
    n: int = Field(ge=1)
    seed: int = 0


class ArmSpec(BaseModel):
    """
    One method compared in a benchmark.

    method "dtreslo" trains a surrogate-value policy pair of the given classes;
    method "qlearn" fits the regression baseline of the given Q form.
    surrogate overrides the [train] surrogate for this arm only.
    """
    name: str
    method: Literal["dtreslo", "qlearn"] = "dtreslo"
    class1: PolicyClass = PolicyClass.LINEAR
    class2: PolicyClass = PolicyClass.LINEAR
    q_form: QForm = QForm.LINEAR
    surrogate: str | None = None


class ExperimentConfig(BaseModel):
    """
    A benchmark run: where data comes from, what is trained, how it is evaluated.

    Exactly one of setting / data must be given. Benchmarks with replications
    need a setting, because every replication draws a fresh training set.
    """
    setting: int | None = Field(default=None, ge=1, le=5)
    data: Path | None = None
    n_train: int = Field(default=2500, ge=1)
    n_eval: int = Field(default=10000, ge=1)
    reps: int = DESK_SCALE_REPS
    scale: Literal["desk", "paper"] = "desk"
    seed: int = 0
    out_dir: Path = Path("out")
    evaluation: list[Literal["mc", "ipw", "dr"]] = ["mc"]
    train: TrainConfig = TrainConfig()
    arms: list[ArmSpec] = []

    @field_validator("reps")
    @classmethod
    def _positive_reps(cls, value: int) -> int:
        if value < 1:
            raise ValueError(f"reps must be >= 1, got {value}")
        return value

    @field_validator("data")
    @classmethod
    def _data_exists(cls, value: Path | None) -> Path | None:
        if value is not None and not value.exists():
            raise ValueError(f"data file {value} does not exist")
        return value

    @model_validator(mode="after")
    def _one_source(self) -> "ExperimentConfig":
        if (self.setting is None) == (self.data is None):
            raise ValueError("exactly one of 'setting' or 'data' must be given")
        if not self.arms:
            raise ValueError("at least one [arm NAME] section is required")
        names = [arm.name for arm in self.arms]
        if len(set(names)) != len(names):
            raise ValueError(f"arm names must be unique, got {names}")
        return self
