"""Simulation-study reproductions: learned values against the oracle, class ordering, sample-size trend, runtime.

Bands are anchored on the oracle value of each setting's generating formulas,
estimated by Monte Carlo at ORACLE_EVAL draws.
"""
import numpy as np
import pytest

from dtrlab.experiment import run_benchmark
from dtrlab.models.configs import ArmSpec, ExperimentConfig, SettingSpec, TrainConfig
from dtrlab.models.specs import PolicyClass
from dtrlab.simlab import generate, mc_value, oracle_rule
from dtrlab.trainer import train

REPS = 50
N_EVAL = 10_000
ORACLE_EVAL = 100_000

LINEAR = ArmSpec(name="linear")
MLP = ArmSpec(name="mlp", class1=PolicyClass.MLP, class2=PolicyClass.MLP)


def _oracle_value(setting: int) -> float:
    return mc_value(setting, oracle_rule(setting), ORACLE_EVAL, seed=1000 + setting).value


def _benchmark(setting: int, n_train: int, *arms: ArmSpec) -> dict[str, tuple[float, float]]:
    """Mean Monte Carlo value and its standard error per arm over REPS replications."""
    cfg = ExperimentConfig(
        setting=setting, n_train=n_train, n_eval=N_EVAL, reps=REPS, seed=setting,
        evaluation=["mc"], arms=list(arms),
    )
    result = run_benchmark(cfg)
    assert (result.rows["status"] == "ok").all()
    return {row.arm: (row.mean, row.sd / np.sqrt(row.reps)) for row in result.summary.itertuples()}


@pytest.mark.slow
class TestValueReproduction:
    def test_setting_one_linear_near_oracle(self):
        v_star = _oracle_value(1)
        mean, _ = _benchmark(1, 2500, LINEAR)["linear"]
        assert v_star - 0.15 <= mean <= v_star + 0.02

    def test_setting_three_linear_near_oracle(self):
        v_star = _oracle_value(3)
        mean, _ = _benchmark(3, 2500, LINEAR)["linear"]
        assert v_star - 0.6 <= mean <= v_star + 0.05

    def test_setting_two_mlp_beats_linear(self):
        values = _benchmark(2, 2500, LINEAR, MLP)
        assert values["mlp"][0] - values["linear"][0] >= 0.2


@pytest.mark.slow
class TestSampleSizeTrend:
    def test_setting_three_value_grows_with_n(self):
        means = {n: _benchmark(3, n, LINEAR)["linear"] for n in (250, 2500, 5000)}
        (small, se_small), (medium, se_medium), (large, se_large) = means[250], means[2500], means[5000]
        assert medium >= small - se_small
        assert large >= max(small, medium) - np.hypot(se_large, se_medium)


class TestRuntime:
    def test_linear_training_at_5000(self):
        d = generate(SettingSpec(id=1, n=5000, seed=0))
        result = train(d, PolicyClass.LINEAR, PolicyClass.LINEAR, TrainConfig())
        assert result.seconds < 60.0
