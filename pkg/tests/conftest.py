"""Shared fixtures: small hand-built datasets, simulated samples and linear policy pairs."""
import numpy as np
import pytest

from dtrlab.core import history_matrix
from dtrlab.models.configs import SettingSpec
from dtrlab.models.data import Dataset, Trajectory
from dtrlab.models.specs import PolicyClass
from dtrlab.policy import Policy, PolicyPair
from dtrlab.simlab import generate


def make_dataset(n: int = 20, p1: int = 1, p2: int = 1, seed: int = 0, pi: float = 0.5) -> Dataset:
    """Random continuous covariates, +-1 actions, positive rewards, constant propensities."""
    rng = np.random.default_rng(seed)
    return Dataset.from_arrays(
        o1=rng.standard_normal((n, p1)),
        a1=rng.choice([-1.0, 1.0], n),
        y1=rng.uniform(0.5, 3.0, n),
        o2=rng.standard_normal((n, p2)),
        a2=rng.choice([-1.0, 1.0], n),
        y2=rng.uniform(0.5, 3.0, n),
        pi1=np.full(n, pi),
        pi2=np.full(n, pi),
    )


def linear_pair(d: Dataset, intercept1: float = 0.0, intercept2: float = 0.0) -> PolicyPair:
    """Zero-weight linear policies with the given intercepts."""
    rng = np.random.Generator(np.random.Philox(0))
    f1 = Policy.initial(PolicyClass.LINEAR, 1, history_matrix(d, 1), d.p1, d.p2, rng)
    f2 = Policy.initial(PolicyClass.LINEAR, 2, history_matrix(d, 2), d.p1, d.p2, rng)
    theta1 = np.zeros_like(f1.params)
    theta2 = np.zeros_like(f2.params)
    theta1[0] = intercept1
    theta2[0] = intercept2
    return PolicyPair(f1=f1.with_params(theta1), f2=f2.with_params(theta2), offset=d.offset)


@pytest.fixture
def toy_dataset() -> Dataset:
    return make_dataset()


@pytest.fixture
def three_rows() -> Dataset:
    return Dataset.from_trajectories([
        Trajectory(o1=[0.3], a1=1, y1=2.0, o2=[-1.0], a2=1, y2=1.0, pi1=0.5, pi2=0.5),
        Trajectory(o1=[-0.7], a1=-1, y1=1.5, o2=[0.2], a2=1, y2=0.5, pi1=0.4, pi2=0.25),
        Trajectory(o1=[1.1], a1=1, y1=0.2, o2=[0.9], a2=-1, y2=3.0, pi1=0.8, pi2=0.5),
    ])


@pytest.fixture(scope="session")
def setting_two_sample() -> Dataset:
    return generate(SettingSpec(id=2, n=400, seed=11))


@pytest.fixture(scope="session")
def setting_one_sample() -> Dataset:
    return generate(SettingSpec(id=1, n=2500, seed=7))
