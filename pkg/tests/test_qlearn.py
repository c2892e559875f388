"""Q-learning baseline: backward regressions and greedy decisions."""
import numpy as np
import pytest

from dtrlab.core import history_matrix
from dtrlab.models.data import Dataset
from dtrlab.models.specs import QForm
from dtrlab.qlearn import QModel, QPolicy, fit_q1, fit_q2, fit_q_learning, pseudo_outcome, q_policy

from conftest import make_dataset


def _with_intercept(H: np.ndarray) -> np.ndarray:
    return np.column_stack([np.ones(H.shape[0]), H])


@pytest.fixture
def noiseless():
    """Y2 = H~2'c + A2 H~2'd exactly, with H~2 = (1, H2)."""
    rng = np.random.default_rng(0)
    n = 200
    base = Dataset.from_arrays(
        o1=rng.standard_normal((n, 2)), a1=rng.choice([-1.0, 1.0], n), y1=rng.uniform(1, 2, n),
        o2=rng.standard_normal((n, 1)), a2=rng.choice([-1.0, 1.0], n), y2=np.ones(n),
        pi1=np.full(n, 0.5), pi2=np.full(n, 0.5),
    )
    c = rng.standard_normal(6)
    d = rng.standard_normal(6)
    Ht = _with_intercept(history_matrix(base, 2))
    return base.with_columns(y2=Ht @ c + base.a2 * (Ht @ d)), c, d


class TestFitQ2:
    def test_recovers_noiseless_coefficients(self, noiseless):
        data, c, d = noiseless
        q2 = fit_q2(data)
        np.testing.assert_allclose(q2.theta0, c, atol=1e-6)
        np.testing.assert_allclose(q2.theta1, d, atol=1e-6)
        residual = q2.predict(history_matrix(data, 2), data.a2) - data.y2
        assert np.mean(residual ** 2) < 1e-10

    @pytest.mark.parametrize("form", [QForm.LINEAR, QForm.MLP])
    def test_constant_target(self, toy_dataset, form):
        d = toy_dataset.with_columns(y2=np.full(toy_dataset.n, 2.5))
        q2 = fit_q2(d, form, seed=1)
        np.testing.assert_allclose(q2.predict(history_matrix(d, 2), d.a2), 2.5, atol=1e-3)
        np.testing.assert_allclose(q2.contrast(history_matrix(d, 2)), 0.0, atol=1e-3)

    def test_ridge_keeps_tiny_samples_finite(self, toy_dataset):
        d = toy_dataset.subset(np.arange(3))
        q2 = fit_q2(d)
        assert np.all(np.isfinite(q2.theta0)) and np.all(np.isfinite(q2.theta1))

    def test_mlp_form(self, toy_dataset):
        q2 = fit_q2(toy_dataset, QForm.MLP, seed=1)
        assert q2.form == QForm.MLP
        predictions = q2.predict(history_matrix(toy_dataset, 2), toy_dataset.a2)
        assert predictions.shape == (toy_dataset.n,) and np.all(np.isfinite(predictions))


class TestPseudoOutcome:
    def test_no_interaction(self, toy_dataset):
        theta0 = np.arange(5.0) / 10.0
        q2 = QModel(stage=2, form=QForm.LINEAR, theta0=theta0, theta1=np.zeros(5))
        H2 = history_matrix(toy_dataset, 2)
        np.testing.assert_allclose(pseudo_outcome(toy_dataset, q2), toy_dataset.y1 + _with_intercept(H2) @ theta0)

    def test_interaction_adds_absolute_value(self, toy_dataset):
        q2 = QModel(stage=2, form=QForm.LINEAR, theta0=np.zeros(5), theta1=np.array([3.0, 0, 0, 0, 0]))
        np.testing.assert_allclose(pseudo_outcome(toy_dataset, q2), toy_dataset.y1 + 3.0)

    def test_brute_force_max(self):
        rng = np.random.default_rng(3)
        d = make_dataset(n=100, seed=9)
        q2 = QModel(stage=2, form=QForm.LINEAR, theta0=rng.standard_normal(5), theta1=rng.standard_normal(5))
        H2 = history_matrix(d, 2)
        brute = d.y1 + np.maximum(q2.predict(H2, 1.0), q2.predict(H2, -1.0))
        shortcut = d.y1 + _with_intercept(H2) @ q2.theta0 + np.abs(_with_intercept(H2) @ q2.theta1)
        np.testing.assert_allclose(brute, shortcut, rtol=1e-12, atol=1e-12)


class TestFitQ1:
    def test_recovers_stage_one_coefficients(self, toy_dataset):
        rng = np.random.default_rng(5)
        c, d = rng.standard_normal(2), rng.standard_normal(2)
        Ht = _with_intercept(history_matrix(toy_dataset, 1))
        pseudo = Ht @ c + toy_dataset.a1 * (Ht @ d)
        q1 = fit_q1(toy_dataset, pseudo)
        np.testing.assert_allclose(q1.theta0, c, atol=1e-6)
        np.testing.assert_allclose(q1.theta1, d, atol=1e-6)

    @pytest.mark.parametrize("form", [QForm.LINEAR, QForm.MLP])
    def test_constant_target(self, toy_dataset, form):
        q1 = fit_q1(toy_dataset, np.full(toy_dataset.n, -1.0), form, seed=2)
        np.testing.assert_allclose(q1.predict(history_matrix(toy_dataset, 1), toy_dataset.a1), -1.0, atol=1e-3)


class TestQPolicy:
    def _stage_one(self, theta1) -> QModel:
        return QModel(stage=1, form=QForm.LINEAR, theta0=np.array([1.0, -2.0]), theta1=np.asarray(theta1, float))

    def test_zero_contrast_treats(self):
        q1 = self._stage_one([0.0, 0.0])
        policy = q_policy(q1, q1)
        np.testing.assert_array_equal(policy.d1(np.array([[0.3], [-4.0]])), [1.0, 1.0])

    def test_negative_contrast(self):
        policy = q_policy(self._stage_one([-2.0, 0.0]), self._stage_one([0.0, 0.0]))
        assert policy.d1(np.array([[5.0]]))[0] == -1.0

    def test_agrees_with_sign_of_interaction(self):
        rng = np.random.default_rng(6)
        q1 = self._stage_one(rng.standard_normal(2))
        H1 = rng.standard_normal((100, 1))
        expected = np.where(_with_intercept(H1) @ q1.theta1 >= 0, 1.0, -1.0)
        np.testing.assert_array_equal(q_policy(q1, q1).d1(H1), expected)

    def test_dict_round_trip_keeps_decisions(self, setting_two_sample):
        _, _, policy = fit_q_learning(setting_two_sample)
        back = QPolicy.from_dict(policy.to_dict())
        H2 = history_matrix(setting_two_sample, 2)
        np.testing.assert_array_equal(back.d2(H2), policy.d2(H2))
        assert back.offset == setting_two_sample.offset


class TestPipeline:
    @pytest.mark.parametrize("form", list(QForm))
    def test_deterministic_per_seed(self, setting_two_sample, form):
        first = fit_q_learning(setting_two_sample, form, seed=4)
        second = fit_q_learning(setting_two_sample, form, seed=4)
        H1 = history_matrix(setting_two_sample, 1)
        np.testing.assert_array_equal(first[0].predict(H1, 1.0), second[0].predict(H1, 1.0))
        np.testing.assert_array_equal(first[2].d1(H1), second[2].d1(H1))

    def test_models_carry_stage_and_offset(self, setting_two_sample):
        q1, q2, policy = fit_q_learning(setting_two_sample)
        assert (q1.stage, q2.stage) == (1, 2)
        assert policy.offset == setting_two_sample.offset
