"""Consistency laboratory: psi-transform maximizers, hinge LP, exact discrete values, sweeps."""
import itertools

import numpy as np
import pytest

from dtrlab.consistency import (
    COUNTEREXAMPLE_TAU, consistency_report, exact_values_discrete, hinge_sign_check, hinge_sweep, lab_report,
    lookup_scores, maximize_psi_transform, optimal_decisions, optimal_rule_from_tau, psi_transform,
    random_discrete_law, random_linear_scores, regret_sweep, tau_sign_sweep,
)
from dtrlab.errors import PreconditionError, UnsupportedSurrogateError
from dtrlab.models.law import DiscreteDtr, HistoryNode, StageTwoOutcome, Transition
from dtrlab.simlab import setting_one_law
from dtrlab.surrogate import SIGMOID_KEYS, get_surrogate


def _philox(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def _constant(value: float):
    return lambda H: np.full(np.atleast_2d(H).shape[0], value)


@pytest.fixture
def single_point_law() -> DiscreteDtr:
    """One history; (+1, +1) earns 1 + 4, every other path at most 1.5."""
    def outcome(y1: float, plus: float, minus: float) -> Transition:
        return Transition(
            y1=y1, o2=[0.0], prob=1.0, pi2={1: 0.5, -1: 0.5},
            y2={1: StageTwoOutcome(values=[plus], probs=[1.0]), -1: StageTwoOutcome(values=[minus], probs=[1.0])},
        )

    node = HistoryNode(
        h1=[0.0], prob=1.0, pi1={1: 0.5, -1: 0.5},
        transitions={1: [outcome(1.0, 4.0, 1.0)], -1: [outcome(0.5, 1.0, 1.0)]},
    )
    return DiscreteDtr(nodes=[node])


class TestTauRule:
    def test_counterexample_rule(self):
        rule = optimal_rule_from_tau(COUNTEREXAMPLE_TAU)
        assert (rule.d1, rule.d2_plus, rule.d2_minus) == (-1, 1, 1)

    def test_matches_enumeration(self):
        rng = _philox(2)
        for _ in range(50):
            tau = tuple(float(t) for t in rng.uniform(1.0, 10.0, 4))
            payoff = {
                (d1, d2p, d2m): (tau[0] if d2p > 0 else tau[1]) if d1 > 0 else (tau[2] if d2m > 0 else tau[3])
                for d1, d2p, d2m in itertools.product((1, -1), repeat=3)
            }
            best = max(payoff.values())
            rule = optimal_rule_from_tau(tau)
            assert payoff[(rule.d1, rule.d2_plus, rule.d2_minus)] == best

    def test_rejects_nonpositive_tau(self):
        with pytest.raises(ValueError):
            optimal_rule_from_tau((0.0, 1.0, 1.0, 1.0))


class TestPsiTransform:
    @pytest.mark.parametrize("key", SIGMOID_KEYS)
    def test_origin_is_tau_sum(self, key):
        assert psi_transform(get_surrogate(key), (0.0, 0.0, 0.0), COUNTEREXAMPLE_TAU) == pytest.approx(17.0)

    @pytest.mark.parametrize("box, step", [(0.0, 0.5), (50.0, 0.0), (-1.0, 0.5)])
    def test_invalid_search_region(self, box, step):
        with pytest.raises(ValueError):
            maximize_psi_transform(get_surrogate("arctan"), COUNTEREXAMPLE_TAU, box, step)

    def test_maximizer_beats_grid_start(self):
        s = get_surrogate("arctan")
        best = maximize_psi_transform(s, (3.0, 1.0, 2.0, 2.5), box=10.0)
        assert best.value == pytest.approx(psi_transform(s, (best.x, best.y, best.z), (3.0, 1.0, 2.0, 2.5)))
        assert best.value >= psi_transform(s, (0.0, 0.0, 0.0), (3.0, 1.0, 2.0, 2.5))
        assert max(abs(best.x), abs(best.y), abs(best.z)) <= 10.0


class TestConsistencyReport:
    @pytest.mark.parametrize("key", SIGMOID_KEYS)
    def test_sigmoid_kinds_are_consistent(self, key):
        report = consistency_report(get_surrogate(key), COUNTEREXAMPLE_TAU)
        assert report.verdict == "consistent"
        assert report.sign_x == -1 == report.d1_star
        assert report.hinge_x_nonpositive is None

    def test_exponential_concave_is_not(self):
        report = consistency_report(get_surrogate("exp-concave"), COUNTEREXAMPLE_TAU)
        assert report.verdict == "inconsistent"
        assert report.sign_x == 1
        assert report.x > 0.0
        assert report.d1_star == -1

    def test_hinge_carries_lp_check(self):
        report = consistency_report(get_surrogate("hinge"), (4.0, 3.0, 3.0, 3.0))
        assert report.hinge_x_nonpositive is True

    def test_hinge_outside_region_skips_lp_check(self):
        report = consistency_report(get_surrogate("hinge"), COUNTEREXAMPLE_TAU)
        assert report.hinge_x_nonpositive is None


class TestHinge:
    def test_sign_check(self):
        assert hinge_sign_check((4.0, 3.0, 3.0, 3.0))

    @pytest.mark.parametrize("tau", [(3.0, 4.0, 1.0, 1.0), (10.0, 1.0, 1.0, 1.0), (4.0, 4.0, 1.0, 1.0)])
    def test_preconditions(self, tau):
        with pytest.raises(PreconditionError):
            hinge_sign_check(tau)


class TestExactValues:
    def test_saturated_scores_attain_calibrated_limit(self, single_point_law):
        exact = exact_values_discrete(single_point_law, _constant(1e3), _constant(1e3), get_surrogate("logistic"))
        assert exact.value == pytest.approx(5.0)
        assert exact.optimal_value == pytest.approx(5.0)
        assert exact.surrogate_value == pytest.approx(20.0)
        assert exact.optimal_surrogate_value == pytest.approx(20.0)
        assert exact.regret == pytest.approx(0.0)
        assert exact.surrogate_regret == pytest.approx(0.0, abs=1e-12)

    def test_wrong_first_decision_has_regret(self, single_point_law):
        exact = exact_values_discrete(single_point_law, _constant(-1e3), _constant(1e3), get_surrogate("logistic"))
        assert exact.value == pytest.approx(1.5)
        assert exact.regret == pytest.approx(3.5)

    @pytest.mark.parametrize("seed", range(5))
    def test_optimal_lookup_has_no_regret(self, seed):
        law = random_discrete_law(_philox(seed))
        d1, d2 = optimal_decisions(law)
        exact = exact_values_discrete(law, lookup_scores(d1), lookup_scores(d2), get_surrogate("arctan"))
        assert exact.regret == pytest.approx(0.0, abs=1e-9)

    def test_setting_one_lookup_has_no_regret(self):
        law = setting_one_law()
        d1, d2 = optimal_decisions(law)
        exact = exact_values_discrete(law, lookup_scores(d1), lookup_scores(d2), get_surrogate("rational"))
        assert exact.regret == pytest.approx(0.0, abs=1e-9)

    @pytest.mark.parametrize("key", SIGMOID_KEYS)
    def test_regret_bound_on_setting_one(self, key):
        s = get_surrogate(key)
        law = setting_one_law()
        rng = _philox(9)
        for _ in range(5):
            f1, f2 = random_linear_scores(rng, p1=3, p2=1)
            exact = exact_values_discrete(law, f1, f2, s)
            assert exact.regret <= exact.surrogate_regret / (s.c_phi / 2.0) ** 2 + 1e-9

    def test_rejects_comparators(self, single_point_law):
        with pytest.raises(UnsupportedSurrogateError):
            exact_values_discrete(single_point_law, _constant(1.0), _constant(1.0), get_surrogate("hinge"))

    @pytest.mark.parametrize("max_support", [4, 8, 16])
    def test_random_law_support(self, max_support):
        rng = _philox(max_support)
        for _ in range(20):
            assert random_discrete_law(rng, max_support).support_size <= max_support


class TestSweeps:
    @pytest.mark.parametrize("key", [*SIGMOID_KEYS, "exp-concave"])
    def test_tau_sign_sweep(self, key):
        report = tau_sign_sweep(get_surrogate(key), trials=10, seed=1)
        assert report.passed, report.examples
        assert report.trials == 10

    def test_tau_sign_sweep_rejects_hinge(self):
        with pytest.raises(UnsupportedSurrogateError):
            tau_sign_sweep(get_surrogate("hinge"), trials=1)

    def test_hinge_sweep(self):
        assert hinge_sweep(trials=20, seed=1).passed

    def test_regret_sweep(self):
        report = regret_sweep(trials=20, seed=1)
        assert report.passed, report.examples
        assert report.trials == 20 * len(SIGMOID_KEYS)

    def test_small_lab_report(self):
        report = lab_report(tau_trials=3, hinge_trials=3, regret_trials=3)
        assert report["passed"]
        verdicts = {c["surrogate"]: c["verdict"] for c in report["counterexamples"]}
        assert verdicts == {**{key: "consistent" for key in SIGMOID_KEYS}, "exp-concave": "inconsistent"}

    @pytest.mark.slow
    def test_full_lab_report(self):
        assert lab_report()["passed"]
