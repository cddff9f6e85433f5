import json
import math

import numpy as np
import pytest

from boundary_lab.scenarios import (
    SCENARIOS,
    Assertion,
    ScenarioReport,
    collision_probability,
    collision_tester,
    episode_return,
    scenario_figure2,
    scenario_imitation,
    scenario_sq_loss_necessity,
    scenario_unverifiability,
)
from boundary_lab.serialization import dumps_report


class TestAssertion:
    def test_relations(self):
        assert Assertion("x", 1.0, 1.0 + 1e-13, 1e-12).passed
        assert not Assertion("x", 1.0, 1.1, 1e-12).passed
        assert Assertion("x", 0.5, 0.49, 0.0, relation="le").passed
        assert Assertion("x", 0.5, 0.51, 0.02, relation="le").passed
        assert not Assertion("x", 0.5, 0.4, relation="ge").passed
        assert Assertion("x", None, None).passed and not Assertion("x", 0.5, None, 1.0).passed
        assert Assertion("x", "f2", "f2").passed

    def test_report_shape(self):
        rep = ScenarioReport("demo")
        rep.check("a", 1, 1)
        d = rep.to_dict()
        assert set(d) == {"scenario", "assertions", "pass", "details"}
        assert set(d["assertions"][0]) >= {"name", "expected", "actual", "tol", "provenance", "pass"}
        assert rep["a"].passed
        with pytest.raises(KeyError):
            rep["b"]


class TestFigure2:
    def test_default(self):
        rep = scenario_figure2()
        assert rep.passed, [a for a in rep.assertions if not a.passed]
        assert rep["eps_approx in (a)"].actual == pytest.approx(0.25, abs=1e-12)
        assert rep["robust bound in (a)"].actual == pytest.approx(-0.5, abs=1e-12)
        assert rep["classical bound in (b)"].actual == 0.5
        assert rep["invariant bound in (a)"].actual == 0.5
        assert rep["C"].actual == 1.0
        assert {a.provenance for a in rep.assertions} <= {"reported", "derived", "constructed"}

    def test_perturbed_constant(self):
        rep = scenario_figure2(constant=0.6)
        assert not rep["constant is a valid reward function in (a)"].passed
        assert rep["reward residual of the constant in (a)"].actual == pytest.approx(0.1, abs=1e-12)
        assert rep["valid-reward verdict unchanged across the split"].passed

    def test_bernoulli_point_seven(self):
        rep = scenario_figure2(p=0.7)
        assert rep.passed
        assert rep["robust bound in (a)"].actual == pytest.approx(0.7 - 2 * math.sqrt(0.21), abs=1e-12)
        assert rep["robust bound in (a)"].provenance == "derived"


class TestSqLoss:
    def test_default(self):
        rep = scenario_sq_loss_necessity()
        assert rep.passed
        assert rep["L(f1)"].actual == pytest.approx(0.25, abs=1e-12)
        assert rep["L(f2)"].actual == pytest.approx(0.01, abs=1e-12)
        assert rep["population fit picks"].actual == "f2"
        assert rep["valid reward function"].actual is None

    def test_with_constant(self):
        rep = scenario_sq_loss_necessity(with_f3=True)
        assert rep.passed and rep["valid reward function"].actual == "f3"

    def test_skewed(self):
        rep = scenario_sq_loss_necessity(d0=(0.9, 0.1))
        assert rep.passed
        assert rep["f1 reward residual"].actual == pytest.approx(0.4, abs=1e-12)
        # both contexts pay 0.5, so the losses do not depend on how contexts are weighted
        assert rep["L(f1)"].actual == pytest.approx(0.25, abs=1e-12)
        assert rep["L(f2)"].actual == pytest.approx(0.01, abs=1e-12)


class TestUnverifiability:
    def test_tester_rules(self):
        assert collision_tester(np.array([3, 3]), np.array([0, 1]))
        assert not collision_tester(np.array([3, 5, 3]), np.array([1, 0, 1]))
        assert collision_tester(np.arange(100), np.arange(100) % 2)
        assert not collision_tester(np.arange(100), np.ones(100, dtype=int))

    def test_collision_probability(self):
        assert collision_probability(1, 2) == 1.0
        assert collision_probability(10, 1) == 0.0
        assert collision_probability(365, 23) == pytest.approx(0.5073, abs=1e-4)
        assert collision_probability(10**6, 100) <= 100 * 99 / (2 * 10**6)

    def test_large_domain(self):
        rep = scenario_unverifiability(10**6, 100, 2000, seed=0)
        assert rep.passed and rep.details["accuracy"] <= 0.52
        assert rep.details["birthday_ceiling"] == pytest.approx(0.5 + 100 * 99 / 4e6)

    def test_single_point(self):
        rep = scenario_unverifiability(1, 20, 500, seed=1)
        assert rep.details["accuracy"] >= 0.99

    def test_two_draws_one_point(self):
        # one duplicate pair catches the coin only half the time: accuracy near 3/4
        rep = scenario_unverifiability(1, 2, 4000, seed=2)
        assert abs(rep.details["accuracy"] - 0.75) <= 0.03

    def test_validation(self):
        with pytest.raises(ValueError):
            scenario_unverifiability(0, 5, 10)

    def test_seeded(self):
        a = scenario_unverifiability(1000, 30, 200, seed=9).to_dict()
        b = scenario_unverifiability(1000, 30, 200, seed=9).to_dict()
        assert a == b


class TestImitation:
    def test_default(self):
        rep = scenario_imitation()
        assert rep.passed
        assert rep["fine expert return"].actual == 1.0
        assert rep["cloned policy return"].actual == pytest.approx(0.5, abs=1e-12)
        assert rep["coarse optimal return"].actual == pytest.approx(0.9, abs=1e-12)
        assert rep["cloning a coarse-aware expert"].actual == pytest.approx(0.9, abs=1e-12)

    def test_seed_independent(self):
        for seed in range(5):
            assert scenario_imitation(seed, episodes=50).passed

    def test_episode_return_counts_steps(self):
        from boundary_lab.instances import imitation_coarse
        from boundary_lab.mdp import Policy

        m = imitation_coarse().mdp
        assert episode_return(m, Policy.deterministic([1, 0, 0, 0], 2), 1) == 0.0
        assert episode_return(m, Policy.deterministic([1, 0, 0, 0], 2), 3) == pytest.approx(0.9, abs=1e-12)


def test_registry_and_determinism():
    assert set(SCENARIOS) == {"figure2", "sq-loss-necessity", "unverifiability", "imitation"}
    a = dumps_report(scenario_figure2().to_dict())
    assert a == dumps_report(scenario_figure2().to_dict())
    json.loads(a)
