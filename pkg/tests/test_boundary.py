import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from boundary_lab.admissible import admissible_cb
from boundary_lab.assumptions import check_realizability, find_valid_reward_function
from boundary_lab.boundary import (
    RefinementMap,
    coupled_run,
    cosmetic_split,
    determinize,
    invariance_sweep,
    reward_derandomize_split,
    split_states,
    trajectory_distribution,
)
from boundary_lab.function_class import FunctionClass
from boundary_lab.instances import fig2a, fig2b, random_cb, random_class, random_mdp, random_mu
from boundary_lab.learners import empirical_loss_cb, population_target_loss
from boundary_lab.mdp import (
    Policy,
    RewardDistribution,
    TabularMDP,
    occupancy,
    optimal_q,
    policy_value,
    sample_transitions,
    validate,
)

seeds = st.integers(0, 2**32 - 1)
pt = RewardDistribution.point


def random_policy(rng, nS, nA):
    return Policy(rng.dirichlet(np.ones(nA), size=nS))


def random_counts(rng, nS):
    counts = rng.integers(1, 4, size=nS)
    weights = [rng.dirichlet(np.ones(c)) + 0.0 for c in counts]
    # renormalize after the floor so no copy gets zero weight
    weights = [(w + 0.05) / (w + 0.05).sum() for w in weights]
    return counts.tolist(), weights


def coin_flip(gamma=0.6):
    P = np.full((2, 2, 2), 0.5)
    P[1, 1] = [0.0, 1.0]
    R = [[RewardDistribution.bernoulli(0.5), pt(0.2)], [pt(1.0), RewardDistribution([1.0, 0.0], [0.25, 0.75])]]
    return TabularMDP(P, R, gamma, [1.0, 0.0])


def law_close(a: dict, b: dict, atol=1e-12):
    return all(abs(a.get(k, 0.0) - b.get(k, 0.0)) <= atol for k in set(a) | set(b))


class TestRefinementMap:
    def test_surjective(self):
        with pytest.raises(ValueError):
            RefinementMap([0, 0], [0.5, 0.5], 2)

    def test_emission_sums(self):
        with pytest.raises(ValueError):
            RefinementMap([0, 0, 1], [0.5, 0.4, 1.0], 2)

    def test_lift_push_round_trip(self, rng):
        rmap = RefinementMap([0, 1, 1, 2], [1.0, 0.3, 0.7, 1.0], 3)
        nu = rng.dirichlet(np.ones(6)).reshape(3, 2)
        assert np.allclose(rmap.push_sa(rmap.lift_sa(nu)), nu, atol=1e-15)
        f = rng.random((3, 2))
        assert np.array_equal(rmap.lift_table(f)[[1, 2]], f[[1, 1]])


class TestCosmetic:
    def test_identity_is_isomorphic(self):
        m = random_mdp(np.random.default_rng(0), 3, 2, 0.8)
        F = random_class(np.random.default_rng(1), 2, 3, 2)
        r = cosmetic_split(m, F, [1, 1, 1])
        assert np.array_equal(r.fine.P, m.P) and np.array_equal(r.fine.d0, m.d0)
        assert r.fine.rewards == m.rewards and r.lifted_class == F

    def test_fine_model_valid(self):
        m = random_mdp(np.random.default_rng(2), 3, 2, 0.8)
        r = cosmetic_split(m, random_class(np.random.default_rng(2), 2, 3, 2), [2, 1, 3])
        assert validate(r.fine) == [] and r.fine.nS == 6

    def test_two_way_split_preserves_values(self, rng):
        m = random_mdp(rng, 3, 2, 0.9)
        r = cosmetic_split(m, random_class(rng, 2, 3, 2), [1, 2, 1], [None, [0.5, 0.5], None])
        for _ in range(10):
            pi = random_policy(rng, 3, 2)
            assert abs(policy_value(r.fine, r.map.lift_policy(pi)) - policy_value(m, pi)) <= 1e-12

    @given(seeds)
    def test_occupancy_pushforward(self, seed):
        rng = np.random.default_rng(seed)
        m = random_mdp(rng, 3, 2, 0.7, sparsity=0.3)
        counts, weights = random_counts(rng, 3)
        r = cosmetic_split(m, random_class(rng, 2, 3, 2), counts, weights)
        pi = random_policy(rng, 3, 2)
        for t in (1, 2, 5):
            fine = occupancy(r.fine, r.map.lift_policy(pi), t)
            assert np.abs(r.map.push_sa(fine) - occupancy(m, pi, t)).max() <= 1e-12

    @given(seeds)
    def test_marginalization(self, seed):
        rng = np.random.default_rng(seed)
        m = random_mdp(rng, 2, 2, 0.7)
        counts, weights = random_counts(rng, 2)
        r = cosmetic_split(m, random_class(rng, 2, 2, 2), counts, weights)
        pi = random_policy(rng, 2, 2)
        for L in (1, 2, 3):
            coarse = trajectory_distribution(m, pi, L)
            fine = trajectory_distribution(r.fine, r.map.lift_policy(pi), L, phi=r.map.phi)
            assert law_close(coarse, fine)

    def test_errors(self):
        m = random_mdp(np.random.default_rng(0), 2, 2, 0.5)
        F = random_class(np.random.default_rng(0), 1, 2, 2)
        with pytest.raises(ValueError, match="zero"):
            cosmetic_split(m, F, [2, 1], [[1.0, 0.0], None])
        with pytest.raises(ValueError):
            cosmetic_split(m, F, [0, 1])
        with pytest.raises(ValueError):
            cosmetic_split(m, F, [1])

    def test_split_override_must_mix_back(self):
        prob = fig2b()
        with pytest.raises(ValueError):
            split_states(prob.mdp, prob.F, {0: [(0.5, {0: pt(1.0)}), (0.5, {0: pt(0.2)})]})


class TestDerandomize:
    def test_fig2b_becomes_fig2a(self):
        b, a = fig2b(), fig2a()
        r = reward_derandomize_split(b.mdp, b.F, (0, 0))
        # transitions are immaterial at gamma = 0; contexts, rewards and class must match
        assert r.fine.gamma == 0.0 and r.fine.nS == a.mdp.nS
        assert np.array_equal(r.fine.d0, a.mdp.d0)
        assert r.fine.rewards == a.mdp.rewards
        assert r.lifted_class == a.F
        assert r.kind == "derandomize"

    def test_deterministic_target(self):
        base = random_cb(np.random.default_rng(0), 2, 2)
        rewards = [list(row) for row in base.rewards]
        rewards[1][0] = pt(0.4)
        m = TabularMDP(base.P, rewards, 0.0, base.d0)
        F = random_class(np.random.default_rng(0), 2, 2, 2)
        r = reward_derandomize_split(m, F, (1, 0))
        assert r.fine.nS == 2 and np.array_equal(r.fine.P, m.P)

    def test_bernoulli_point_three(self):
        b = fig2b(p=0.3)
        r = reward_derandomize_split(b.mdp, b.F, (0, 0))
        assert np.allclose(r.fine.d0, [0.3, 0.7], atol=0, rtol=0)
        assert np.array_equal(optimal_q(r.fine), [[1.0], [0.0]])
        mu = r.map.lift_sa(b.mu)
        rep = check_realizability(r.fine, r.lifted_class, mu)
        assert not rep.holds
        assert rep.eps_approx == pytest.approx(0.21, abs=1e-12)
        assert check_realizability(b.mdp, b.F, b.mu).holds

    def test_rejects_discounting(self):
        m = random_mdp(np.random.default_rng(0), 2, 2, 0.5)
        with pytest.raises(ValueError, match="discount"):
            reward_derandomize_split(m, random_class(np.random.default_rng(0), 1, 2, 2), (0, 0))

    def test_zero_probability_outcome_dropped(self):
        m = TabularMDP(np.ones((1, 1, 1)), [[RewardDistribution([1.0, 0.5, 0.0], [0.4, 0.0, 0.6])]], 0.0, [1.0])
        r = reward_derandomize_split(m, FunctionClass(np.zeros((1, 1, 1))), (0, 0))
        assert r.fine.nS == 2

    def test_validity_verdict_unchanged(self):
        b = fig2b()
        r = reward_derandomize_split(b.mdp, b.F, (0, 0))
        mu = r.map.lift_sa(b.mu)
        coarse = find_valid_reward_function(b.mdp, b.F, b.mu, admissible_cb(b.mdp, b.F))
        fine = find_valid_reward_function(r.fine, r.lifted_class, mu, admissible_cb(r.fine, r.lifted_class))
        assert coarse.holds and fine.holds
        assert check_realizability(b.mdp, b.F, b.mu).holds
        assert not check_realizability(r.fine, r.lifted_class, mu).holds


class TestDeterminize:
    def test_deterministic_model_is_isomorphic(self):
        P = np.zeros((3, 2, 3))
        P[0, 0, 1] = P[0, 1, 2] = P[1, :, 2] = P[2, :, 0] = 1.0
        m = TabularMDP(P, [[pt(0.1), pt(0.5)], [pt(1.0)] * 2, [pt(0.0)] * 2], 0.9, [0.2, 0.3, 0.5])
        r = determinize(m, FunctionClass(np.zeros((1, 3, 2))), horizon=3)
        assert r.fine.nS == 3
        assert np.array_equal(r.fine.P, m.P) and np.array_equal(r.fine.d0, m.d0)

    def test_coin_flip_rows_and_trajectories(self):
        m = coin_flip()
        r = determinize(m, FunctionClass(np.zeros((1, 2, 2))), horizon=2)
        assert r.fine.nS <= 200 and validate(r.fine) == []
        noisy = [i for i, lab in enumerate(r.labels) if not lab.endswith("|")]
        assert noisy
        for x in noisy:
            for a in range(2):
                assert np.count_nonzero(r.fine.P[x, a]) == 1
                assert r.fine.rewards[x][a].is_deterministic
        # every start state carries the full noise vector
        assert all(r.labels[x].count(",") == 1 for x in np.flatnonzero(r.fine.d0))
        for pi in (Policy.uniform(2, 2), Policy.deterministic([1, 0], 2), Policy([[0.3, 0.7], [0.9, 0.1]])):
            for L in (1, 2, 3):
                coarse = trajectory_distribution(m, pi, L)
                fine = trajectory_distribution(r.fine, r.map.lift_policy(pi), L, phi=r.map.phi)
                assert law_close(coarse, fine)

    @settings(max_examples=25)
    @given(seeds)
    def test_policy_values_preserved(self, seed):
        rng = np.random.default_rng(seed)
        m = random_mdp(rng, 2, 2, 0.8)
        r = determinize(m, FunctionClass(np.zeros((1, 2, 2))), horizon=1)
        pi = random_policy(rng, 2, 2)
        assert abs(policy_value(r.fine, r.map.lift_policy(pi)) - policy_value(m, pi)) <= 1e-12

    def test_fig2b_omnipotent_gap(self):
        b = fig2b()
        r = determinize(b.mdp, b.F, horizon=1)
        q = optimal_q(r.fine)
        v = q.max(axis=1)
        assert float(r.fine.d0 @ v) == pytest.approx(0.5, abs=1e-15)
        favorable = [x for x in np.flatnonzero(r.fine.d0) if v[x] == 1.0]
        assert len(favorable) == 1 and r.fine.d0[favorable[0]] == 0.5

    def test_budget(self):
        with pytest.raises(ValueError, match="needs"):
            determinize(coin_flip(), FunctionClass(np.zeros((1, 2, 2))), horizon=6, budget=1000)

    def test_lifted_class_ignores_noise(self, rng):
        m = coin_flip()
        F = random_class(rng, 3, 2, 2)
        r = determinize(m, F, horizon=1)
        for f, g in zip(F, r.lifted_class):
            assert np.array_equal(g, f[r.map.phi])


class TestTargetLossAgreement:
    @given(seeds)
    def test_cosmetic(self, seed):
        rng = np.random.default_rng(seed)
        m = random_mdp(rng, 3, 2, 0.8)
        counts, weights = random_counts(rng, 3)
        F = random_class(rng, 3, 3, 2, m.vmax)
        r = cosmetic_split(m, F, counts, weights)
        mu = random_mu(rng, 3, 2)
        got = population_target_loss(r.fine, r.map.lift_sa(mu), r.lifted_class[0], r.lifted_class[1])
        assert abs(got - population_target_loss(m, mu, F[0], F[1])) <= 1e-12

    def test_determinize(self, rng):
        m = coin_flip()
        F = random_class(rng, 2, 2, 2, m.vmax)
        r = determinize(m, F, horizon=2)
        mu = random_mu(rng, 2, 2)
        got = population_target_loss(r.fine, r.map.lift_sa(mu), r.lifted_class[0], r.lifted_class[1])
        assert abs(got - population_target_loss(m, mu, F[0], F[1])) <= 1e-12


class TestCoupledRuns:
    def test_fig2_fit_cb(self):
        b = fig2b()
        r = reward_derandomize_split(b.mdp, b.F, (0, 0))
        res = coupled_run("fit_cb", r, b.mu, 200, seed=3)
        assert res.agree and res.coarse_index == res.fine_index == 0
        fine_data = sample_transitions(r.fine, r.map.lift_sa(b.mu), 200, 3)
        coarse_data = r.map.project(fine_data)
        assert empirical_loss_cb(fine_data, r.lifted_class[0]) == empirical_loss_cb(coarse_data, b.F[0])

    def test_projection_keeps_rewards_and_maps_states(self):
        m = random_mdp(np.random.default_rng(1), 3, 2, 0.5)
        r = cosmetic_split(m, random_class(np.random.default_rng(1), 2, 3, 2), [2, 2, 1])
        d = sample_transitions(r.fine, r.map.lift_sa(np.full((3, 2), 1 / 6)), 50, 0)
        p = r.map.project(d)
        assert np.array_equal(p.s, r.map.phi[d.s]) and np.array_equal(p.s_next, r.map.phi[d.s_next])
        assert np.array_equal(p.r, d.r) and np.array_equal(p.a, d.a)

    def test_random_cb_hundred_seeds(self):
        rng = np.random.default_rng(7)
        m = random_cb(rng, 3, 2)
        F = random_class(rng, 5, 3, 2)
        r = reward_derandomize_split(m, F, (1, 1))
        rep = invariance_sweep("fit_cb", r, random_mu(rng, 3, 2), 60, range(100))
        assert rep.all_agree and rep.first_divergence is None
        d = rep.to_dict()
        assert len(d["agreement"]) == 100 and all(d["agreement"].values())

    @settings(max_examples=20)
    @given(seeds)
    def test_cosmetic_fqi(self, seed):
        rng = np.random.default_rng(seed)
        m = random_mdp(rng, 3, 2, 0.8)
        counts, weights = random_counts(rng, 3)
        r = cosmetic_split(m, random_class(rng, 4, 3, 2, m.vmax), counts, weights)
        res = coupled_run("fqi", r, random_mu(rng, 3, 2), 40, seed, k=5)
        assert res.agree, res.divergence

    def test_determinize_fqi(self):
        m = coin_flip()
        rng = np.random.default_rng(0)
        r = determinize(m, random_class(rng, 4, 2, 2, m.vmax), horizon=2)
        assert invariance_sweep("run_fqi", r, random_mu(rng, 2, 2), 30, range(10), k=4).all_agree

    def test_divergence_reported(self):
        # a class that can read the copy index is not lifted; coupled runs then disagree
        b = fig2b()
        r = reward_derandomize_split(b.mdp, b.F, (0, 0))
        from dataclasses import replace

        cheat = replace(r, coarse_class=FunctionClass([[[0.5]], [[0.4]]]),
                        lifted_class=FunctionClass([[[0.5], [0.5]], [[1.0], [0.0]]]))
        rep = invariance_sweep("fit_cb", cheat, b.mu, 50, range(3))
        assert not rep.all_agree and rep.first_divergence["seed"] == 0

    def test_unknown_algorithm(self):
        b = fig2b()
        with pytest.raises(ValueError):
            coupled_run("sgd", reward_derandomize_split(b.mdp, b.F, (0, 0)), b.mu, 10, 0)
