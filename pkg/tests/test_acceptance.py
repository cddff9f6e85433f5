"""Acceptance criteria, one test each.

Every test records a one-line PASS/FAIL verdict (printed immediately and
repeated in the terminal summary) before asserting.
"""
import math
import time

import numpy as np
import pytest

from boundary_lab.admissible import admissible_cb, admissible_mdp
from boundary_lab.assumptions import (
    build_b_operator,
    check_contraction,
    find_valid_reward_function,
    fixed_point_of_b,
    inherent_bellman_error,
    norm_gap,
)
from boundary_lab.boundary import cosmetic_split, coupled_run, reward_derandomize_split
from boundary_lab.instances import appendix_b, layered_closed_instance, random_cb, random_class, random_mdp, random_mu
from boundary_lab.learners import fit_cb, population_loss_cb
from boundary_lab.mdp import optimal_q
from boundary_lab.scenarios import scenario_figure2, scenario_imitation, scenario_unverifiability

import sweeps

VERDICTS = {}


def verdict(number: int, ok: bool, detail: str):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} | {detail}"
    VERDICTS[number] = line
    print(line)
    return ok


class Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start


def test_1_figure2():
    with Timer() as t:
        rep = scenario_figure2()
    values = {
        "eps_approx": (rep["eps_approx in (a)"].actual, 0.25),
        "C": (rep["C"].actual, 1.0),
        "robust (a)": (rep["robust bound in (a)"].actual, -0.5),
        "classical (b)": (rep["classical bound in (b)"].actual, 0.5),
        "invariant (a)": (rep["invariant bound in (a)"].actual, 0.5),
    }
    exact = all(abs(got - want) <= 1e-12 for got, want in values.values())
    ok = exact and rep.passed and t.elapsed < 1.0
    shown = ", ".join(f"{k}={v[0]:.12g}" for k, v in values.items())
    assert verdict(1, ok, f"{shown}; all {len(rep.assertions)} assertions pass={rep.passed}; {t.elapsed:.3f}s")


def test_2_appendix_b():
    with Timer() as t:
        prob = appendix_b()
        m, F, mu = prob.mdp, prob.F, prob.mu
        l1, l2 = population_loss_cb(m, mu, F[0]), population_loss_cb(m, mu, F[1])
        fit = fit_cb(F, mdp=m, mu=mu)
        valid = find_valid_reward_function(m, F, mu, admissible_cb(m, F))
    both_rejected = not valid.holds and len(valid.witnesses) == 2
    ok = (abs(l1 - 0.25) <= 1e-12 and abs(l2 - 0.01) <= 1e-12 and F.names[fit.index] == "f2"
          and both_rejected and t.elapsed < 1.0)
    assert verdict(2, ok, f"L(f1)={l1:.12g}, L(f2)={l2:.12g}, picks {F.names[fit.index]}, "
                          f"valid f*: {'none' if not valid.holds else valid.f_star_index}; {t.elapsed:.3f}s")


def invariance_instances(count=20):
    """Alternating bandits (derandomize or cosmetic, fit_cb) and discounted MDPs (cosmetic, FQI)."""
    out = []
    for i in range(count):
        rng = np.random.default_rng(1000 + i)
        if i % 2 == 0:
            m = random_cb(rng, int(rng.integers(2, 5)), int(rng.integers(1, 4)))
            F = random_class(rng, int(rng.integers(2, 6)), m.nS, m.nA)
            if i % 4 == 0:
                s, a = int(rng.integers(m.nS)), int(rng.integers(m.nA))
                refined = reward_derandomize_split(m, F, (s, a))
            else:
                refined = cosmetic_split(m, F, rng.integers(1, 4, size=m.nS).tolist())
            out.append(("fit_cb", refined, random_mu(rng, m.nS, m.nA)))
        else:
            m = random_mdp(rng, int(rng.integers(2, 4)), 2, float(rng.uniform(0.3, 0.9)))
            F = random_class(rng, 4, m.nS, m.nA, m.vmax)
            counts = rng.integers(1, 4, size=m.nS).tolist()
            weights = [rng.dirichlet(np.ones(c)) * 0.9 + 0.1 / c for c in counts]
            out.append(("run_fqi", cosmetic_split(m, F, counts, weights), random_mu(rng, m.nS, m.nA)))
    return out


def test_3_boundary_invariance():
    seeds = range(100)
    with Timer() as t:
        instances = invariance_instances(20)
        total = agree = 0
        first = None
        for algorithm, refined, mu in instances:
            for seed in seeds:
                res = coupled_run(algorithm, refined, mu, 40, seed, k=5)
                total += 1
                if res.index_agree and res.loss_agree:
                    agree += 1
                elif first is None:
                    first = (refined.kind, seed, res.divergence)
    kinds = {r.kind for _, r, _ in instances}
    ok = agree == total and total >= 2000 and t.elapsed < 60
    assert verdict(3, ok, f"{agree}/{total} coupled runs agree ({len(instances)} instances x {len(seeds)} seeds, "
                          f"transforms {sorted(kinds)}); first divergence {first}; {t.elapsed:.1f}s")


def closed_family(count=50):
    for seed in range(count):
        prob = layered_closed_instance(np.random.default_rng(seed))
        m, F = prob.mdp, prob.F
        assert m.nS * m.nA <= 12 and len(F) <= 6
        yield prob, admissible_mdp(m, F, horizon=4)


def test_4_contraction():
    violations, instances, worst = 0, 0, -math.inf
    for prob, A in closed_family(50):
        m, F, mu = prob.mdp, prob.F, prob.mu
        assert A.exact and inherent_bellman_error(m, F).holds
        B = build_b_operator(m, F, mu, A)
        rep = check_contraction(m, B, F, A, 1e-9 * m.vmax)
        violations += len(rep.witnesses)
        worst = max(worst, rep.constant / m.vmax)
        instances += 1
    ok = violations == 0 and instances >= 50
    assert verdict(4, ok, f"{violations} contraction violations over {instances} exact instances "
                          f"(largest excess {worst:.2e} Vmax)")


def test_5_fixed_point():
    bad, instances, worst_res, worst_gap = 0, 0, 0.0, 0.0
    for prob, A in closed_family(50):
        m, F, mu = prob.mdp, prob.F, prob.mu
        tol = 1e-9 * m.vmax
        fp = fixed_point_of_b(build_b_operator(m, F, mu, A), F, A, tol)
        qstar = optimal_q(m, tol=1e-13 * m.vmax)
        gap = norm_gap(A, F[fp.f_star_index], qstar) if fp.found else math.inf
        worst_res = max(worst_res, fp.max_residual / m.vmax)
        worst_gap = max(worst_gap, gap / m.vmax)
        bad += not (fp.found and fp.max_residual <= tol and gap <= 1e-8 * m.vmax)
        instances += 1
    ok = bad == 0 and instances >= 50
    assert verdict(5, ok, f"{instances - bad}/{instances} fixed points found; max residual {worst_res:.2e} Vmax, "
                          f"max ||f*-Q*||_nu {worst_gap:.2e} Vmax")


def test_6_fqi_validity():
    with Timer() as t:
        plain = [sweeps.fqi_trial(seed, k=200) for seed in range(500)]
        injected = [sweeps.fqi_trial(seed, k=200, inject=True) for seed in range(500)]
    ok_plain = sum(bool(r.satisfied) for r in plain)
    ok_inj = sum(bool(r.satisfied) for r in injected)
    eps_pos = sum(r.eps > 0 for r in injected)
    ok = ok_plain == 500 and ok_inj == 500 and eps_pos > 0 and t.elapsed < 300
    assert verdict(6, ok, f"bound holds {ok_plain}/500 exact runs and {ok_inj}/500 injected runs "
                          f"({eps_pos} with eps > 0), k=200; {t.elapsed:.1f}s")


def test_7_prop3():
    comparisons, seed = [], 0
    while len(comparisons) < 500 and seed < 5000:
        c = sweeps.prop3_trial(seed)
        if c is not None:
            assert c.premise
            comparisons.append(c)
        seed += 1
    dominated = sum(c.dominates for c in comparisons)
    ok = len(comparisons) >= 500 and dominated == len(comparisons)
    assert verdict(7, ok, f"invariant bound >= robust bound in {dominated}/{len(comparisons)} instances "
                          f"meeting eps <= eps_approx/2 ({seed} drawn)")


def test_8_unverifiability():
    with Timer() as t:
        hard = scenario_unverifiability(10**6, 100, 2000, seed=0)
        easy = scenario_unverifiability(1, 20, 2000, seed=0)
    acc_hard, acc_easy = hard.details["accuracy"], easy.details["accuracy"]
    ok = acc_hard <= 0.52 and acc_easy >= 0.99 and t.elapsed < 30
    assert verdict(8, ok, f"accuracy {acc_hard:.4f} at nX=1e6, m=100 (ceiling {hard.details['ceiling']:.4f}); "
                          f"{acc_easy:.4f} at nX=1, m=20; {t.elapsed:.2f}s")


def test_9_imitation():
    with Timer() as t:
        rep = scenario_imitation(seed=0)
    cloned = rep["cloned policy return"].actual
    optimum = rep["coarse optimal return"].actual
    expert = rep["fine expert return"].actual
    ok = (abs(cloned - 0.5) <= 1e-12 and abs(optimum - 0.9) <= 1e-12 and abs(expert - 1.0) <= 1e-12
          and rep.passed and t.elapsed < 1.0)
    assert verdict(9, ok, f"cloned {cloned:.12g} vs coarse optimum {optimum:.12g} vs fine expert {expert:.12g}; "
                          f"{t.elapsed:.3f}s")


@pytest.fixture(scope="module", autouse=True)
def _publish():
    yield
    import conftest

    conftest.ACCEPTANCE_LINES.update(VERDICTS)
