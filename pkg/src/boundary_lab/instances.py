"""Named problem instances and randomized instance families."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .function_class import FunctionClass
from .mdp import Policy, RewardDistribution, TabularMDP, bellman_backup


@dataclass(frozen=True, eq=False)
class Problem:
    """A model, a function class, and the data distribution ``mu`` (or the behavior policy inducing it)."""

    mdp: TabularMDP
    F: FunctionClass
    mu: np.ndarray | None = None
    behavior: Policy | None = None
    state_names: tuple = ()
    action_names: tuple = ()
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.state_names:
            object.__setattr__(self, "state_names", tuple(f"s{i}" for i in range(self.mdp.nS)))
        if not self.action_names:
            object.__setattr__(self, "action_names", tuple(f"a{i}" for i in range(self.mdp.nA)))
        if self.mu is None and self.behavior is not None:
            object.__setattr__(self, "mu", self.mdp.d0[:, None] * self.behavior.probs)


def _constant_class(nS: int, nA: int, values, names=()) -> FunctionClass:
    return FunctionClass(np.array([np.full((nS, nA), float(v)) for v in values]), names)


def fig2b(p: float = 0.5, constant: float | None = None) -> Problem:
    """One context, one action, Bernoulli(p) reward; the class holds one constant (default ``p``)."""
    c = p if constant is None else constant
    mdp = TabularMDP(np.ones((1, 1, 1)), [[RewardDistribution.bernoulli(p)]], 0.0, [1.0])
    return Problem(mdp, _constant_class(1, 1, [c]), behavior=Policy.uniform(1, 1),
                   state_names=("s",), action_names=("a",))


def fig2a(p: float = 0.5, constant: float | None = None) -> Problem:
    """Two contexts drawn with probabilities ``(p, 1-p)``, deterministic rewards 1 and 0."""
    c = p if constant is None else constant
    mdp = TabularMDP(
        np.ones((2, 1, 1)) * np.eye(2)[:, None, :],
        [[RewardDistribution.point(1.0)], [RewardDistribution.point(0.0)]],
        0.0,
        [p, 1.0 - p],
    )
    return Problem(mdp, _constant_class(2, 1, [c]), behavior=Policy.uniform(2, 1),
                   state_names=("sA", "sB"), action_names=("a",))


def appendix_b(d0=(0.5, 0.5), with_f3: bool = False) -> Problem:
    """Two contexts with deterministic reward 0.5; ``f1 = (1, 0)`` and ``f2 = (0.6, 0.6)``."""
    mdp = TabularMDP(
        np.eye(2)[:, None, :],
        [[RewardDistribution.point(0.5)], [RewardDistribution.point(0.5)]],
        0.0,
        list(d0),
    )
    tables = [[[1.0], [0.0]], [[0.6], [0.6]]]
    names = ["f1", "f2"]
    if with_f3:
        tables.append([[0.5], [0.5]])
        names.append("f3")
    return Problem(mdp, FunctionClass(tables, names), behavior=Policy.uniform(2, 1),
                   state_names=("s1", "s2"), action_names=("a",))


def imitation_coarse(p_low: float = 0.5, p_high: float = 0.9, gamma: float = 0.5) -> Problem:
    """Two decisions: pick a branch, then answer a terminal Bernoulli question.

    States: ``start``, ``low``, ``high``, ``end`` (absorbing, no reward). From
    ``start`` action 0 leads to ``low`` and action 1 to ``high``. In the branch
    with parameter ``p`` action 0 pays Bernoulli(p) and action 1 pays
    Bernoulli(1-p). The class holds the exact ``Q*`` so learners see a
    realizable problem.
    """
    P = np.zeros((4, 2, 4))
    P[0, 0, 1] = P[0, 1, 2] = 1.0
    P[1, :, 3] = P[2, :, 3] = P[3, :, 3] = 1.0
    zero = RewardDistribution.point(0.0)
    B = RewardDistribution.bernoulli
    rewards = [
        [zero, zero],
        [B(p_low), B(1 - p_low)],
        [B(p_high), B(1 - p_high)],
        [zero, zero],
    ]
    mdp = TabularMDP(P, rewards, gamma, [1.0, 0.0, 0.0, 0.0])
    q = np.zeros((4, 2))
    for _ in range(3):
        q = bellman_backup(mdp, q)
    return Problem(mdp, FunctionClass([q], ["qstar"]), behavior=Policy.uniform(4, 2),
                   state_names=("start", "low", "high", "end"), action_names=("left", "right"))


# randomized families


def random_reward(rng: np.random.Generator, support: int = 2, rmax: float = 1.0) -> RewardDistribution:
    k = int(rng.integers(1, support + 1))
    values = np.sort(rng.choice(np.linspace(0.0, rmax, 11), size=k, replace=False))[::-1]
    probs = rng.dirichlet(np.ones(k)) if k > 1 else np.ones(1)
    return RewardDistribution(values, probs)


def random_mdp(rng: np.random.Generator, nS: int, nA: int, gamma: float, support: int = 2,
               sparsity: float = 0.0) -> TabularMDP:
    P = rng.dirichlet(np.ones(nS), size=(nS, nA))
    if sparsity > 0:
        mask = rng.random(P.shape) < sparsity
        mask[..., 0] &= ~np.all(mask, axis=-1)  # keep each row alive
        P = np.where(mask, 0.0, P)
        P /= P.sum(axis=-1, keepdims=True)
    rewards = [[random_reward(rng, support) for _ in range(nA)] for _ in range(nS)]
    return TabularMDP(P, rewards, gamma, rng.dirichlet(np.ones(nS)))


def random_cb(rng: np.random.Generator, nS: int, nA: int, support: int = 2) -> TabularMDP:
    P = np.broadcast_to(np.eye(nS)[:, None, :], (nS, nA, nS))
    rewards = [[random_reward(rng, support) for _ in range(nA)] for _ in range(nS)]
    return TabularMDP(P, rewards, 0.0, rng.dirichlet(np.ones(nS)))


def random_class(rng: np.random.Generator, K: int, nS: int, nA: int, vmax: float = 1.0) -> FunctionClass:
    return FunctionClass(rng.uniform(0.0, vmax, size=(K, nS, nA)))


def random_mu(rng: np.random.Generator, nS: int, nA: int, floor: float = 0.05) -> np.ndarray:
    mu = rng.dirichlet(np.ones(nS * nA)) + floor
    return (mu / mu.sum()).reshape(nS, nA)


def random_behavior(rng: np.random.Generator, nS: int, nA: int, floor: float = 0.1) -> Policy:
    probs = rng.dirichlet(np.ones(nA), size=nS) + floor
    return Policy(probs / probs.sum(axis=1, keepdims=True))


def layered_closed_instance(rng: np.random.Generator, n_first: int | None = None, n_second: int | None = None,
                            gamma: float | None = None) -> Problem:
    """A two-layer episodic MDP with a class closed under the Bellman optimality operator.

    Layer one moves stochastically into layer two, which moves into an
    absorbing zero-reward terminal state. Every table is zero on the terminal
    state, so two backups from any table reach ``Q*``. The class holds the
    backup orbits of three seeds (a random table, ``Q*`` perturbed on layer
    two, ``Q*`` perturbed on layer one), in random order, six members total.
    """
    n1 = int(rng.integers(1, 3)) if n_first is None else n_first
    n2 = int(rng.integers(1, 4)) if n_second is None else n_second
    nS, nA = n1 + n2 + 1, 2
    g = float(rng.uniform(0.3, 0.9)) if gamma is None else gamma
    term = nS - 1
    P = np.zeros((nS, nA, nS))
    P[:n1, :, n1:n1 + n2] = rng.dirichlet(np.ones(n2), size=(n1, nA))
    P[n1:n1 + n2, :, term] = 1.0
    P[term, :, term] = 1.0
    rewards = [[random_reward(rng) for _ in range(nA)] for _ in range(nS)]
    rewards[term] = [RewardDistribution.point(0.0)] * nA
    d0 = np.zeros(nS)
    d0[:n1] = rng.dirichlet(np.ones(n1))
    mdp = TabularMDP(P, rewards, g, d0)
    vmax = mdp.vmax

    def seed_table(rows):
        t = np.zeros((nS, nA))
        t[rows] = rng.uniform(0.0, vmax, size=(len(rows), nA))
        return t

    T = lambda f: bellman_backup(mdp, f)
    first, second = list(range(n1)), list(range(n1, n1 + n2))
    f0 = seed_table(first + second)
    qstar = T(T(f0))
    g0 = qstar.copy()
    g0[second] = seed_table(second)[second]
    g1 = qstar.copy()
    g1[first] = seed_table(first)[first]
    tables = [f0, T(f0), qstar, g0, T(g0), g1]
    names = ["seed", "seed+1", "fixed", "perturb2", "perturb2+1", "perturb1"]
    order = rng.permutation(len(tables))
    F = FunctionClass(np.array(tables)[order], tuple(names[i] for i in order))
    return Problem(mdp, F, random_mu(rng, nS, nA), meta={"qstar_index": int(np.flatnonzero(order == 2)[0])})
