"""Admissible state-action distributions for bandits and MDPs.

For bandits these are ``d0 x pi_f`` over the class. For MDPs they are the
occupancies ``d_t`` of every nonstationary policy that picks, at each step,
either a greedy policy ``pi_f`` or a pairwise-max policy ``pi_{f,f'}``.

The MDP set is built by propagating distinct state marginals level by level.
``d_t`` is the marginal reached after ``t-1`` policy choices crossed with one
more base policy, so the search only ever expands distinct marginals. When
the number of distinct marginals at the deepest level would exceed
``budget`` the builder switches to uniformly sampled policy sequences and
labels the result ``sampled``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .function_class import FunctionClass, base_policies, greedy_policy
from .mdp import NonstationaryPolicy, TabularMDP, push_states

_KEY_DECIMALS = 14


def _key(x: np.ndarray) -> bytes:
    return np.round(x, _KEY_DECIMALS).tobytes()


@dataclass(frozen=True, eq=False)
class AdmissibleSet:
    distributions: np.ndarray  # (N, nS, nA)
    labels: tuple
    exact: bool
    horizon: int
    base_policy_count: int
    base_policies: tuple = ()
    sequence_count: int = 0

    @property
    def exactness(self) -> str:
        return "exact" if self.exact else "sampled"

    def __len__(self):
        return self.distributions.shape[0]

    def __iter__(self):
        return iter(self.distributions)

    def contains(self, nu: np.ndarray, atol: float = 1e-12) -> bool:
        """Diagnostic only: whether ``nu`` coincides with a member."""
        gaps = np.abs(self.distributions - nu).max(axis=(1, 2))
        return bool(np.any(gaps <= atol))


def default_horizon(mdp: TabularMDP, slack: float = 1e-6) -> int:
    """Smallest ``H >= 1`` with ``gamma^H * Vmax <= slack``."""
    if mdp.gamma == 0.0:
        return 1
    return max(1, math.ceil(math.log(slack / mdp.vmax) / math.log(mdp.gamma)))


def label(prefix, t: int, final: int) -> str:
    inner = ",".join(f"pi{i}" for i in prefix)
    return f"({inner}; {t}) x pi{final}"


def admissible_cb(mdp: TabularMDP, F: FunctionClass) -> AdmissibleSet:
    if mdp.gamma != 0.0:
        raise ValueError("bandit admissible set requires gamma == 0; use admissible_mdp")
    dists, labels, seen, pols = [], [], set(), []
    for f in F:
        pi = greedy_policy(f)
        nu = mdp.d0[:, None] * pi.probs
        k = _key(nu)
        if k in seen:
            continue
        seen.add(k)
        pols.append(pi)
        dists.append(nu)
        labels.append(label((), 1, len(pols) - 1))
    return AdmissibleSet(np.array(dists), tuple(labels), True, 1, len(pols), tuple(pols), len(F))


def _collect(mdp, policies, nodes_by_level):
    dists, labels, seen = [], [], set()
    for t, nodes in enumerate(nodes_by_level, start=1):
        for prefix, eta in nodes:
            for j, pi in enumerate(policies):
                nu = eta[:, None] * pi.probs
                k = _key(nu)
                if k in seen:
                    continue
                seen.add(k)
                dists.append(nu)
                labels.append(label(prefix, t, j))
    return np.array(dists), tuple(labels)


def admissible_mdp(
    mdp: TabularMDP,
    F: FunctionClass,
    horizon: int | None = None,
    budget: int = 100_000,
    seed=0,
) -> AdmissibleSet:
    if budget < 1:
        raise ValueError("budget must be at least 1")
    H = default_horizon(mdp) if horizon is None else int(horizon)
    if H < 1:
        raise ValueError("horizon must be at least 1")
    policies = base_policies(F)
    nP = len(policies)

    def step(eta, pi):
        return push_states(mdp, eta[:, None] * pi.probs)

    # exhaustive search over distinct marginals
    levels = [[((), np.asarray(mdp.d0, dtype=float))]]
    exact = True
    for _ in range(H - 1):
        nxt, seen = [], set()
        for prefix, eta in levels[-1]:
            for j, pi in enumerate(policies):
                new = step(eta, pi)
                k = _key(new)
                if k not in seen:
                    seen.add(k)
                    nxt.append((prefix + (j,), new))
        if len(nxt) > budget:
            exact = False
            break
        levels.append(nxt)

    if exact:
        dists, labels = _collect(mdp, policies, levels)
        sequences = sum(nP**t for t in range(H))
        return AdmissibleSet(dists, labels, True, H, nP, tuple(policies), sequences)

    # sampled fallback: random prefixes of length H-1, memoized by prefix
    rng = np.random.default_rng(seed)
    memo = {(): np.asarray(mdp.d0, dtype=float)}
    for _ in range(budget):
        prefix = ()
        for j in rng.integers(nP, size=H - 1):
            nxt = prefix + (int(j),)
            if nxt not in memo:
                memo[nxt] = step(memo[prefix], policies[int(j)])
            prefix = nxt
    by_level = [[] for _ in range(H)]
    for prefix, eta in sorted(memo.items(), key=lambda kv: (len(kv[0]), kv[0])):
        by_level[len(prefix)].append((prefix, eta))
    dists, labels = _collect(mdp, policies, by_level)
    return AdmissibleSet(dists, labels, False, H, nP, tuple(policies), budget)


def provenance(A: AdmissibleSet, index: int):
    """Parse a label back into ``(prefix policy indices, t, final policy index)``."""
    text = A.labels[index]
    inner, rest = text[1:].split(";", 1)
    t_part, final = rest.split(")", 1)
    prefix = tuple(int(p[2:]) for p in inner.split(",") if p)
    return prefix, int(t_part), int(final.strip()[len("x pi"):])


def sequence_policy(A: AdmissibleSet, index: int):
    """The nonstationary policy that generates member ``index`` at its time step."""
    prefix, t, final = provenance(A, index)
    steps = tuple(A.base_policies[j] for j in prefix) + (A.base_policies[final],)
    return NonstationaryPolicy(steps), t


def from_distributions(dists, exact: bool = True) -> AdmissibleSet:
    """Wrap an explicit list of distributions (tests, custom verification sets)."""
    dists = np.array(dists, dtype=float)
    labels = tuple(f"nu{i}" for i in range(len(dists)))
    return AdmissibleSet(dists, labels, exact, 1, 0)

