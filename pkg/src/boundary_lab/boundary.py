"""Refinements: the same problem written with a finer agent-environment boundary.

A refinement maps fine states onto coarse states through ``phi`` and says how
each coarse state emits one of its fine copies. Function classes are lifted
by ``f'(x, a) = f(phi(x), a)``, so a learner that only evaluates class members
on data cannot tell the two formulations apart. :func:`coupled_run` checks
exactly that by running an algorithm on one fine dataset and on its
projection through ``phi``.

Three transforms are provided:

* :func:`cosmetic_split` duplicates states with no observable effect;
* :func:`reward_derandomize_split` moves reward randomness into the state
  (bandits only);
* :func:`determinize` moves all randomness of the first ``H`` steps into a
  noise vector drawn at the start of the episode.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .function_class import FunctionClass, greedy_policy
from .learners import fit_cb, run_fqi
from .mdp import Dataset, Policy, RewardDistribution, TabularMDP, policy_value, sample_transitions

SPLIT_ATOL = 1e-12


@dataclass(frozen=True, eq=False)
class RefinementMap:
    """``phi`` maps fine to coarse states; ``emission[x]`` weighs ``x`` inside its preimage."""

    phi: np.ndarray
    emission: np.ndarray
    n_coarse: int

    def __post_init__(self):
        phi = np.array(self.phi, dtype=int)
        emission = np.array(self.emission, dtype=float)
        phi.setflags(write=False)
        emission.setflags(write=False)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "emission", emission)
        if phi.shape != emission.shape:
            raise ValueError("phi and emission must have one entry per fine state")
        if set(phi.tolist()) != set(range(self.n_coarse)):
            raise ValueError("phi must be surjective onto the coarse states")
        if np.any(emission < 0):
            raise ValueError("emission weights must be nonnegative")
        totals = np.bincount(phi, weights=emission, minlength=self.n_coarse)
        if np.abs(totals - 1.0).max() > SPLIT_ATOL:
            bad = int(np.argmax(np.abs(totals - 1.0)))
            raise ValueError(f"emission over preimage of coarse state {bad} sums to {totals[bad]:.12g}")

    @property
    def n_fine(self) -> int:
        return self.phi.size

    def lift_states(self, eta: np.ndarray) -> np.ndarray:
        return np.asarray(eta)[self.phi] * self.emission

    def lift_sa(self, nu: np.ndarray) -> np.ndarray:
        return np.asarray(nu)[self.phi] * self.emission[:, None]

    def push_states(self, eta: np.ndarray) -> np.ndarray:
        return np.bincount(self.phi, weights=eta, minlength=self.n_coarse)

    def push_sa(self, nu: np.ndarray) -> np.ndarray:
        out = np.zeros((self.n_coarse, nu.shape[1]))
        np.add.at(out, self.phi, nu)
        return out

    def lift_table(self, f: np.ndarray) -> np.ndarray:
        return np.asarray(f)[self.phi]

    def lift_policy(self, pi: Policy) -> Policy:
        return Policy(pi.probs[self.phi])

    def lift_class(self, F: FunctionClass) -> FunctionClass:
        return FunctionClass(F.tables[:, self.phi], F.names)

    def project(self, data: Dataset) -> Dataset:
        s_next = None if data.s_next is None else self.phi[data.s_next]
        return Dataset(self.phi[data.s], data.a, data.r, s_next)


@dataclass(frozen=True)
class RefinedProblem:
    coarse: TabularMDP
    coarse_class: FunctionClass
    fine: TabularMDP
    map: RefinementMap
    lifted_class: FunctionClass
    kind: str
    labels: tuple = ()  # human-readable fine state names


def _mixture(dists, weights):
    law = defaultdict(float)
    for R, w in zip(dists, weights):
        for v, p in zip(R.values, R.probs):
            law[float(v)] += w * p
    return law


def _same_law(a: dict, b: dict) -> bool:
    keys = set(a) | set(b)
    return all(abs(a.get(k, 0.0) - b.get(k, 0.0)) <= SPLIT_ATOL for k in keys)


def split_states(mdp: TabularMDP, F: FunctionClass, plan: dict, kind: str = "split") -> RefinedProblem:
    """Split coarse states into copies.

    ``plan[s]`` is a list of ``(weight, overrides)`` pairs, one per copy of
    ``s``, where ``overrides`` maps actions to the copy's own reward
    distribution. Incoming transition mass and ``d0`` are divided by the
    weights; outgoing transitions and non-overridden rewards are copied. Every
    override must mix back (under the weights) to the coarse reward law, which
    keeps the fine problem indistinguishable from the coarse one.
    """
    phi, emission, rewards, labels = [], [], [], []
    for s in range(mdp.nS):
        copies = plan.get(s, [(1.0, {})])
        for c, (w, overrides) in enumerate(copies):
            if w <= 0:
                raise ValueError(f"copy {c} of state {s} has nonpositive emission weight {w}")
            phi.append(s)
            emission.append(float(w))
            rewards.append([overrides.get(a, mdp.rewards[s][a]) for a in range(mdp.nA)])
            labels.append(f"{s}" if len(copies) == 1 else f"{s}.{c}")
        for a in range(mdp.nA):
            if any(a in ov for _, ov in copies):
                mixed = _mixture([ov.get(a, mdp.rewards[s][a]) for _, ov in copies], [w for w, _ in copies])
                if not _same_law(mixed, _mixture([mdp.rewards[s][a]], [1.0])):
                    raise ValueError(f"reward overrides at ({s}, {a}) do not mix back to the coarse reward law")
    rmap = RefinementMap(phi, emission, mdp.nS)
    P = mdp.P[rmap.phi][:, :, rmap.phi] * rmap.emission[None, None, :]
    fine = TabularMDP(P, rewards, mdp.gamma, rmap.lift_states(mdp.d0), mdp.rmax)
    return RefinedProblem(mdp, F, fine, rmap, rmap.lift_class(F), kind, tuple(labels))


def cosmetic_split(mdp: TabularMDP, F: FunctionClass, counts, weights=None) -> RefinedProblem:
    """Replace each state ``s`` by ``counts[s]`` indistinguishable copies.

    ``weights[s]`` (default uniform) is the emission distribution over the copies.
    """
    if len(counts) != mdp.nS:
        raise ValueError("one copy count per state")
    plan = {}
    for s, c in enumerate(counts):
        if c < 1:
            raise ValueError(f"state {s} needs at least one copy")
        w = np.full(c, 1.0 / c) if weights is None or weights[s] is None else np.asarray(weights[s], float)
        if w.size != c:
            raise ValueError(f"state {s}: {c} copies but {w.size} weights")
        if np.any(w <= 0):
            raise ValueError(f"state {s}: zero emission weight on a copy")
        if abs(w.sum() - 1.0) > SPLIT_ATOL:
            raise ValueError(f"state {s}: emission weights sum to {w.sum():.12g}")
        plan[s] = [(float(x), {}) for x in w]
    return split_states(mdp, F, plan, "cosmetic")


def reward_derandomize_split(mdp: TabularMDP, F: FunctionClass, target) -> RefinedProblem:
    """Split ``target = (s, a)`` by its reward outcome: copy ``j`` pays ``v_j`` deterministically.

    Only bandits are supported; with discounting the same construction would
    have to insert an extra time step, which changes every discounted value.
    """
    if mdp.gamma != 0.0:
        raise ValueError(
            "reward_derandomize_split requires gamma == 0: moving reward noise into a "
            "new state inserts a time step and distorts discounting"
        )
    s, a = target
    R = mdp.rewards[s][a]
    copies = [(float(p), {a: RewardDistribution.point(v)}) for v, p in zip(R.values, R.probs) if p > 0]
    return split_states(mdp, F, {s: copies}, "derandomize")


def _partition(cdfs):
    """Common refinement of several CDFs on [0, 1]: interval probabilities and midpoints."""
    cuts = np.concatenate([c[:-1] for c in cdfs]) if cdfs else np.zeros(0)
    cuts = np.unique(np.round(cuts, 14))
    cuts = cuts[(cuts > 1e-14) & (cuts < 1 - 1e-14)]
    edges = np.concatenate([[0.0], cuts, [1.0]])
    return np.diff(edges), (edges[:-1] + edges[1:]) / 2


def _lookup(cdf: np.ndarray, probs: np.ndarray, u: float) -> int:
    idx = int(np.searchsorted(cdf, u, side="right"))
    return min(idx, int(np.flatnonzero(probs)[-1]))


def determinize(mdp: TabularMDP, F: FunctionClass, horizon: int, budget: int = 100_000) -> RefinedProblem:
    """Move transition and reward randomness of the first ``horizon`` steps into the state.

    A fine state is ``(s, noise)`` where ``noise`` holds the symbols still to be
    consumed. Each symbol fixes one transition outcome and one reward outcome
    through a common partition of [0, 1] refining every CDF in the model, so a
    state carrying noise has deterministic transitions and rewards. Episodes
    start with a full noise vector drawn from ``d0``; after ``horizon`` steps
    the noise is exhausted and the original stochastic dynamics resume, so the
    infinite-horizon law is preserved exactly.
    """
    nS, nA = mdp.nS, mdp.nA
    p_probs, p_mids = _partition([np.cumsum(mdp.P[s, a]) for s in range(nS) for a in range(nA)])
    r_probs, r_mids = _partition([np.cumsum(R.probs) for row in mdp.rewards for R in row])
    kp, kr = p_probs.size, r_probs.size
    K = kp * kr
    H = int(horizon) if K > 1 else 0
    size = nS * sum(K**k for k in range(H + 1))
    if size > budget:
        raise ValueError(f"determinize needs {size} fine states, budget is {budget}")

    sym_prob = np.outer(p_probs, r_probs).reshape(-1)
    next_state = np.zeros((nS, nA, kp), dtype=int)
    for s, a, i in product(range(nS), range(nA), range(kp)):
        next_state[s, a, i] = _lookup(np.cumsum(mdp.P[s, a]), mdp.P[s, a], p_mids[i])
    reward_value = np.zeros((nS, nA, kr))
    for s, a, j in product(range(nS), range(nA), range(kr)):
        R = mdp.rewards[s][a]
        reward_value[s, a, j] = R.values[_lookup(np.cumsum(R.probs), R.probs, r_mids[j])]

    states = [(s, noise) for s in range(nS) for k in range(H, -1, -1) for noise in product(range(K), repeat=k)]
    index = {x: i for i, x in enumerate(states)}
    n = len(states)
    P = np.zeros((n, nA, n))
    rewards = []
    for x, (s, noise) in enumerate(states):
        row = []
        for a in range(nA):
            if noise:
                i, j = divmod(noise[0], kr)
                P[x, a, index[(int(next_state[s, a, i]), noise[1:])]] = 1.0
                row.append(RewardDistribution.point(reward_value[s, a, j]))
            else:
                for t in np.flatnonzero(mdp.P[s, a]):
                    P[x, a, index[(int(t), ())]] = mdp.P[s, a, t]
                row.append(mdp.rewards[s][a])
        rewards.append(row)

    weight = np.array([np.prod(sym_prob[list(noise)]) if len(noise) == H else 0.0 for _, noise in states])
    phi = np.array([s for s, _ in states])
    rmap = RefinementMap(phi, weight, nS)
    fine = TabularMDP(P, rewards, mdp.gamma, rmap.lift_states(mdp.d0), mdp.rmax)
    labels = tuple(f"{s}|{','.join(map(str, noise))}" for s, noise in states)
    return RefinedProblem(mdp, F, fine, rmap, rmap.lift_class(F), "determinize", labels)


def trajectory_distribution(mdp: TabularMDP, pi: Policy, length: int, phi: np.ndarray | None = None) -> dict:
    """Exact law of ``(s_1, a_1, r_1, ..., s_L, a_L, r_L)``, with states mapped through ``phi``."""
    label = (lambda s: s) if phi is None else (lambda s: int(phi[s]))
    frontier = {((), int(s)): float(p) for s, p in enumerate(mdp.d0) if p > 0}
    for step in range(length):
        nxt = defaultdict(float)
        for (path, s), p in frontier.items():
            for a in np.flatnonzero(pi.probs[s]):
                pa = p * pi.probs[s, a]
                R = mdp.rewards[s][a]
                for v, pr in zip(R.values, R.probs):
                    if pr <= 0:
                        continue
                    key = path + ((label(s), int(a), float(v)),)
                    if step == length - 1:
                        nxt[(key, -1)] += pa * pr
                        continue
                    for t in np.flatnonzero(mdp.P[s, a]):
                        nxt[(key, int(t))] += pa * pr * mdp.P[s, a, t]
        frontier = nxt
    law = defaultdict(float)
    for (path, _), p in frontier.items():
        law[path] += p
    return dict(law)


# coupled runs


@dataclass
class CoupledResult:
    seed: int
    index_agree: bool
    loss_agree: bool
    value_agree: bool
    divergence: str | None = None
    coarse_index: int | None = None
    fine_index: int | None = None

    @property
    def agree(self) -> bool:
        return self.index_agree and self.loss_agree and self.value_agree


@dataclass
class InvarianceReport:
    algorithm: str
    transform: str
    results: list = field(default_factory=list)

    @property
    def all_agree(self) -> bool:
        return all(r.agree for r in self.results)

    @property
    def first_divergence(self):
        for r in self.results:
            if not r.agree:
                return {"seed": r.seed, "detail": r.divergence}
        return None

    def to_dict(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "transform": self.transform,
            "agreement": {str(r.seed): r.agree for r in self.results},
            "all_agree": self.all_agree,
            "first_divergence": self.first_divergence,
        }


def _algorithm_name(algorithm) -> str:
    if algorithm in (fit_cb, "fit_cb", "cb", "fitCB"):
        return "fit_cb"
    if algorithm in (run_fqi, "run_fqi", "fqi", "runFQI"):
        return "run_fqi"
    raise ValueError(f"unknown algorithm {algorithm!r}")


def coupled_run(algorithm, refined: RefinedProblem, mu: np.ndarray, n: int, seed, k: int = 10,
                init_index: int = 0, value_atol: float = 1e-12) -> CoupledResult:
    """Run ``algorithm`` on one fine dataset and on its projection through ``phi``.

    Chosen indices and every empirical loss must agree bit for bit; output
    policy values (coarse policy in the coarse model versus lifted policy in
    the fine model) must agree within ``value_atol``.
    """
    name = _algorithm_name(algorithm)
    rmap, coarse, fine = refined.map, refined.coarse, refined.fine
    mu_fine = rmap.lift_sa(mu)
    fine_data = sample_transitions(fine, mu_fine, n, seed)
    coarse_data = rmap.project(fine_data)
    F, G = refined.coarse_class, refined.lifted_class

    if name == "fit_cb":
        c = fit_cb(F, coarse_data)
        f = fit_cb(G, fine_data)
        c_idx, f_idx = c.index, f.index
        res_c = F[c_idx][coarse_data.s, coarse_data.a] - coarse_data.r
        res_f = G[f_idx][fine_data.s, fine_data.a] - fine_data.r
        loss_agree = np.array_equal(c.losses, f.losses) and np.array_equal(res_c, res_f)
        index_agree = c_idx == f_idx
    else:
        c = run_fqi(F, k, coarse_data, mdp=coarse, init_index=init_index)
        f = run_fqi(G, k, fine_data, mdp=fine, init_index=init_index)
        c_idx, f_idx = c.iterates[-1], f.iterates[-1]
        index_agree = c.iterates == f.iterates
        loss_agree = len(c.losses) == len(f.losses) and all(
            np.array_equal(x, y) for x, y in zip(c.losses, f.losses)
        )

    v_c = policy_value(coarse, greedy_policy(F[c_idx]))
    v_f = policy_value(fine, greedy_policy(G[f_idx]))
    value_agree = abs(v_c - v_f) <= value_atol
    divergence = None
    if not index_agree:
        divergence = f"chosen index {c_idx} (coarse) vs {f_idx} (fine)"
    elif not loss_agree:
        divergence = "empirical losses differ"
    elif not value_agree:
        divergence = f"policy value {v_c!r} (coarse) vs {v_f!r} (fine)"
    return CoupledResult(int(seed), index_agree, loss_agree, value_agree, divergence, c_idx, f_idx)


def invariance_sweep(algorithm, refined: RefinedProblem, mu: np.ndarray, n: int, seeds, **kwargs) -> InvarianceReport:
    report = InvarianceReport(_algorithm_name(algorithm), refined.kind)
    for seed in seeds:
        report.results.append(coupled_run(algorithm, refined, mu, n, seed, **kwargs))
    return report
