"""Finite MDPs and contextual bandits with exact solution routines.

A contextual bandit is a ``TabularMDP`` with ``gamma == 0``. Rewards have finite
support so every population quantity (means, variances, losses) is computed in
closed form from the model parameters.

State-action distributions are plain ``(nS, nA)`` arrays and state
distributions are ``(nS,)`` arrays.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence, Union

import numpy as np

PROB_ATOL = 1e-12


def _frozen(x, dtype=float) -> np.ndarray:
    arr = np.array(x, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class RewardDistribution:
    """Finite-support reward law: ``values[j]`` with probability ``probs[j]``."""

    values: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        values = _frozen(np.atleast_1d(self.values))
        probs = _frozen(np.atleast_1d(self.probs))
        if values.shape != probs.shape or values.ndim != 1:
            raise ValueError("reward values and probs must be 1-d arrays of equal length")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "probs", probs)

    @classmethod
    def point(cls, value: float) -> "RewardDistribution":
        return cls([value], [1.0])

    @classmethod
    def bernoulli(cls, p: float, high: float = 1.0) -> "RewardDistribution":
        # the high outcome is listed first
        return cls([high, 0.0], [p, 1.0 - p])

    @property
    def mean(self) -> float:
        return float(self.values @ self.probs)

    @property
    def var(self) -> float:
        return float(((self.values - self.mean) ** 2) @ self.probs)

    @property
    def is_deterministic(self) -> bool:
        return int(np.count_nonzero(self.probs)) == 1

    def support(self):
        return [(float(v), float(p)) for v, p in zip(self.values, self.probs)]

    def __eq__(self, other):
        if not isinstance(other, RewardDistribution):
            return NotImplemented
        return np.array_equal(self.values, other.values) and np.array_equal(self.probs, other.probs)

    def __repr__(self):
        return f"RewardDistribution({self.support()})"


@dataclass(frozen=True, eq=False)
class TabularMDP:
    """Finite discounted MDP ``(S, A, P, R, gamma, d0)``.

    ``P`` has shape ``(nS, nA, nS)`` and ``rewards[s][a]`` is a
    :class:`RewardDistribution`. Construction only checks shapes; use
    :func:`validate` for the probability and range invariants.
    """

    P: np.ndarray
    rewards: tuple
    gamma: float
    d0: np.ndarray
    rmax: float = 1.0

    def __post_init__(self):
        P = _frozen(self.P)
        if P.ndim != 3 or P.shape[0] != P.shape[2]:
            raise ValueError(f"P must have shape (nS, nA, nS), got {P.shape}")
        nS, nA, _ = P.shape
        rewards = tuple(tuple(row) for row in self.rewards)
        if len(rewards) != nS or any(len(row) != nA for row in rewards):
            raise ValueError("rewards must be an nS x nA grid of RewardDistribution")
        d0 = _frozen(self.d0)
        if d0.shape != (nS,):
            raise ValueError(f"d0 must have shape ({nS},), got {d0.shape}")
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "rewards", rewards)
        object.__setattr__(self, "d0", d0)
        object.__setattr__(self, "gamma", float(self.gamma))
        object.__setattr__(self, "rmax", float(self.rmax))

    @property
    def nS(self) -> int:
        return self.P.shape[0]

    @property
    def nA(self) -> int:
        return self.P.shape[1]

    @property
    def vmax(self) -> float:
        return self.rmax / (1.0 - self.gamma)

    @cached_property
    def mean_reward(self) -> np.ndarray:
        r = np.array([[R.mean for R in row] for row in self.rewards])
        r.setflags(write=False)
        return r

    @cached_property
    def reward_var(self) -> np.ndarray:
        v = np.array([[R.var for R in row] for row in self.rewards])
        v.setflags(write=False)
        return v

    def __eq__(self, other):
        if not isinstance(other, TabularMDP):
            return NotImplemented
        return (
            np.array_equal(self.P, other.P)
            and self.rewards == other.rewards
            and self.gamma == other.gamma
            and np.array_equal(self.d0, other.d0)
            and self.rmax == other.rmax
        )

    def __repr__(self):
        return f"TabularMDP(nS={self.nS}, nA={self.nA}, gamma={self.gamma}, rmax={self.rmax})"


@dataclass(frozen=True, eq=False)
class Policy:
    """Stationary policy stored as an ``(nS, nA)`` row-stochastic matrix."""

    probs: np.ndarray

    def __post_init__(self):
        probs = _frozen(self.probs)
        if probs.ndim != 2:
            raise ValueError("policy matrix must be 2-d")
        object.__setattr__(self, "probs", probs)

    @classmethod
    def deterministic(cls, actions: Sequence[int], nA: int) -> "Policy":
        actions = np.asarray(actions, dtype=int)
        probs = np.zeros((actions.size, nA))
        probs[np.arange(actions.size), actions] = 1.0
        return cls(probs)

    @classmethod
    def uniform(cls, nS: int, nA: int) -> "Policy":
        return cls(np.full((nS, nA), 1.0 / nA))

    @property
    def nS(self) -> int:
        return self.probs.shape[0]

    @property
    def nA(self) -> int:
        return self.probs.shape[1]

    @property
    def is_deterministic(self) -> bool:
        return bool(np.all((self.probs == 0.0) | (self.probs == 1.0)))

    @property
    def actions(self) -> np.ndarray:
        """Per-state action index (the mode for stochastic policies)."""
        return np.argmax(self.probs, axis=1)

    @property
    def key(self) -> bytes:
        return self.probs.tobytes()

    def __eq__(self, other):
        if not isinstance(other, Policy):
            return NotImplemented
        return np.array_equal(self.probs, other.probs)

    def __hash__(self):
        return hash(self.key)

    def __repr__(self):
        if self.is_deterministic:
            return f"Policy(actions={self.actions.tolist()})"
        return f"Policy({self.probs.tolist()})"


@dataclass(frozen=True)
class NonstationaryPolicy:
    """Policy sequence ``steps[0], steps[1], ...`` followed by ``tail`` forever."""

    steps: tuple
    tail: Policy | None = None

    def __post_init__(self):
        steps = tuple(self.steps)
        if not steps and self.tail is None:
            raise ValueError("nonstationary policy needs at least one policy")
        object.__setattr__(self, "steps", steps)
        if self.tail is None:
            object.__setattr__(self, "tail", steps[-1])

    def at(self, t: int) -> Policy:
        """Policy used at time step ``t`` (1-based)."""
        if t < 1:
            raise ValueError("time steps start at 1")
        return self.steps[t - 1] if t <= len(self.steps) else self.tail


AnyPolicy = Union[Policy, NonstationaryPolicy]


@dataclass(frozen=True, eq=False)
class Dataset:
    """Transition records ``(s, a, r, s_next)``; ``s_next`` is None for bandits."""

    s: np.ndarray
    a: np.ndarray
    r: np.ndarray
    s_next: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "s", _frozen(self.s, int))
        object.__setattr__(self, "a", _frozen(self.a, int))
        object.__setattr__(self, "r", _frozen(self.r, float))
        if self.s_next is not None:
            object.__setattr__(self, "s_next", _frozen(self.s_next, int))
        n = self.s.size
        if self.a.size != n or self.r.size != n or (self.s_next is not None and self.s_next.size != n):
            raise ValueError("dataset columns must have equal length")

    def __len__(self):
        return int(self.s.size)

    def tobytes(self) -> bytes:
        parts = [self.s.tobytes(), self.a.tobytes(), self.r.tobytes()]
        if self.s_next is not None:
            parts.append(self.s_next.tobytes())
        return b"".join(parts)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        if (self.s_next is None) != (other.s_next is None):
            return False
        return self.tobytes() == other.tobytes()


def validate(mdp: TabularMDP) -> list[str]:
    """Return a list of invariant violations; empty iff ``mdp`` is valid."""
    problems = []
    if not 0.0 <= mdp.gamma < 1.0:
        problems.append(f"gamma={mdp.gamma} outside [0, 1)")
    if not mdp.rmax > 0:
        problems.append(f"rmax={mdp.rmax} must be positive")
    for s in range(mdp.nS):
        for a in range(mdp.nA):
            row = mdp.P[s, a]
            if np.any(row < 0):
                problems.append(f"P[{s},{a}] has negative entry {row.min():g}")
            total = row.sum()
            if abs(total - 1.0) > PROB_ATOL:
                problems.append(f"P[{s},{a}] sums to {total:.12g} (off by {total - 1.0:.3g})")
            R = mdp.rewards[s][a]
            if np.any(R.probs < 0):
                problems.append(f"R[{s},{a}] has negative probability {R.probs.min():g}")
            total = R.probs.sum()
            if abs(total - 1.0) > PROB_ATOL:
                problems.append(f"R[{s},{a}] probabilities sum to {total:.12g} (off by {total - 1.0:.3g})")
            lo, hi = R.values.min(), R.values.max()
            if lo < 0 or hi > mdp.rmax:
                bad = lo if lo < 0 else hi
                problems.append(f"R[{s},{a}] value {bad:g} outside [0, rmax={mdp.rmax:g}]")
    if np.any(mdp.d0 < 0):
        problems.append(f"d0 has negative entry {mdp.d0.min():g}")
    total = mdp.d0.sum()
    if abs(total - 1.0) > PROB_ATOL:
        problems.append(f"d0 sums to {total:.12g} (off by {total - 1.0:.3g})")
    return problems


def _as_nonstationary(pi: AnyPolicy) -> NonstationaryPolicy:
    if isinstance(pi, NonstationaryPolicy):
        return pi
    return NonstationaryPolicy((pi,))


def push_states(mdp: TabularMDP, nu: np.ndarray) -> np.ndarray:
    """State distribution of ``s'`` when ``(s, a) ~ nu`` and ``s' ~ P(s, a)``."""
    return np.einsum("sa,sat->t", nu, mdp.P)


def occupancy(mdp: TabularMDP, pi: AnyPolicy, t: int) -> np.ndarray:
    """Exact ``d_t^pi(s, a) = Pr[s_t = s, a_t = a]`` under ``s_1 ~ d0``."""
    if t < 1:
        raise ValueError("t must be a positive integer")
    pi = _as_nonstationary(pi)
    eta = np.asarray(mdp.d0, dtype=float)
    for step in range(1, t):
        eta = push_states(mdp, eta[:, None] * pi.at(step).probs)
    return eta[:, None] * pi.at(t).probs


def _policy_matrix(mdp: TabularMDP, pi: Policy) -> np.ndarray:
    # (nS*nA, nS*nA) transition matrix over state-action pairs
    nS, nA = mdp.nS, mdp.nA
    return (mdp.P.reshape(nS * nA, nS)[:, :, None] * pi.probs[None, :, :]).reshape(nS * nA, nS * nA)


def policy_q(mdp: TabularMDP, pi: Policy) -> np.ndarray:
    """Solve ``Q = rbar + gamma P Pi Q`` directly."""
    nS, nA = mdp.nS, mdp.nA
    r = mdp.mean_reward.reshape(-1)
    if mdp.gamma == 0.0:
        return mdp.mean_reward.copy()
    M = _policy_matrix(mdp, pi)
    q = np.linalg.solve(np.eye(nS * nA) - mdp.gamma * M, r)
    residual = np.abs(q - (r + mdp.gamma * M @ q)).max()
    if residual > 1e-10 * mdp.vmax:
        raise ArithmeticError(f"policy evaluation residual {residual:.3g} exceeds 1e-10 * Vmax")
    return q.reshape(nS, nA)


def state_values(q: np.ndarray, pi: Policy) -> np.ndarray:
    return np.sum(q * pi.probs, axis=1)


def policy_value(mdp: TabularMDP, pi: AnyPolicy, d0: np.ndarray | None = None) -> float:
    """Expected discounted return from ``d0`` (or another start distribution).

    Nonstationary policies are evaluated exactly: the tail policy's value is
    solved in closed form and the finite prefix is handled by backward
    recursion, so no horizon truncation is needed.
    """
    start = mdp.d0 if d0 is None else np.asarray(d0, dtype=float)
    if isinstance(pi, Policy):
        return float(start @ state_values(policy_q(mdp, pi), pi))
    v = state_values(policy_q(mdp, pi.tail), pi.tail)
    for step in reversed(pi.steps):
        q = mdp.mean_reward + mdp.gamma * mdp.P @ v
        v = state_values(q, step)
    return float(start @ v)


def bellman_backup(mdp: TabularMDP, f: np.ndarray) -> np.ndarray:
    """``(Tf)(s,a) = E[r] + gamma * sum_s' P(s'|s,a) max_a' f(s',a')``."""
    if mdp.gamma == 0.0:
        return mdp.mean_reward.copy()
    return mdp.mean_reward + mdp.gamma * mdp.P @ np.max(f, axis=1)


def greedy_actions(f: np.ndarray) -> np.ndarray:
    # np.argmax breaks ties toward the lowest index
    return np.argmax(f, axis=1)


def optimal_q(mdp: TabularMDP, tol: float = 1e-10, max_iter: int = 1_000_000) -> np.ndarray:
    """``Q*`` to sup-norm accuracy ``tol``.

    Runs value iteration until the update drops below ``tol (1-gamma) / (2 gamma)``,
    then tries to polish the answer by evaluating the greedy policy exactly; the
    polished table is kept only if it is itself a Bellman fixed point to
    within the same accuracy.
    """
    if mdp.gamma == 0.0:
        return bellman_backup(mdp, np.zeros((mdp.nS, mdp.nA)))
    stop = tol * (1.0 - mdp.gamma) / (2.0 * mdp.gamma)
    q = np.zeros((mdp.nS, mdp.nA))
    for _ in range(max_iter):
        new = bellman_backup(mdp, q)
        delta = np.abs(new - q).max()
        q = new
        if delta <= stop:
            break
    else:
        raise RuntimeError("value iteration did not converge")
    pi = Policy.deterministic(greedy_actions(q), mdp.nA)
    polished = policy_q(mdp, pi)
    if np.abs(bellman_backup(mdp, polished) - polished).max() <= stop:
        return polished
    return q


def simulate(mdp: TabularMDP, pi: AnyPolicy, steps: int, rng: np.random.Generator):
    """Roll out one trajectory; returns a list of ``(s, a, r)`` tuples."""
    pi = _as_nonstationary(pi)
    s = int(rng.choice(mdp.nS, p=mdp.d0))
    out = []
    for t in range(1, steps + 1):
        a = int(rng.choice(mdp.nA, p=pi.at(t).probs[s]))
        R = mdp.rewards[s][a]
        r = float(R.values[rng.choice(R.values.size, p=R.probs)])
        out.append((s, a, r))
        s = int(rng.choice(mdp.nS, p=mdp.P[s, a]))
    return out


def _inverse_cdf(cum: np.ndarray, last: np.ndarray, u: np.ndarray) -> np.ndarray:
    idx = np.sum(u[:, None] >= cum, axis=1)
    return np.minimum(idx, last)


def sample_transitions(mdp: TabularMDP, mu: np.ndarray, n: int, seed) -> Dataset:
    """Draw ``n`` i.i.d. records with ``(s,a) ~ mu``, ``r ~ R(s,a)``, ``s' ~ P(s,a)``."""
    mu = np.asarray(mu, dtype=float)
    nS, nA = mdp.nS, mdp.nA
    rng = np.random.default_rng(seed)
    flat = mu.reshape(-1)
    pairs = rng.choice(nS * nA, size=n, p=flat / flat.sum()) if n else np.zeros(0, dtype=int)
    s, a = np.divmod(pairs, nA)

    width = max(R.values.size for row in mdp.rewards for R in row)
    rvals = np.zeros((nS, nA, width))
    rcum = np.ones((nS, nA, width))
    rlast = np.zeros((nS, nA), dtype=int)
    for i in range(nS):
        for j in range(nA):
            R = mdp.rewards[i][j]
            k = R.values.size
            rvals[i, j, :k] = R.values
            rcum[i, j, :k] = np.cumsum(R.probs)
            rlast[i, j] = np.flatnonzero(R.probs)[-1]
    u = rng.random(n)
    ridx = _inverse_cdf(rcum[s, a], rlast[s, a], u)
    r = rvals[s, a, ridx]

    s_next = None
    if mdp.gamma > 0.0:
        pcum = np.cumsum(mdp.P, axis=2)
        plast = (nS - 1) - np.argmax(mdp.P[:, :, ::-1] > 0, axis=2)
        u = rng.random(n)
        s_next = _inverse_cdf(pcum[s, a], plast[s, a], u)
    return Dataset(s, a, r, s_next)
