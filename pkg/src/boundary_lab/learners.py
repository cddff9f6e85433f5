"""Least-squares bandit regression, Fitted Q-Iteration, and behavior cloning.

Each learner runs in one of two modes:

* dataset mode: argmin of the empirical squared loss on a :class:`Dataset`;
* population mode: argmin of the exact population loss under ``mu``.

Argmin ties always go to the lowest class index. The reported suboptimality
``eps`` is always measured against exact population losses, which requires
the model and ``mu`` even in dataset mode.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .function_class import FunctionClass, greedy_policy
from .mdp import Dataset, Policy, TabularMDP


class CBFit(NamedTuple):
    index: int
    eps: float | None
    losses: np.ndarray  # loss of every class member in the mode that was fit


def empirical_loss_cb(data: Dataset, f: np.ndarray) -> float:
    if len(data) == 0:
        raise ValueError("empirical loss of an empty dataset is undefined")
    return float(np.mean(np.square(f[data.s, data.a] - data.r)))


def population_loss_cb(mdp: TabularMDP, mu: np.ndarray, f: np.ndarray) -> float:
    """``sum mu(s,a) [(f - rbar)^2 + Var r]``, exact."""
    if mdp.gamma != 0.0:
        raise ValueError("bandit loss requires gamma == 0; use population_target_loss")
    return float(np.sum(mu * (np.square(f - mdp.mean_reward) + mdp.reward_var)))


def _next_max(f_prev: np.ndarray) -> np.ndarray:
    return np.max(f_prev, axis=1)


def population_target_loss(mdp: TabularMDP, mu: np.ndarray, f: np.ndarray, f_prev: np.ndarray) -> float:
    """``E_mu E_{r,s'}[(f(s,a) - r - gamma max_a' f_prev(s',a'))^2]``, exact.

    Reward and next state are independent given ``(s, a)``, so the loss splits
    into the squared bias against ``T f_prev`` plus the reward variance plus
    ``gamma^2`` times the variance of the bootstrapped next-state value.
    """
    return float(np.sum(mu * _target_loss_terms(mdp, f_prev, f[None])[0]))


def _target_loss_terms(mdp: TabularMDP, f_prev: np.ndarray, tables: np.ndarray) -> np.ndarray:
    # per-(s,a) expected squared loss for every table in ``tables``
    noise = mdp.reward_var
    if mdp.gamma == 0.0:
        target = mdp.mean_reward
    else:
        v = _next_max(f_prev)
        ev = mdp.P @ v
        noise = noise + mdp.gamma**2 * (mdp.P @ np.square(v) - np.square(ev))
        target = mdp.mean_reward + mdp.gamma * ev
    return np.square(tables - target) + noise


def population_target_losses(mdp: TabularMDP, mu: np.ndarray, F: FunctionClass, f_prev: np.ndarray) -> np.ndarray:
    return np.einsum("sa,ksa->k", mu, _target_loss_terms(mdp, f_prev, F.tables))


def empirical_target_losses(data: Dataset, F: FunctionClass, f_prev: np.ndarray, gamma: float) -> np.ndarray:
    if len(data) == 0:
        raise ValueError("empirical loss of an empty dataset is undefined")
    y = data.r
    if gamma > 0.0:
        y = y + gamma * _next_max(f_prev)[data.s_next]
    return np.mean(np.square(F.tables[:, data.s, data.a] - y), axis=1)


def _population_losses_cb(mdp, mu, F):
    return np.array([population_loss_cb(mdp, mu, f) for f in F])


def fit_cb(
    F: FunctionClass,
    data: Dataset | None = None,
    *,
    mdp: TabularMDP | None = None,
    mu: np.ndarray | None = None,
) -> CBFit:
    """Least-squares regression of rewards over the class.

    Fits on ``data`` when given, otherwise on the population loss under
    ``(mdp, mu)``. ``eps = L_mu(f_hat) - min_f L_mu(f)`` whenever the model is
    available, else ``None``.
    """
    population = None
    if mdp is not None and mu is not None:
        population = _population_losses_cb(mdp, mu, F)
    if data is not None:
        if len(data) == 0:
            raise ValueError("cannot fit on an empty dataset")
        losses = np.mean(np.square(F.tables[:, data.s, data.a] - data.r), axis=1)
    elif population is not None:
        losses = population
    else:
        raise ValueError("need a dataset or (mdp, mu)")
    index = int(np.argmin(losses))
    eps = None if population is None else float(population[index] - population.min())
    return CBFit(index, eps, losses)


Chooser = Callable[[np.ndarray, int], int]


@dataclass
class FQITrace:
    iterates: list  # class indices f_1 .. f_k
    eps: list  # eps_1 = 0 (initialization), eps_i population suboptimality of step i
    policy: Policy
    losses: list  # loss vector used for each fitting step

    @property
    def max_eps(self) -> float:
        return max(self.eps)

    def to_dict(self) -> dict:
        return {"iterates": list(self.iterates), "eps": list(self.eps), "policy": self.policy.actions.tolist()}


def run_fqi(
    F: FunctionClass,
    k: int,
    data: Dataset | None = None,
    *,
    mdp: TabularMDP | None = None,
    mu: np.ndarray | None = None,
    init_index: int = 0,
    chooser: Chooser | None = None,
    gamma: float | None = None,
) -> FQITrace:
    """Fitted Q-Iteration over a finite class.

    ``f_1 = F[init_index]`` and ``f_i = argmin_f L(f; f_{i-1})`` for ``i = 2..k``.
    ``chooser(losses, i)`` can override the argmin, which is how suboptimal
    regression steps are injected in tests.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    if data is None and (mdp is None or mu is None):
        raise ValueError("need a dataset or (mdp, mu)")
    if mdp is not None:
        gamma = mdp.gamma
    elif gamma is None:
        if data.s_next is not None:
            raise ValueError("dataset mode without a model needs gamma")
        gamma = 0.0
    have_model = mdp is not None and mu is not None
    iterates, eps, used = [init_index], [0.0], []
    for i in range(2, k + 1):
        prev = F[iterates[-1]]
        if data is not None:
            losses = empirical_target_losses(data, F, prev, gamma)
        else:
            losses = population_target_losses(mdp, mu, F, prev)
        j = int(np.argmin(losses)) if chooser is None else int(chooser(losses, i))
        used.append(losses)
        if have_model:
            pop = losses if data is None else population_target_losses(mdp, mu, F, prev)
            eps.append(float(pop[j] - pop.min()))
        else:
            eps.append(float("nan"))
        iterates.append(j)
    return FQITrace(iterates, eps, greedy_policy(F[iterates[-1]]), used)


def behavior_clone(demos, n_obs: int, n_actions: int) -> Policy:
    """Per-observation majority vote; ties and unseen observations go to action 0."""
    demos = list(demos)
    if not demos:
        raise ValueError("need at least one demonstration")
    counts = np.zeros((n_obs, n_actions), dtype=int)
    for o, a in demos:
        counts[o, a] += 1
    return Policy.deterministic(np.argmax(counts, axis=1), n_actions)
