"""Exact checkers for the classical and boundary-invariant assumptions.

Classical checks (exploratory behavior policy, realizability, inherent
Bellman error, concentrability) inspect states directly. The
boundary-invariant checks only touch the model through expectations of class
members under admissible distributions and the data distribution ``mu``.

Equality-type conditions are tested to an explicit tolerance, by default
``1e-9 * Vmax``. The squared-loss decomposition conditions are tested in
their cross-term form: for a candidate ``g`` and regression target with
conditional mean ``m``,

    L_mu(f') - L_mu(g) - ||f' - g||_mu^2 = 2 E_mu[(f' - g)(g - m)],

so the decomposition holds to ``tol`` iff the cross term is at most ``tol/2``.
When the admissible set was sampled, a passing check is reported as
``holds-on-sample``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .admissible import AdmissibleSet
from .function_class import FunctionClass, greedy_policy, pairwise_max_policy
from .mdp import Policy, TabularMDP, bellman_backup, optimal_q, policy_q

HOLDS = "holds"
FAILS = "fails"
HOLDS_ON_SAMPLE = "holds-on-sample"


@dataclass
class CheckReport:
    name: str
    status: str
    constant: float | None
    tolerance: float
    witnesses: list = field(default_factory=list)
    exactness: str | None = None
    horizon: int | None = None
    eps_approx: float | None = None
    f_star_index: int | None = None

    @property
    def holds(self) -> bool:
        return self.status != FAILS

    def to_dict(self) -> dict:
        return {
            "check": self.name,
            "status": self.status,
            "constant": _num(self.constant),
            "tolerance": self.tolerance,
            "witnesses": self.witnesses,
            "admissible_exactness": self.exactness,
            "horizon": self.horizon,
            "eps_approx": _num(self.eps_approx),
            "f_star_index": self.f_star_index,
        }


def _num(x):
    if x is None:
        return None
    x = float(x)
    return "inf" if np.isinf(x) else x


def _status(ok: bool, A: AdmissibleSet | None) -> str:
    if not ok:
        return FAILS
    if A is not None and not A.exact:
        return HOLDS_ON_SAMPLE
    return HOLDS


def default_tol(mdp: TabularMDP) -> float:
    return 1e-9 * mdp.vmax


def _meta(A: AdmissibleSet | None) -> dict:
    if A is None:
        return {}
    return {"exactness": A.exactness, "horizon": A.horizon}


# classical, boundary-dependent checks


def check_exploratory_classical(mdp: TabularMDP, pib: Policy) -> CheckReport:
    """Tightest ``C`` with ``pi_b(a|s) >= 1/C`` for every state and action."""
    probs = pib.probs
    s, a = np.unravel_index(np.argmin(probs), probs.shape)
    low = probs[s, a]
    if low <= 0:
        starved = [{"state": int(i), "action": int(j)} for i, j in zip(*np.nonzero(probs <= 0))]
        return CheckReport("exploratory-classical", FAILS, np.inf, 0.0, starved)
    witness = [{"state": int(s), "action": int(a), "prob": float(low)}]
    return CheckReport("exploratory-classical", HOLDS, 1.0 / low, 0.0, witness)


def check_realizability(
    mdp: TabularMDP, F: FunctionClass, mu: np.ndarray, tol: float | None = None
) -> CheckReport:
    """Whether ``Q*`` is in the class; always reports ``eps_approx``."""
    tol = default_tol(mdp) if tol is None else tol
    qstar = optimal_q(mdp, tol=1e-12 * mdp.vmax)
    sup = np.abs(F.tables - qstar).max(axis=(1, 2))
    dist2 = np.einsum("sa,ksa->k", mu, np.square(F.tables - qstar))
    best = int(np.argmin(sup))
    report = CheckReport(
        "realizability",
        HOLDS if sup[best] <= tol else FAILS,
        float(sup[best]),
        tol,
        [{"closest_index": best, "sup_gap": float(sup[best]), "mu_closest_index": int(np.argmin(dist2))}],
    )
    report.eps_approx = float(dist2.min())
    return report


def inherent_bellman_error(mdp: TabularMDP, F: FunctionClass, tol: float | None = None) -> CheckReport:
    """``max_f min_g ||g - Tf||_inf`` over the class."""
    tol = default_tol(mdp) if tol is None else tol
    targets = np.array([bellman_backup(mdp, f) for f in F])
    gaps = np.abs(F.tables[None, :] - targets[:, None]).max(axis=(2, 3))  # [f, g]
    best_g = gaps.argmin(axis=1)
    per_f = gaps[np.arange(len(F)), best_g]
    worst = int(np.argmax(per_f))
    value = float(per_f[worst])
    witness = [{"f_index": worst, "best_g_index": int(best_g[worst]), "gap": value}]
    return CheckReport("inherent-bellman-error", HOLDS if value <= tol else FAILS, value, tol, witness)


def concentrability(mu: np.ndarray, A: AdmissibleSet) -> CheckReport:
    """``C = max_{nu, s, a} nu(s,a) / mu(s,a)``; a lower bound if ``A`` is sampled."""
    nus = A.distributions
    null = (mu <= 0)[None] & (nus > 0)
    if null.any():
        n, s, a = (int(x) for x in np.argwhere(null)[0])
        witness = [{"nu": A.labels[n], "state": s, "action": a, "nu_mass": float(nus[n, s, a])}]
        return CheckReport("concentrability", FAILS, np.inf, 0.0, witness, **_meta(A))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(nus > 0, nus / np.where(mu > 0, mu, 1.0), 0.0)
    n, s, a = np.unravel_index(np.argmax(ratio), ratio.shape)
    C = float(ratio[n, s, a])
    witness = [{"nu": A.labels[n], "state": int(s), "action": int(a), "ratio": C}]
    if not A.exact:
        witness.append({"note": "sampled admissible set: C is a lower bound"})
    return CheckReport("concentrability", _status(True, A), C, 0.0, witness, **_meta(A))


def exploratory_bi(F: FunctionClass, mu: np.ndarray, A: AdmissibleSet, tol: float = 0.0) -> CheckReport:
    """Tightest ``C`` with ``||f-f'||_nu^2 <= C ||f-f'||_mu^2`` over pairs and admissible ``nu``.

    The tightest ratio can fall below 1; the bounds then use ``max(C, 1)``.

    Pairs whose difference vanishes under both ``mu`` and every ``nu`` impose
    no constraint; with no constrained pair the constant is reported as 1.
    """
    K = len(F)
    if K < 2:
        return CheckReport("exploratory-bi", _status(True, A), 1.0, tol, [], **_meta(A))
    i, j = np.triu_indices(K, 1)
    diff2 = np.square(F.tables[i] - F.tables[j])  # (pairs, nS, nA)
    on_mu = np.einsum("sa,psa->p", mu, diff2)
    on_nu = np.einsum("nsa,psa->pn", A.distributions, diff2)
    worst_nu = on_nu.max(axis=1)
    bad = (on_mu <= tol) & (worst_nu > tol)
    if bad.any():
        p = int(np.flatnonzero(bad)[0])
        n = int(np.argmax(on_nu[p]))
        witness = [{"f": int(i[p]), "f_prime": int(j[p]), "nu": A.labels[n],
                    "nu_sq_norm": float(on_nu[p, n]), "mu_sq_norm": float(on_mu[p])}]
        return CheckReport("exploratory-bi", FAILS, np.inf, tol, witness, **_meta(A))
    live = on_mu > tol
    if not live.any():
        return CheckReport("exploratory-bi", _status(True, A), 1.0, tol, [], **_meta(A))
    ratios = np.where(live, worst_nu / np.where(live, on_mu, 1.0), 0.0)
    p = int(np.argmax(ratios))
    n = int(np.argmax(on_nu[p]))
    witness = [{"f": int(i[p]), "f_prime": int(j[p]), "nu": A.labels[n], "ratio": float(ratios[p])}]
    return CheckReport("exploratory-bi", _status(True, A), float(ratios[p]), tol, witness, **_meta(A))


# valid reward functions and the B operator


def target_residuals(F: FunctionClass, mu: np.ndarray, A: AdmissibleSet, target: np.ndarray):
    """Per-candidate residuals of the mean-matching and cross-term conditions.

    ``target`` is the conditional mean ``E[y | s, a]`` of the regression target.
    Returns ``(eq_mean[g], eq_cross[g])``: max over admissible ``nu`` of
    ``|E_nu[g - target]|`` and max over ``f'`` of ``|E_mu[(f' - g)(g - target)]|``.
    """
    gaps = F.tables - target  # (K, nS, nA)
    mean_res = np.abs(np.einsum("nsa,gsa->gn", A.distributions, gaps)).max(axis=1)
    weighted = mu[None] * gaps  # mu (g - target)
    # E_mu[(f' - g)(g - target)] = <f', mu (g - t)> - <g, mu (g - t)>
    cross = np.einsum("psa,gsa->gp", F.tables, weighted) - np.einsum("gsa,gsa->g", F.tables, weighted)[:, None]
    return mean_res, np.abs(cross).max(axis=1)


def find_valid_reward_function(
    mdp: TabularMDP,
    F: FunctionClass,
    mu: np.ndarray,
    A: AdmissibleSet,
    tol: float | None = None,
) -> CheckReport:
    """Lowest-index class member that is a valid reward function of the bandit."""
    if mdp.gamma != 0.0:
        raise ValueError("valid reward functions are defined for bandits (gamma == 0)")
    tol = default_tol(mdp) if tol is None else tol
    mean_res, cross_res = target_residuals(F, mu, A, mdp.mean_reward)
    ok = (mean_res <= tol) & (cross_res <= tol / 2)
    witnesses = [
        {"index": g, "reward_residual": float(mean_res[g]), "sqloss_residual": float(2 * cross_res[g])}
        for g in range(len(F))
    ]
    if ok.any():
        g = int(np.flatnonzero(ok)[0])
        report = CheckReport("valid-reward-function", _status(True, A), None, tol, [witnesses[g]], **_meta(A))
        report.f_star_index = g
        return report
    return CheckReport("valid-reward-function", FAILS, None, tol, witnesses, **_meta(A))


@dataclass
class BOperatorMap:
    """Index map ``f -> Bf`` on the class, with per-source residuals."""

    mapping: tuple  # int, or None where no valid image exists
    eq5_residuals: np.ndarray
    eq6_residuals: np.ndarray
    best_candidates: tuple
    tolerance: float
    exactness: str | None = None
    horizon: int | None = None

    @property
    def total(self) -> bool:
        return all(m is not None for m in self.mapping)

    @property
    def status(self) -> str:
        if not self.total:
            return FAILS
        return HOLDS_ON_SAMPLE if self.exactness == "sampled" else HOLDS

    def __getitem__(self, i: int) -> int:
        g = self.mapping[i]
        if g is None:
            raise KeyError(f"no valid image for class member {i}")
        return g

    def to_dict(self) -> dict:
        return {
            "check": "b-operator",
            "status": self.status,
            "mapping": list(self.mapping),
            "best_candidates": list(self.best_candidates),
            "reward_residuals": self.eq5_residuals.tolist(),
            "sqloss_residuals": self.eq6_residuals.tolist(),
            "tolerance": self.tolerance,
            "admissible_exactness": self.exactness,
            "horizon": self.horizon,
        }


def build_b_operator(
    mdp: TabularMDP,
    F: FunctionClass,
    mu: np.ndarray,
    A: AdmissibleSet,
    tol: float | None = None,
) -> BOperatorMap:
    """For each ``f``, the lowest-index ``g`` valid for target ``r + gamma max f(s', .)``.

    The target's conditional mean is ``Tf`` so every expectation is exact.
    Residuals reported for a source are the chosen image's, or the best
    candidate's when none qualifies (scored by the larger normalized residual).
    """
    tol = default_tol(mdp) if tol is None else tol
    mapping, best, r5, r6 = [], [], [], []
    for f in F:
        mean_res, cross_res = target_residuals(F, mu, A, bellman_backup(mdp, f))
        ok = (mean_res <= tol) & (cross_res <= tol / 2)
        if ok.any():
            g = int(np.flatnonzero(ok)[0])
            mapping.append(g)
        else:
            g = int(np.argmin(np.maximum(mean_res / tol, 2 * cross_res / tol)))
            mapping.append(None)
        best.append(g)
        r5.append(mean_res[g])
        r6.append(2 * cross_res[g])
    return BOperatorMap(tuple(mapping), np.array(r5), np.array(r6), tuple(best), tol, A.exactness, A.horizon)


@dataclass
class FixedPointReport:
    f_star_index: int | None
    iterations_to_fix: int
    max_residual: float
    path: list
    cycle: list = field(default_factory=list)
    tolerance: float = 0.0

    @property
    def found(self) -> bool:
        return self.f_star_index is not None

    def to_dict(self) -> dict:
        return {
            "check": "fixed-point",
            "status": HOLDS if self.found else FAILS,
            "f_star_index": self.f_star_index,
            "iterations_to_fix": self.iterations_to_fix,
            "max_residual": self.max_residual,
            "path": self.path,
            "cycle": self.cycle,
            "tolerance": self.tolerance,
        }


def _max_norm_over(A: AdmissibleSet, diff: np.ndarray) -> float:
    return float(np.sqrt(np.einsum("nsa,sa->n", A.distributions, np.square(diff)).max()))


def fixed_point_of_b(B: BOperatorMap, F: FunctionClass, A: AdmissibleSet, tol: float, start: int = 0) -> FixedPointReport:
    """Iterate the index map from ``start`` until ``||Bf - f||_nu <= tol`` on every tested ``nu``.

    A revisited index without such an ``f`` means the iteration cycles, which
    can only happen through the tolerance used to build ``B``; the cycle is
    reported instead of raising.
    """
    if not B.total:
        raise ValueError("B operator is not total; the closure assumption fails")
    path, seen, i = [], {}, start
    while i not in seen:
        seen[i] = len(path)
        path.append(i)
        residual = _max_norm_over(A, F[B[i]] - F[i])
        if residual <= tol:
            return FixedPointReport(i, len(path) - 1, residual, path, tolerance=tol)
        i = B[i]
    cycle = path[seen[i]:]
    residual = min(_max_norm_over(A, F[B[j]] - F[j]) for j in cycle)
    return FixedPointReport(None, len(path), residual, path, cycle, tol)


def check_contraction(
    mdp: TabularMDP, B: BOperatorMap, F: FunctionClass, A: AdmissibleSet, slack: float | None = None
) -> CheckReport:
    """``||Bf - Bf'||_nu <= gamma ||f - f'||_{P(nu) x pi_{f,f'}}`` for all pairs and tested ``nu``.

    ``slack`` defaults to ``1e-9 * Vmax``. The reported constant is the largest
    observed excess of the left side over ``gamma`` times the right norm.
    """
    slack = 1e-9 * mdp.vmax if slack is None else slack
    nus = A.distributions
    pushed = np.einsum("nsa,sat->nt", nus, mdp.P)  # P(nu) over next states
    worst, witnesses = -np.inf, []
    for i, j in combinations(range(len(F)), 2):
        lhs = np.sqrt(np.einsum("nsa,sa->n", nus, np.square(F[B[i]] - F[B[j]])))
        acts = pairwise_max_policy(F[i], F[j]).actions
        gap = np.square(F[i] - F[j])[np.arange(mdp.nS), acts]
        rhs = mdp.gamma * np.sqrt(pushed @ gap)
        excess = lhs - rhs
        n = int(np.argmax(excess))
        worst = max(worst, float(excess[n]))
        if excess[n] > slack:
            witnesses.append({"f": i, "f_prime": j, "nu": A.labels[n], "lhs": float(lhs[n]), "rhs": float(rhs[n])})
    worst = 0.0 if worst == -np.inf else worst
    return CheckReport("contraction", _status(not witnesses, A), worst, slack, witnesses, **_meta(A))


def value_identity_gap(mdp: TabularMDP, f_star: np.ndarray, A: AdmissibleSet) -> float:
    """``max_nu |E_nu[f*] - E_nu[Q^{pi_f*}]|``: how far ``f*`` is from being its own policy's value."""
    q = policy_q(mdp, greedy_policy(f_star))
    return float(np.abs(np.einsum("nsa,sa->n", A.distributions, f_star - q)).max())


def norm_gap(A: AdmissibleSet, f: np.ndarray, g: np.ndarray) -> float:
    """``max_nu ||f - g||_nu`` over the admissible set."""
    return _max_norm_over(A, np.asarray(f) - np.asarray(g))

