"""Performance lower bounds for the fitted policy and their comparison.

All four bounds take measured inputs: a concentrability-type constant ``C``,
the regression suboptimality ``eps``, optionally ``eps_approx`` and an anchor
value (``v*`` for the classical bounds, ``v^{pi_f*}`` for the
boundary-invariant ones).
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

CSV_COLUMNS = ("instance_id", "theorem", "C", "eps", "eps_approx", "k", "bound", "achieved", "satisfied")
SATISFY_RTOL = 1e-9


def _check_common(C: float, eps: float):
    if not C >= 1.0:  # also rejects nan
        raise ValueError(f"concentrability constant must be >= 1, got {C}")
    if not eps >= 0.0:
        raise ValueError(f"eps must be nonnegative, got {eps}")


def bound_cb_classical(C: float, eps: float, v_star: float) -> float:
    """``v* - 2 sqrt(C eps)``; needs realizability and an exploratory behavior policy."""
    _check_common(C, eps)
    return v_star - 2.0 * math.sqrt(C * eps)


def bound_cb_robust(C: float, eps: float, eps_approx: float, v_star: float) -> float:
    """``v* - 2 sqrt(C (eps + eps_approx))``; the misspecified version of the classical bound."""
    _check_common(C, eps)
    if not eps_approx >= 0.0:
        raise ValueError(f"eps_approx must be nonnegative, got {eps_approx}")
    return v_star - 2.0 * math.sqrt(C * (eps + eps_approx))


def bound_cb_invariant(C: float, eps: float, v_pi_fstar: float | None) -> float:
    """``v^{pi_f*} - 2 sqrt(C eps)`` for a valid reward function ``f*``."""
    if v_pi_fstar is None:
        raise ValueError("no valid reward function f*: the boundary-invariant bandit bound does not apply")
    _check_common(C, eps)
    return v_pi_fstar - 2.0 * math.sqrt(C * eps)


def bound_fqi_invariant(C: float, eps: float, k: int, gamma: float, vmax: float, v_pi_fstar: float | None) -> float:
    """``v^{pi_f*} - 2/(1-gamma) * (sqrt(C eps)/(1-gamma) + gamma^k Vmax)``."""
    if not 0.0 <= gamma < 1.0:
        raise ValueError(f"gamma must lie in [0, 1), got {gamma}")
    if v_pi_fstar is None:
        raise ValueError("no fixed point f* of B: the FQI bound does not apply")
    if k < 1:
        raise ValueError("k must be at least 1")
    _check_common(C, eps)
    h = 1.0 - gamma
    return v_pi_fstar - (2.0 / h) * (math.sqrt(C * eps) / h + gamma**k * vmax)


@dataclass
class BoundReport:
    name: str
    bound: float
    achieved: float | None
    vmax: float = 1.0
    C: float | None = None
    eps: float | None = None
    eps_approx: float | None = None
    k: int | None = None
    gamma: float | None = None
    anchor: float | None = None
    instance_id: str = ""

    @property
    def satisfied(self) -> bool | None:
        if self.achieved is None:
            return None
        return self.achieved >= self.bound - SATISFY_RTOL * self.vmax

    @property
    def slack(self) -> float | None:
        return None if self.achieved is None else self.achieved - self.bound

    def to_dict(self) -> dict:
        return {
            "theorem": self.name,
            "inputs": {"C": self.C, "eps": self.eps, "eps_approx": self.eps_approx, "k": self.k,
                       "gamma": self.gamma, "vmax": self.vmax, "anchor": self.anchor},
            "bound": self.bound,
            "achieved": self.achieved,
            "satisfied": self.satisfied,
            "tolerance": SATISFY_RTOL * self.vmax,
        }

    def csv_row(self) -> dict:
        return {"instance_id": self.instance_id, "theorem": self.name, "C": self.C, "eps": self.eps,
                "eps_approx": self.eps_approx, "k": self.k, "bound": self.bound,
                "achieved": self.achieved, "satisfied": self.satisfied}


def classical_report(C, eps, v_star, achieved=None, vmax=1.0, instance_id="") -> BoundReport:
    return BoundReport("classical-cb", bound_cb_classical(C, eps, v_star), achieved, vmax, C, eps,
                       anchor=v_star, instance_id=instance_id)


def robust_report(C, eps, eps_approx, v_star, achieved=None, vmax=1.0, instance_id="") -> BoundReport:
    return BoundReport("robust-cb", bound_cb_robust(C, eps, eps_approx, v_star), achieved, vmax, C, eps,
                       eps_approx, anchor=v_star, instance_id=instance_id)


def invariant_report(C, eps, v_pi_fstar, achieved=None, vmax=1.0, instance_id="") -> BoundReport:
    return BoundReport("invariant-cb", bound_cb_invariant(C, eps, v_pi_fstar), achieved, vmax, C, eps,
                       anchor=v_pi_fstar, instance_id=instance_id)


def fqi_report(C, eps, k, gamma, vmax, v_pi_fstar, achieved=None, instance_id="") -> BoundReport:
    return BoundReport("invariant-fqi", bound_fqi_invariant(C, eps, k, gamma, vmax, v_pi_fstar), achieved,
                       vmax, C, eps, k=k, gamma=gamma, anchor=v_pi_fstar, instance_id=instance_id)


@dataclass
class Prop3Comparison:
    robust: BoundReport
    invariant: BoundReport
    premise: bool  # eps <= eps_approx / 2

    @property
    def dominates(self) -> bool:
        return self.invariant.bound >= self.robust.bound - SATISFY_RTOL * self.robust.vmax

    @property
    def violated(self) -> bool:
        return self.premise and not self.dominates

    def to_dict(self) -> dict:
        return {"robust": self.robust.to_dict(), "invariant": self.invariant.to_dict(),
                "premise": self.premise, "invariant_at_least_robust": self.dominates}


def compare_prop3(C, eps, eps_approx, v_star, v_pi_fstar, achieved=None, vmax=1.0, instance_id="") -> Prop3Comparison:
    """Both bandit bounds side by side with the premise ``eps <= eps_approx / 2``.

    Under the premise (and the assumptions behind both bounds) the invariant
    bound is never below the robust one; off the premise no ordering is claimed.
    """
    return Prop3Comparison(
        robust_report(C, eps, eps_approx, v_star, achieved, vmax, instance_id),
        invariant_report(C, eps, v_pi_fstar, achieved, vmax, instance_id),
        eps <= eps_approx / 2,
    )


def to_csv(reports) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for r in reports:
        row = {k: ("" if v is None else v) for k, v in r.csv_row().items()}
        writer.writerow(row)
    return buf.getvalue()
