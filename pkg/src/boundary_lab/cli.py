"""Command-line entry point: ``boundary-lab <command> ...``.

Problems are JSON files (see :mod:`boundary_lab.serialization`) or the names
of shipped fixtures. Reports are JSON with sorted keys, so the same command
and seed always produce identical bytes.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import bounds as bd
from .admissible import admissible_cb, admissible_mdp
from .assumptions import (
    build_b_operator,
    check_contraction,
    check_exploratory_classical,
    check_realizability,
    concentrability,
    exploratory_bi,
    find_valid_reward_function,
    fixed_point_of_b,
    inherent_bellman_error,
)
from .boundary import cosmetic_split, determinize, invariance_sweep, reward_derandomize_split
from .function_class import greedy_policy
from .instances import Problem
from .learners import fit_cb, run_fqi
from .mdp import optimal_q, policy_q, policy_value, sample_transitions
from .scenarios import SCENARIOS
from .serialization import (
    FIXTURES,
    dumps_problem,
    dumps_report,
    load_problem,
    problem_digest,
)


class UsageError(Exception):
    pass


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--tol", type=float, default=1e-9, help="check tolerance, relative to Vmax (default 1e-9)")
    p.add_argument("--horizon", type=int, default=None, help="admissible-set horizon (default: from gamma)")
    p.add_argument("--budget", type=int, default=100_000, help="admissible-set enumeration budget")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--out", type=Path, default=None, help="write the report here instead of stdout")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="boundary-lab", description="Tabular batch-RL assumption and bound checker.")
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True
    problem_help = f"problem JSON file or fixture name ({', '.join(FIXTURES)})"

    p = sub.add_parser("solve", parents=[common], help="optimal values and behavior-policy values")
    p.add_argument("problem", help=problem_help)

    p = sub.add_parser("check", parents=[common], help="run every assumption checker")
    p.add_argument("problem", help=problem_help)

    p = sub.add_parser("learn", parents=[common], help="bandit regression or fitted Q-iteration")
    p.add_argument("problem", help=problem_help)
    p.add_argument("--fqi", action="store_true", help="run fitted Q-iteration instead of bandit regression")
    p.add_argument("-k", type=int, default=50, help="FQI iterations")
    p.add_argument("--n", type=int, default=None, help="dataset size (default: exact population losses)")
    p.add_argument("--init", type=int, default=0, help="index of the initial FQI iterate")

    p = sub.add_parser("transform", parents=[common], help="refine the problem and compare coupled runs")
    p.add_argument("problem", nargs="?", help=problem_help)
    p.add_argument("--spec", type=Path, help="refinement file {base_problem, transform, parameters}")
    p.add_argument("--kind", choices=("cosmetic", "derandomize", "determinize"))
    p.add_argument("--counts", help="comma-separated copy counts per state (cosmetic)")
    p.add_argument("--target", help="state,action to split by reward outcome (derandomize)")
    p.add_argument("--algorithm", choices=("fit_cb", "run_fqi"), default=None)
    p.add_argument("-k", type=int, default=10)
    p.add_argument("--n", type=int, default=200, help="fine dataset size per seed")
    p.add_argument("--seeds", type=int, default=100, help="number of coupled runs (seeds seed..seed+N-1)")
    p.add_argument("--emit", type=Path, help="also write the fine problem to this path")

    p = sub.add_parser("bounds", parents=[common], help="evaluate the performance bounds")
    p.add_argument("problem", help=problem_help)
    p.add_argument("--check", type=Path, dest="check_report", help="report written by `check` for this problem")
    p.add_argument("-k", type=int, default=50)
    p.add_argument("--n", type=int, default=None, help="dataset size (default: exact population losses)")

    p = sub.add_parser("scenario", parents=[common], help="run a worked example")
    p.add_argument("name", choices=sorted(SCENARIOS) + ["all"])
    p.add_argument("--nx", type=int, default=10**6)
    p.add_argument("--m", type=int, default=100)
    p.add_argument("--trials", type=int, default=2000)
    return parser


# commands return (report, ok)


def _admissible(prob: Problem, args):
    if prob.mdp.gamma == 0.0 and args.horizon in (None, 1):
        return admissible_cb(prob.mdp, prob.F)
    return admissible_mdp(prob.mdp, prob.F, args.horizon, args.budget, args.seed)


def _header(prob: Problem, args, name: str) -> dict:
    return {"problem": name, "problem_digest": problem_digest(prob), "gamma": prob.mdp.gamma,
            "vmax": prob.mdp.vmax, "tolerance": args.tol * prob.mdp.vmax, "budget": args.budget}


def cmd_solve(prob: Problem, args, name: str):
    mdp = prob.mdp
    q = optimal_q(mdp, tol=args.tol * mdp.vmax)
    pi = greedy_policy(q)
    report = _header(prob, args, name)
    report.update({
        "q_star": q, "v_star": policy_value(mdp, pi), "optimal_actions": pi.actions,
        "class_policy_values": {n: policy_value(mdp, greedy_policy(f)) for n, f in zip(prob.F.names, prob.F)},
    })
    if prob.behavior is not None:
        report["behavior"] = {"q": policy_q(mdp, prob.behavior), "value": policy_value(mdp, prob.behavior)}
    return report, True


def run_checks(prob: Problem, args) -> dict:
    mdp, F, mu = prob.mdp, prob.F, prob.mu
    tol = args.tol * mdp.vmax
    A = _admissible(prob, args)
    checks = {}
    if prob.behavior is not None:
        checks["exploratory-classical"] = check_exploratory_classical(mdp, prob.behavior).to_dict()
    real = check_realizability(mdp, F, mu, tol)
    checks["realizability"] = real.to_dict()
    checks["concentrability"] = concentrability(mu, A).to_dict()
    checks["exploratory-bi"] = exploratory_bi(F, mu, A).to_dict()
    f_star = None
    if mdp.gamma == 0.0:
        valid = find_valid_reward_function(mdp, F, mu, A, tol)
        checks["valid-reward-function"] = valid.to_dict()
        f_star = valid.f_star_index
    else:
        checks["inherent-bellman-error"] = inherent_bellman_error(mdp, F, tol).to_dict()
        B = build_b_operator(mdp, F, mu, A, tol)
        checks["b-operator"] = B.to_dict()
        if B.total:
            fp = fixed_point_of_b(B, F, A, tol)
            checks["fixed-point"] = fp.to_dict()
            checks["contraction"] = check_contraction(mdp, B, F, A, tol).to_dict()
            f_star = fp.f_star_index
    v_star = policy_value(mdp, greedy_policy(optimal_q(mdp, tol=1e-12 * mdp.vmax)))
    anchors = {"v_star": v_star, "f_star_index": f_star,
               "v_pi_fstar": None if f_star is None else policy_value(mdp, greedy_policy(F[f_star]))}
    return {
        "admissible": {"count": len(A), "exactness": A.exactness, "horizon": A.horizon,
                       "base_policies": A.base_policy_count, "sequences": A.sequence_count,
                       "mu_is_admissible": A.contains(mu)},
        "checks": checks,
        "anchors": anchors,
    }


def cmd_check(prob: Problem, args, name: str):
    report = _header(prob, args, name)
    report.update(run_checks(prob, args))
    return report, True


def _fit(prob: Problem, args, k: int, n: int | None):
    mdp, F, mu = prob.mdp, prob.F, prob.mu
    data = None if n is None else sample_transitions(mdp, mu, n, args.seed)
    if mdp.gamma == 0.0 and not getattr(args, "fqi", False):
        fit = fit_cb(F, data, mdp=mdp, mu=mu)
        pi = greedy_policy(F[fit.index])
        out = {"algorithm": "fit_cb", "index": fit.index, "eps": fit.eps, "losses": fit.losses}
        return out, fit.eps, pi
    trace = run_fqi(F, k, data, mdp=mdp, mu=mu, init_index=getattr(args, "init", 0))
    out = {"algorithm": "run_fqi", "k": k, **trace.to_dict(), "max_eps": trace.max_eps}
    return out, trace.max_eps, trace.policy


def cmd_learn(prob: Problem, args, name: str):
    mdp = prob.mdp
    report = _header(prob, args, name)
    learned, eps, pi = _fit(prob, args, args.k, args.n)
    achieved = policy_value(mdp, pi)
    learned.update({"mode": "population" if args.n is None else f"dataset n={args.n}",
                    "policy": pi.actions, "achieved": achieved})
    report["learn"] = learned
    ok = True
    if learned["algorithm"] == "run_fqi":
        checks = run_checks(prob, args)
        anchor = checks["anchors"]["v_pi_fstar"]
        C = checks["checks"]["exploratory-bi"]["constant"]
        if anchor is not None and C != "inf":
            r = bd.fqi_report(max(C, 1.0), eps, args.k, mdp.gamma, mdp.vmax, anchor, achieved, name)
            report["bound"] = r.to_dict()
            ok = bool(r.satisfied)
        else:
            report["bound"] = {"applicable": False, "reason": "no fixed point of B or unbounded C"}
    return report, ok


def cmd_bounds(prob: Problem, args, name: str):
    if args.check_report is None:
        raise UsageError(
            "`bounds` needs the report of a prior `check` run on the same problem: "
            f"run `boundary-lab check {name} --out check.json`, then `boundary-lab bounds {name} --check check.json`"
        )
    try:
        checked = json.loads(args.check_report.read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise UsageError(f"cannot read check report {str(args.check_report)!r}: {e}") from None
    if checked.get("problem_digest") != problem_digest(prob):
        raise UsageError("the check report was produced for a different problem; rerun `check` on this one")
    mdp, checks, anchors = prob.mdp, checked["checks"], checked["anchors"]
    _, eps, pi = _fit(prob, args, args.k, args.n)
    achieved = policy_value(mdp, pi)
    reports, comparisons = [], []
    if mdp.gamma == 0.0:
        cls = checks.get("exploratory-classical") or checks["concentrability"]
        C = cls["constant"]
        eps_approx = checks["realizability"]["eps_approx"]
        if C != "inf":
            if checks["realizability"]["status"] != "fails":
                reports.append(bd.classical_report(C, eps, anchors["v_star"], achieved, mdp.vmax, name))
            reports.append(bd.robust_report(C, eps, eps_approx, anchors["v_star"], achieved, mdp.vmax, name))
        C_bi = checks["exploratory-bi"]["constant"]
        if anchors["v_pi_fstar"] is not None and C_bi != "inf":
            reports.append(bd.invariant_report(max(C_bi, 1.0), eps, anchors["v_pi_fstar"], achieved, mdp.vmax, name))
            if C != "inf":
                comparisons.append(bd.compare_prop3(C, eps, eps_approx, anchors["v_star"], anchors["v_pi_fstar"],
                                                    achieved, mdp.vmax, name))
    else:
        C_bi = checks["exploratory-bi"]["constant"]
        if anchors["v_pi_fstar"] is not None and C_bi != "inf":
            reports.append(bd.fqi_report(max(C_bi, 1.0), eps, args.k, mdp.gamma, mdp.vmax, anchors["v_pi_fstar"],
                                         achieved, name))
    ok = all(r.satisfied for r in reports) and not any(c.violated for c in comparisons)
    if args.format == "csv":
        return bd.to_csv(reports), ok
    report = _header(prob, args, name)
    report.update({"eps": eps, "achieved": achieved, "bounds": [r.to_dict() for r in reports],
                   "prop3": [c.to_dict() for c in comparisons], "pass": ok})
    return report, ok


def _parse_pair(text: str, prob: Problem):
    s, a = text.split(",")
    S, A = prob.state_names, prob.action_names
    s = S.index(s) if s in S else int(s)
    a = A.index(a) if a in A else int(a)
    return s, a


def _fine_problem(prob: Problem, refined) -> Problem:
    names = []
    for x, lab in enumerate(refined.labels):
        s = int(refined.map.phi[x])
        names.append(prob.state_names[s] + lab[len(str(s)):])
    mu = refined.map.lift_sa(prob.mu)
    return Problem(refined.fine, refined.lifted_class, mu, None, tuple(names), prob.action_names)


def cmd_transform(prob: Problem | None, args, name: str):
    params = {}
    if args.spec is not None:
        try:
            spec = json.loads(args.spec.read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise UsageError(f"cannot read refinement file {str(args.spec)!r}: {e}") from None
        base = spec.get("base_problem")
        if base is None or "transform" not in spec:
            raise UsageError("refinement file needs 'base_problem' and 'transform'")
        base_path = Path(base) if Path(base).is_absolute() or base in FIXTURES else args.spec.parent / base
        name = base
        prob = load_problem(str(base_path) if base not in FIXTURES else base)
        kind = spec["transform"]
        params = spec.get("parameters", {})
    else:
        if prob is None or args.kind is None:
            raise UsageError("`transform` needs a problem and --kind, or --spec FILE")
        kind = args.kind
    mdp, F = prob.mdp, prob.F
    if kind == "cosmetic":
        counts = params.get("counts") or ([int(c) for c in args.counts.split(",")] if args.counts else None)
        if counts is None:
            raise UsageError("cosmetic split needs per-state copy counts (--counts 2,1,...)")
        refined = cosmetic_split(mdp, F, counts, params.get("weights"))
    elif kind == "derandomize":
        target = params.get("target") or (_parse_pair(args.target, prob) if args.target else None)
        if target is None:
            raise UsageError("derandomize needs --target state,action")
        refined = reward_derandomize_split(mdp, F, tuple(target))
    elif kind == "determinize":
        H = params.get("horizon", args.horizon if args.horizon is not None else 1)
        refined = determinize(mdp, F, H, params.get("budget", args.budget))
    else:
        raise UsageError(f"unknown transform {kind!r}; choose cosmetic, derandomize or determinize")

    algorithm = params.get("algorithm") or args.algorithm or ("fit_cb" if mdp.gamma == 0.0 else "run_fqi")
    n = int(params.get("n", args.n))
    seeds = range(args.seed, args.seed + int(params.get("seeds", args.seeds)))
    kwargs = {"k": int(params.get("k", args.k))} if algorithm == "run_fqi" else {}
    sweep = invariance_sweep(algorithm, refined, prob.mu, n, seeds, **kwargs)
    fine = _fine_problem(prob, refined)
    if args.emit is not None:
        args.emit.write_text(dumps_problem(fine))
    report = _header(prob, args, name)
    report.update({"transform": kind, "fine_states": len(fine.state_names), "phi": refined.map.phi,
                   "emission": refined.map.emission, "n": n, "invariance": sweep.to_dict()})
    return report, sweep.all_agree


def cmd_scenario(args):
    names = sorted(SCENARIOS) if args.name == "all" else [args.name]
    reports = []
    for n in names:
        if n == "unverifiability":
            r = SCENARIOS[n](args.nx, args.m, args.trials, args.seed)
        elif n == "imitation":
            r = SCENARIOS[n](args.seed)
        else:
            r = SCENARIOS[n]()
        reports.append(r.to_dict())
    ok = all(r["pass"] for r in reports)
    return (reports[0] if len(reports) == 1 else {"scenarios": reports, "pass": ok}), ok


COMMANDS = {"solve": cmd_solve, "check": cmd_check, "learn": cmd_learn, "bounds": cmd_bounds,
            "transform": cmd_transform}


def run(argv=None) -> tuple[int, str, Path | None]:
    """Parse and execute; returns ``(exit status, output text, output path)``."""
    args = build_parser().parse_args(argv)
    if not args.tol > 0:
        raise UsageError("--tol must be positive")
    if args.budget < 1:
        raise UsageError("--budget must be at least 1")
    if args.format == "csv" and args.command != "bounds":
        raise UsageError("--format csv is only available for `bounds`; use json for other commands")
    if args.command == "scenario":
        report, ok = cmd_scenario(args)
    else:
        source = getattr(args, "problem", None)
        prob = None if source is None else load_problem(source)
        report, ok = COMMANDS[args.command](prob, args, source)
    text = report if isinstance(report, str) else dumps_report(report)
    return (0 if ok else 1), text, args.out


def main(argv=None) -> int:
    try:
        status, text, out = run(argv)
    except (UsageError, ValueError) as e:
        print(f"boundary-lab: error: {e}", file=sys.stderr)
        return 2
    if out is not None:
        out.write_text(text)
    else:
        sys.stdout.write(text)
    return status


if __name__ == "__main__":
    sys.exit(main())
