"""JSON problem files, fixtures, and report serialization.

A problem file is a JSON object::

    {
      "states": ["s0", "s1"], "actions": ["a"],
      "gamma": 0.0, "rmax": 1.0,
      "d0": {"s0": 0.5, "s1": 0.5},
      "transitions": [{"from": "s0", "action": "a", "to": "s1", "prob": 1.0}],
      "rewards": [{"state": "s0", "action": "a", "support": [{"value": 1.0, "prob": 1.0}]}],
      "function_class": [{"name": "f0", "table": [[0.5], [0.5]]}],
      "mu": [{"state": "s0", "action": "a", "prob": 0.5}, ...]
    }

``function_class`` may instead be a path (relative to the problem file) to a
JSON list in the same format. ``behavior_policy`` (``{state: {action: prob}}``)
may replace ``mu``, in which case ``mu = d0 x behavior``. Omitted transition
rows are self-loops and omitted reward rows pay 0.
"""
from __future__ import annotations

import hashlib
import json
import math
from importlib import resources
from pathlib import Path

import numpy as np

from .function_class import FunctionClass
from .instances import Problem
from .mdp import PROB_ATOL, Policy, RewardDistribution, TabularMDP, validate

FIXTURES = ("fig2a", "fig2b", "appendix-b", "appendix-e", "closed-under-T-chain")


class ProblemFormatError(ValueError):
    pass


def _get(doc: dict, key: str, where: str = ""):
    if key not in doc:
        raise ProblemFormatError(f"{where}missing field '{key}'")
    return doc[key]


def _number(x, where: str) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ProblemFormatError(f"{where}: expected a number, got {x!r}")
    return float(x)


def _lookup(names: dict, name, kind: str, where: str) -> int:
    if name not in names:
        raise ProblemFormatError(f"{where}: unknown {kind} {name!r}")
    return names[name]


def _check_sum(total: float, where: str):
    if abs(total - 1.0) > PROB_ATOL:
        raise ProblemFormatError(f"{where}: probabilities sum to {total:.12g}, not 1")


def _names(doc, key) -> list:
    names = _get(doc, key)
    if not isinstance(names, list) or not names or not all(isinstance(n, str) for n in names):
        raise ProblemFormatError(f"field '{key}' must be a nonempty list of names")
    if len(set(names)) != len(names):
        raise ProblemFormatError(f"field '{key}' has duplicate names")
    return names


def _parse_class(entries, nS: int, nA: int, base: Path | None) -> FunctionClass:
    if isinstance(entries, str):
        path = Path(entries) if base is None else base / entries
        try:
            entries = json.loads(path.read_text())
        except FileNotFoundError:
            raise ProblemFormatError(f"function_class: file {str(path)!r} not found") from None
        except json.JSONDecodeError as e:
            raise ProblemFormatError(f"function_class file line {e.lineno} column {e.colno}: {e.msg}") from None
    if not isinstance(entries, list) or not entries:
        raise ProblemFormatError("function_class must be a nonempty list or a path")
    tables, names = [], []
    for i, entry in enumerate(entries):
        where = f"function_class[{i}]"
        table = np.asarray(_get(entry, "table", where + ": "), dtype=float)
        if table.shape != (nS, nA):
            raise ProblemFormatError(f"{where}: table has shape {table.shape}, expected ({nS}, {nA})")
        tables.append(table)
        names.append(str(entry.get("name", f"f{i}")))
    return FunctionClass(np.array(tables), names)


def problem_from_dict(doc: dict, base: Path | None = None) -> Problem:
    if not isinstance(doc, dict):
        raise ProblemFormatError("a problem must be a JSON object")
    states, actions = _names(doc, "states"), _names(doc, "actions")
    S = {n: i for i, n in enumerate(states)}
    A = {n: i for i, n in enumerate(actions)}
    nS, nA = len(states), len(actions)
    gamma = _number(_get(doc, "gamma"), "gamma")
    rmax = _number(doc.get("rmax", 1.0), "rmax")
    if not 0.0 <= gamma < 1.0:
        raise ProblemFormatError(f"gamma: {gamma} outside [0, 1)")

    d0 = np.zeros(nS)
    for name, p in _get(doc, "d0").items():
        d0[_lookup(S, name, "state", "d0")] = _number(p, f"d0[{name!r}]")
    _check_sum(d0.sum(), "d0")

    P = np.zeros((nS, nA, nS))
    seen = np.zeros((nS, nA), dtype=bool)
    for i, t in enumerate(doc.get("transitions", [])):
        where = f"transitions[{i}]"
        s = _lookup(S, _get(t, "from", where + ": "), "state", where)
        a = _lookup(A, _get(t, "action", where + ": "), "action", where)
        s2 = _lookup(S, _get(t, "to", where + ": "), "state", where)
        p = _number(_get(t, "prob", where + ": "), where + ".prob")
        if p < 0:
            raise ProblemFormatError(f"{where}: negative probability {p}")
        P[s, a, s2] += p
        seen[s, a] = True
    for s, a in zip(*np.nonzero(seen)):
        _check_sum(P[s, a].sum(), f"transitions from {states[s]!r} under {actions[a]!r}")
    for s, a in zip(*np.nonzero(~seen)):
        P[s, a, s] = 1.0

    rewards = [[RewardDistribution.point(0.0) for _ in range(nA)] for _ in range(nS)]
    for i, r in enumerate(doc.get("rewards", [])):
        where = f"rewards[{i}]"
        s = _lookup(S, _get(r, "state", where + ": "), "state", where)
        a = _lookup(A, _get(r, "action", where + ": "), "action", where)
        support = _get(r, "support", where + ": ")
        if not support:
            raise ProblemFormatError(f"{where}: empty support")
        values = [_number(_get(x, "value", where + ": "), where + ".value") for x in support]
        probs = [_number(_get(x, "prob", where + ": "), where + ".prob") for x in support]
        if min(probs) < 0:
            raise ProblemFormatError(f"{where}: negative probability")
        _check_sum(sum(probs), f"reward of {states[s]!r} under {actions[a]!r}")
        bad = [v for v in values if v < 0 or v > rmax]
        if bad:
            raise ProblemFormatError(f"{where}: reward value {bad[0]} outside [0, rmax={rmax}]")
        rewards[s][a] = RewardDistribution(values, probs)

    mdp = TabularMDP(P, rewards, gamma, d0, rmax)
    problems = validate(mdp)
    if problems:
        raise ProblemFormatError("; ".join(problems))

    F = _parse_class(_get(doc, "function_class"), nS, nA, base)
    mu, behavior = None, None
    if "mu" in doc:
        mu = np.zeros((nS, nA))
        for i, m in enumerate(doc["mu"]):
            where = f"mu[{i}]"
            s = _lookup(S, _get(m, "state", where + ": "), "state", where)
            a = _lookup(A, _get(m, "action", where + ": "), "action", where)
            mu[s, a] += _number(_get(m, "prob", where + ": "), where + ".prob")
        if mu.min() < 0:
            raise ProblemFormatError("mu: negative probability")
        _check_sum(mu.sum(), "mu")
    elif "behavior_policy" in doc:
        probs = np.zeros((nS, nA))
        for name, row in doc["behavior_policy"].items():
            s = _lookup(S, name, "state", "behavior_policy")
            for act, p in row.items():
                probs[s, _lookup(A, act, "action", f"behavior_policy[{name!r}]")] = _number(p, "behavior_policy")
        for s in range(nS):
            _check_sum(probs[s].sum(), f"behavior_policy[{states[s]!r}]")
        behavior = Policy(probs)
    else:
        raise ProblemFormatError("need either 'mu' or 'behavior_policy'")
    return Problem(mdp, F, mu, behavior, tuple(states), tuple(actions))


def loads_problem(text: str, base: Path | None = None) -> Problem:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ProblemFormatError(f"line {e.lineno} column {e.colno}: {e.msg}") from None
    return problem_from_dict(doc, base)


def load_problem(source) -> Problem:
    """Load from a path, or from a shipped fixture when ``source`` names one."""
    if isinstance(source, str) and source in FIXTURES and not Path(source).exists():
        return loads_problem(fixture_text(source))
    path = Path(source)
    if not path.exists():
        raise ProblemFormatError(f"no problem file or fixture named {str(source)!r} (fixtures: {', '.join(FIXTURES)})")
    return loads_problem(path.read_text(), path.parent)


def fixture_text(name: str) -> str:
    if name not in FIXTURES:
        raise KeyError(f"unknown fixture {name!r}; available: {', '.join(FIXTURES)}")
    return resources.files("boundary_lab").joinpath("fixtures", f"{name}.json").read_text()


def problem_to_dict(prob: Problem) -> dict:
    mdp, S, A = prob.mdp, prob.state_names, prob.action_names
    doc = {
        "states": list(S),
        "actions": list(A),
        "gamma": mdp.gamma,
        "rmax": mdp.rmax,
        "d0": {S[s]: float(p) for s, p in enumerate(mdp.d0) if p > 0},
        "transitions": [
            {"from": S[s], "action": A[a], "to": S[t], "prob": float(mdp.P[s, a, t])}
            for s in range(mdp.nS) for a in range(mdp.nA) for t in np.flatnonzero(mdp.P[s, a])
        ],
        "rewards": [
            {"state": S[s], "action": A[a],
             "support": [{"value": float(v), "prob": float(p)} for v, p in zip(R.values, R.probs)]}
            for s, row in enumerate(mdp.rewards) for a, R in enumerate(row)
        ],
        "function_class": [{"name": n, "table": t.tolist()} for n, t in zip(prob.F.names, prob.F.tables)],
    }
    if prob.behavior is not None:
        doc["behavior_policy"] = {
            S[s]: {A[a]: float(prob.behavior.probs[s, a]) for a in range(mdp.nA)} for s in range(mdp.nS)
        }
    else:
        doc["mu"] = [{"state": S[s], "action": A[a], "prob": float(prob.mu[s, a])}
                     for s, a in zip(*np.nonzero(prob.mu))]
    return doc


def dumps_problem(prob: Problem) -> str:
    return json.dumps(problem_to_dict(prob), indent=2) + "\n"


def problem_digest(prob: Problem) -> str:
    return hashlib.sha256(json.dumps(problem_to_dict(prob), sort_keys=True).encode()).hexdigest()[:16]


def plain(obj):
    """Convert numpy values and non-finite floats into JSON-safe values."""
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return plain(obj.tolist())
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return "nan" if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    return obj


def dumps_report(report) -> str:
    """Deterministic JSON: sorted keys, fixed indentation, trailing newline."""
    return json.dumps(plain(report), sort_keys=True, indent=2) + "\n"
