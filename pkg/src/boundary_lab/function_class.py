"""Finite classes of Q-tables, their induced policies, and weighted norms."""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .mdp import Policy, greedy_actions


@dataclass(frozen=True, eq=False)
class FunctionClass:
    """An indexed, finite set of ``(nS, nA)`` tables stacked as ``(K, nS, nA)``."""

    tables: np.ndarray
    names: tuple = ()

    def __post_init__(self):
        tables = np.array(self.tables, dtype=float, copy=True)
        if tables.ndim == 2:
            tables = tables[None]
        if tables.ndim != 3 or tables.shape[0] == 0:
            raise ValueError("a function class needs at least one (nS, nA) table")
        tables.setflags(write=False)
        names = tuple(self.names) or tuple(f"f{i}" for i in range(tables.shape[0]))
        if len(names) != tables.shape[0]:
            raise ValueError("one name per table")
        object.__setattr__(self, "tables", tables)
        object.__setattr__(self, "names", names)

    def __len__(self):
        return self.tables.shape[0]

    def __getitem__(self, i) -> np.ndarray:
        return self.tables[i]

    def __iter__(self):
        return iter(self.tables)

    @property
    def shape(self):
        return self.tables.shape[1:]

    def range_violations(self, vmax: float) -> list[str]:
        out = []
        for name, f in zip(self.names, self.tables):
            if f.min() < 0 or f.max() > vmax:
                out.append(f"{name} has values in [{f.min():g}, {f.max():g}], outside [0, {vmax:g}]")
        return out

    def index_of(self, f: np.ndarray, atol: float = 0.0) -> int | None:
        """Lowest index whose table matches ``f`` in sup norm up to ``atol``."""
        gaps = np.abs(self.tables - f).max(axis=(1, 2))
        hits = np.flatnonzero(gaps <= atol)
        return int(hits[0]) if hits.size else None

    def with_tables(self, extra, names=()) -> "FunctionClass":
        extra = np.asarray(extra, dtype=float)
        if extra.ndim == 2:
            extra = extra[None]
        names = tuple(names) or tuple(f"f{len(self) + i}" for i in range(extra.shape[0]))
        return FunctionClass(np.concatenate([self.tables, extra]), self.names + names)

    def __eq__(self, other):
        if not isinstance(other, FunctionClass):
            return NotImplemented
        return self.names == other.names and np.array_equal(self.tables, other.tables)

    def __repr__(self):
        return f"FunctionClass(K={len(self)}, shape={self.shape})"


def greedy_policy(f: np.ndarray) -> Policy:
    f = np.asarray(f)
    return Policy.deterministic(greedy_actions(f), f.shape[1])


def pairwise_max_policy(f: np.ndarray, g: np.ndarray) -> Policy:
    """``pi_{f,g}(s) = argmax_a max(f(s,a), g(s,a))``, ties to the lowest action."""
    if np.shape(f) != np.shape(g):
        raise ValueError("tables must share dimensions")
    return greedy_policy(np.maximum(f, g))


def weighted_norm(f: np.ndarray, nu: np.ndarray) -> float:
    return float(np.sqrt(np.sum(nu * np.square(f))))


def class_diameter(F: FunctionClass, nu: np.ndarray) -> float:
    best = 0.0
    for i, j in combinations(range(len(F)), 2):
        best = max(best, weighted_norm(F[i] - F[j], nu))
    return best


def base_policies(F: FunctionClass) -> list[Policy]:
    """``{pi_f} U {pi_{f,f'}}`` in index order, deduplicated by exact equality."""
    seen = {}
    for f in F:
        pi = greedy_policy(f)
        seen.setdefault(pi.key, pi)
    for i, j in combinations(range(len(F)), 2):
        pi = pairwise_max_policy(F[i], F[j])
        seen.setdefault(pi.key, pi)
    return list(seen.values())
