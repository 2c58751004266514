"""Occurrence-splitting transform E -> E* and its inverse on assignments.

Every occurrence of an original variable gets its own copy. The copies of a
variable with ``m >= 2`` occurrences are tied together by the equality cycle
``(v1 | ~v2) & (v2 | ~v3) & ... & (vm | ~v1)``, so each copy sits in exactly
one original clause plus (at most) two 2-clauses of its cycle.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .errors import LengthMismatch
from .formula import CnfFormula, Literal


@dataclass(frozen=True)
class VarMap:
    """Correspondence between original and clustered variables (0-based).

    ``forward[v]`` lists the copies of ``v`` in occurrence order; it is empty
    for a variable that occurs nowhere in the formula. ``backward[u]`` is
    ``(original_var, copy_index)`` with ``copy_index`` 0-based.
    """

    forward: tuple
    backward: tuple

    @property
    def num_original(self) -> int:
        return len(self.forward)

    @property
    def num_clustered(self) -> int:
        return len(self.backward)

    def sidecar_lines(self) -> list[str]:
        """``<clustered_var> <original_var> <copy_index>``, all 1-based."""
        return [f"{u + 1} {v + 1} {k + 1}" for u, (v, k) in enumerate(self.backward)]

    @classmethod
    def from_sidecar(cls, text: str, num_original: int) -> "VarMap":
        backward = []
        forward = [[] for _ in range(num_original)]
        for line in text.splitlines():
            if not line.strip() or line.startswith("c"):
                continue
            u, v, k = (int(t) for t in line.split())
            if u != len(backward) + 1:
                raise ValueError(f"sidecar lines out of order at clustered var {u}")
            backward.append((v - 1, k - 1))
            forward[v - 1].append(u - 1)
        return cls(tuple(tuple(f) for f in forward), tuple(backward))


@dataclass(frozen=True)
class ClusterShapeReport:
    max_clauses_per_var: int
    max_occurrences_per_literal: int
    violations: tuple  # (var, count) pairs, 0-based var

    @property
    def ok(self) -> bool:
        return not self.violations


def clusterize(formula: CnfFormula) -> tuple[CnfFormula, VarMap]:
    """Split every variable occurrence into its own copy; returns ``(E*, map)``.

    Copies are numbered contiguously by original variable, and within one
    variable in clause-scan order (clause index, then literal position).
    """
    occ = formula.occurrence_index
    forward = []
    backward = []
    for v in range(formula.num_vars):
        copies = []
        for k in range(len(occ[v])):
            copies.append(len(backward))
            backward.append((v, k))
        forward.append(tuple(copies))

    next_copy = [0] * formula.num_vars
    clauses = []
    for clause in formula.clauses:
        new = []
        for lit in clause:
            new.append(Literal(forward[lit.var][next_copy[lit.var]], lit.negated))
            next_copy[lit.var] += 1
        clauses.append(tuple(new))

    for copies in forward:
        m = len(copies)
        if m < 2:
            continue
        for i in range(m):
            clauses.append((Literal(copies[i], False), Literal(copies[(i + 1) % m], True)))

    return CnfFormula(len(backward), tuple(clauses)), VarMap(tuple(forward), tuple(backward))


def lift_assignment(vmap: VarMap, a: Sequence[bool]) -> tuple:
    """Give every copy the value of its original variable."""
    if len(a) != vmap.num_original:
        raise LengthMismatch(f"expected {vmap.num_original} values, got {len(a)}")
    return tuple(bool(a[v]) for v, _ in vmap.backward)


def recover_assignment(vmap: VarMap, a_star: Sequence[bool]) -> tuple:
    """Project an E* assignment back to E: each variable takes its first copy's value.

    Variables without copies (absent from E) are set to False.
    """
    if len(a_star) != vmap.num_clustered:
        raise LengthMismatch(f"expected {vmap.num_clustered} values, got {len(a_star)}")
    return tuple(bool(a_star[c[0]]) if c else False for c in vmap.forward)


def verify_cluster_shape(formula: CnfFormula) -> ClusterShapeReport:
    max_clauses = 0
    max_lit = 0
    violations = []
    for v, occ in enumerate(formula.occurrence_index):
        n_clauses = len({ci for ci, _ in occ})
        n_neg = sum(1 for _, neg in occ if neg)
        worst_lit = max(n_neg, len(occ) - n_neg)
        max_clauses = max(max_clauses, n_clauses)
        max_lit = max(max_lit, worst_lit)
        if n_clauses > 3 or worst_lit > 2:
            violations.append((v, max(n_clauses, len(occ))))
    return ClusterShapeReport(max_clauses, max_lit, tuple(violations))
