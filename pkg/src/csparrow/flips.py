"""Make/break accounting and flip/state classification.

``make`` counts clauses going unsatisfied -> satisfied when a variable is
flipped, ``brk`` counts satisfied -> unsatisfied, and ``delta = make - brk``.
Only variables occurring in an unsatisfied clause (candidates) are ever
flipped by the solvers.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import LengthMismatch, TooManyVariables, VarOutOfRange
from .formula import CnfFormula, assignment_from_index, clause_satisfied, unsatisfied_clauses

MAX_TABLE_VARS = 5


class FlipDelta(NamedTuple):
    make: int
    brk: int

    @property
    def delta(self) -> int:
        return self.make - self.brk


class FlipClass(enum.IntEnum):
    """Ordered so that ``max`` picks the higher value flip."""

    NEGATIVE = -1
    NULL = 0
    POSITIVE = 1

    @property
    def label(self) -> str:
        return self.name.lower()


class StateKind(enum.Enum):
    POSITIVE = "positive"
    NON_POSITIVE = "non_positive"
    SOLVED = "solved"


@dataclass(frozen=True)
class StateClassification:
    positive_vars: tuple
    null_vars: tuple
    negative_vars: tuple

    @property
    def state_kind(self) -> StateKind:
        if self.positive_vars:
            return StateKind.POSITIVE
        if self.null_vars or self.negative_vars:
            return StateKind.NON_POSITIVE
        return StateKind.SOLVED

    def by_class(self) -> list[tuple[FlipClass, tuple]]:
        """Non-empty classes, highest first."""
        ranked = [
            (FlipClass.POSITIVE, self.positive_vars),
            (FlipClass.NULL, self.null_vars),
            (FlipClass.NEGATIVE, self.negative_vars),
        ]
        return [(cls, vs) for cls, vs in ranked if vs]

    @property
    def candidates(self) -> tuple:
        return tuple(sorted(self.positive_vars + self.null_vars + self.negative_vars))


def classify_flip(d: FlipDelta | int) -> FlipClass:
    delta = d.delta if isinstance(d, FlipDelta) else int(d)
    if delta > 0:
        return FlipClass.POSITIVE
    if delta < 0:
        return FlipClass.NEGATIVE
    return FlipClass.NULL


def _check(formula: CnfFormula, a: Sequence[bool]) -> None:
    if len(a) != formula.num_vars:
        raise LengthMismatch(f"assignment has {len(a)} values, formula has {formula.num_vars} variables")


def make_break(formula: CnfFormula, a: Sequence[bool], v: int) -> FlipDelta:
    """Make and break counts for flipping ``v``; only clauses holding ``v`` are inspected."""
    if not 0 <= v < formula.num_vars:
        raise VarOutOfRange(f"variable {v + 1} outside 1..{formula.num_vars}")
    _check(formula, a)
    make = brk = 0
    for ci, neg in formula.occurrence_index[v]:
        n_true = sum(1 for lit in formula.clauses[ci] if bool(a[lit.var]) != lit.negated)
        if n_true == 0:
            make += 1
        elif n_true == 1 and bool(a[v]) != neg:
            brk += 1
    return FlipDelta(make, brk)


def candidate_variables(formula: CnfFormula, a: Sequence[bool]) -> list[int]:
    _check(formula, a)
    out = set()
    for ci in unsatisfied_clauses(formula, a):
        out.update(lit.var for lit in formula.clauses[ci])
    return sorted(out)


def classify_state(formula: CnfFormula, a: Sequence[bool]) -> StateClassification:
    groups = {FlipClass.POSITIVE: [], FlipClass.NULL: [], FlipClass.NEGATIVE: []}
    for v in candidate_variables(formula, a):
        groups[classify_flip(make_break(formula, a, v))].append(v)
    return StateClassification(
        tuple(groups[FlipClass.POSITIVE]), tuple(groups[FlipClass.NULL]), tuple(groups[FlipClass.NEGATIVE])
    )


class FlipTableRow(NamedTuple):
    index: int  # 0-based enumeration index; bit k is the value of pattern variable k
    values: tuple
    clause_values: tuple
    make: int
    brk: int
    satisfying: bool

    @property
    def delta(self) -> int:
        return self.make - self.brk


def flip_table(pattern: CnfFormula, primary_var: int = 0) -> list[FlipTableRow]:
    """Enumerate all assignments of a small pattern and the effect of flipping ``primary_var``.

    Row ``r`` assigns bit ``k`` of ``r`` to pattern variable ``k``. For the
    cluster ``(x|a) & (x|~b) & (~x|b)`` with variables ordered ``x, a, b`` this
    gives the rows in the classic 1, 2, 3*, 4, 5, 6*, 15, 16* order.
    """
    if pattern.num_vars > MAX_TABLE_VARS:
        raise TooManyVariables(f"flip table limited to {MAX_TABLE_VARS} variables, got {pattern.num_vars}")
    if not 0 <= primary_var < pattern.num_vars:
        raise VarOutOfRange(f"primary variable {primary_var + 1} outside 1..{pattern.num_vars}")
    rows = []
    for r in range(1 << pattern.num_vars):
        a = assignment_from_index(r, pattern.num_vars)
        cv = tuple(clause_satisfied(c, a) for c in pattern.clauses)
        d = make_break(pattern, a, primary_var)
        rows.append(FlipTableRow(r, a, cv, d.make, d.brk, all(cv)))
    return rows


def format_flip_table(pattern: CnfFormula, rows: list[FlipTableRow], primary_var: int = 0) -> str:
    """Render a flip table; satisfying rows carry ``*`` and no delta."""
    names = [f"x{i + 1}" for i in range(pattern.num_vars)]
    clause_names = [" v ".join(repr(l) for l in c) for c in pattern.clauses]
    p = names[primary_var]
    header = ["row"] + names + clause_names + ["make", "break", f"{p}:0->1", f"{p}:1->0"]
    lines = ["\t".join(header)]
    for row in rows:
        up = down = ""
        if not row.satisfying:
            cell = f"{row.delta:+d}" if row.delta else "0"
            if row.values[primary_var]:
                down = cell
            else:
                up = cell
        label = f"{row.index + 1}{'*' if row.satisfying else ''}"
        cells = [label] + [str(int(v)) for v in row.values] + [str(int(c)) for c in row.clause_values]
        cells += [str(row.make), str(row.brk), up, down]
        lines.append("\t".join(cells))
    return "\n".join(lines) + "\n"


class FlipState:
    """Mutable evaluator for one assignment, updated incrementally under flips.

    Keeps the number of true literals per clause plus per-variable make and
    break counters, so a flip costs O(occurrences of the variable and their
    clause neighbours). One solver run owns one instance.
    """

    def __init__(self, formula: CnfFormula, a: Sequence[bool]):
        _check(formula, a)
        self.formula = formula
        self.reset(a)

    def reset(self, a: Sequence[bool]) -> None:
        f = self.formula
        self.values = [bool(x) for x in a]
        self.n_true = [0] * f.num_clauses
        self.make = [0] * f.num_vars
        self.brk = [0] * f.num_vars
        self.unsat = set()
        self.candidates = set()
        for ci, clause in enumerate(f.clauses):
            true_vars = [lit.var for lit in clause if self.values[lit.var] != lit.negated]
            self.n_true[ci] = len(true_vars)
            if not true_vars:
                self.unsat.add(ci)
                for lit in clause:
                    self.make[lit.var] += 1
                    self.candidates.add(lit.var)
            elif len(true_vars) == 1:
                self.brk[true_vars[0]] += 1

    @property
    def satisfied_count(self) -> int:
        return self.formula.num_clauses - len(self.unsat)

    @property
    def solved(self) -> bool:
        return not self.unsat

    def assignment(self) -> tuple:
        return tuple(self.values)

    def delta(self, v: int) -> FlipDelta:
        return FlipDelta(self.make[v], self.brk[v])

    def classify(self) -> StateClassification:
        pos, null, neg = [], [], []
        make, brk = self.make, self.brk
        for v in sorted(self.candidates):
            d = make[v] - brk[v]
            if d > 0:
                pos.append(v)
            elif d < 0:
                neg.append(v)
            else:
                null.append(v)
        return StateClassification(tuple(pos), tuple(null), tuple(neg))

    def _sole_true_var(self, ci: int) -> int:
        for lit in self.formula.clauses[ci]:
            if self.values[lit.var] != lit.negated:
                return lit.var
        raise AssertionError("clause has no true literal")

    def flip(self, v: int) -> FlipDelta:
        """Flip ``v`` and return the make/break it had before the flip."""
        f = self.formula
        before = FlipDelta(self.make[v], self.brk[v])
        self.values[v] = not self.values[v]
        now_true = self.values[v]
        for ci, neg in f.occurrence_index[v]:
            clause = f.clauses[ci]
            if now_true != neg:
                # literal of v became true
                self.n_true[ci] += 1
                n = self.n_true[ci]
                if n == 1:
                    self.unsat.discard(ci)
                    for lit in clause:
                        self.make[lit.var] -= 1
                        if self.make[lit.var] == 0:
                            self.candidates.discard(lit.var)
                    self.brk[v] += 1
                elif n == 2:
                    other = next(
                        lit.var for lit in clause if lit.var != v and self.values[lit.var] != lit.negated
                    )
                    self.brk[other] -= 1
            else:
                # literal of v became false
                self.n_true[ci] -= 1
                n = self.n_true[ci]
                if n == 0:
                    self.unsat.add(ci)
                    self.brk[v] -= 1
                    for lit in clause:
                        self.make[lit.var] += 1
                        self.candidates.add(lit.var)
                elif n == 1:
                    self.brk[self._sole_true_var(ci)] += 1
        return before


def null_flip_counterexamples(formula: CnfFormula, states=None, limit: int = 10) -> list[tuple]:
    """Search for unsolved states that offer neither a positive nor a null flip.

    ``states`` is an iterable of assignments; by default all 2^N states are
    enumerated (N <= 20). Returns up to ``limit`` offending assignments.
    """
    if states is None:
        if formula.num_vars > 20:
            raise TooManyVariables("exhaustive search limited to 20 variables; pass explicit states")
        states = (assignment_from_index(s, formula.num_vars) for s in range(1 << formula.num_vars))
    found = []
    fs = None
    for a in states:
        if fs is None:
            fs = FlipState(formula, a)
        else:
            fs.reset(a)
        if fs.solved:
            continue
        sc = fs.classify()
        if not sc.positive_vars and not sc.null_vars:
            found.append(tuple(a))
            if len(found) >= limit:
                break
    return found


def random_states(num_vars: int, count: int, seed: int):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        yield tuple(bool(x) for x in rng.integers(0, 2, num_vars))
