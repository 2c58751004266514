"""CNF data model, DIMACS reading/writing and assignment evaluation.

Variables are 0-based inside the package and 1-based in DIMACS text, on the
command line and in reports. The conversion happens only in
:func:`parse_dimacs`, :func:`emit_dimacs` and :meth:`CnfFormula.from_dimacs_clauses`.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, NamedTuple, Sequence

from .errors import (
    ClauseCountMismatch,
    ClauseTooWide,
    DuplicateLiteral,
    EmptyClause,
    LengthMismatch,
    MissingHeader,
    DimacsError,
    TautologicalClause,
    VarOutOfRange,
)

MAX_WIDTH = 3

Assignment = tuple  # tuple[bool, ...], one entry per variable


class Literal(NamedTuple):
    var: int
    negated: bool = False

    def value(self, a: Sequence[bool]) -> bool:
        return bool(a[self.var]) != self.negated

    def to_dimacs(self) -> int:
        return -(self.var + 1) if self.negated else self.var + 1

    @classmethod
    def from_dimacs(cls, lit: int) -> "Literal":
        return cls(abs(lit) - 1, lit < 0)

    def __repr__(self):
        return f"{'~' if self.negated else ''}x{self.var + 1}"


Clause = tuple  # tuple[Literal, ...], width 1..3


def check_clause(lits: Sequence[Literal], num_vars: int, line=None) -> tuple:
    """Validate one clause and return it as a tuple of Literals."""
    lits = tuple(Literal(int(l.var), bool(l.negated)) for l in lits)
    if not lits:
        raise EmptyClause("empty clause", line)
    if len(lits) > MAX_WIDTH:
        raise ClauseTooWide(f"clause has {len(lits)} literals, at most {MAX_WIDTH} allowed", line)
    seen = set()
    for lit in lits:
        if not 0 <= lit.var < num_vars:
            raise VarOutOfRange(f"variable {lit.var + 1} outside 1..{num_vars}", line)
        if lit in seen:
            raise DuplicateLiteral(f"literal {lit.to_dimacs()} repeated in clause", line)
        if Literal(lit.var, not lit.negated) in seen:
            raise TautologicalClause(f"clause contains both {lit.var + 1} and -{lit.var + 1}", line)
        seen.add(lit)
    return lits


@dataclass(frozen=True)
class CnfFormula:
    """An immutable ≤3-CNF formula over variables ``0..num_vars-1``."""

    num_vars: int
    clauses: tuple = field(default=())

    def __post_init__(self):
        if self.num_vars < 0:
            raise VarOutOfRange("negative variable count")
        checked = tuple(check_clause(c, self.num_vars) for c in self.clauses)
        object.__setattr__(self, "clauses", checked)

    @classmethod
    def from_dimacs_clauses(cls, num_vars: int, clauses: Iterable[Iterable[int]]) -> "CnfFormula":
        """Build from signed 1-based integers, e.g. ``[[1, -2], [2, 3]]``."""
        return cls(num_vars, tuple(tuple(Literal.from_dimacs(l) for l in c) for c in clauses))

    def to_dimacs_clauses(self) -> list[list[int]]:
        return [[lit.to_dimacs() for lit in c] for c in self.clauses]

    @property
    def num_clauses(self) -> int:
        return len(self.clauses)

    @cached_property
    def occurrence_index(self) -> tuple:
        """Per variable, the ``(clause index, negated)`` pairs it occurs in."""
        occ = [[] for _ in range(self.num_vars)]
        for ci, clause in enumerate(self.clauses):
            for lit in clause:
                occ[lit.var].append((ci, lit.negated))
        return tuple(tuple(o) for o in occ)

    def __repr__(self):
        body = " & ".join("(" + " | ".join(map(repr, c)) + ")" for c in self.clauses)
        return f"CnfFormula({self.num_vars} vars: {body or 'true'})"


def parse_dimacs(text) -> CnfFormula:
    """Parse DIMACS CNF from a string or a text stream.

    Clauses may span lines; every clause is terminated by ``0``. A ``%`` line
    ends the clause section (as in the SATLIB benchmark files).
    """
    if isinstance(text, str):
        text = io.StringIO(text)
    num_vars = num_clauses = None
    clauses = []
    current: list[Literal] = []
    lineno = 0
    for lineno, raw in enumerate(text, start=1):
        line = raw.strip()
        if not line or line.startswith("c"):
            continue
        if line.startswith("%"):
            break
        if line.startswith("p"):
            fields = line.split()
            if num_vars is not None:
                raise DimacsError("second problem line", lineno)
            if len(fields) != 4 or fields[1] != "cnf":
                raise MissingHeader(f"malformed problem line {line!r}", lineno)
            try:
                num_vars, num_clauses = int(fields[2]), int(fields[3])
            except ValueError:
                raise MissingHeader(f"malformed problem line {line!r}", lineno) from None
            if num_vars < 0 or num_clauses < 0:
                raise MissingHeader("negative counts in problem line", lineno)
            continue
        if num_vars is None:
            raise MissingHeader("clause before 'p cnf' header", lineno)
        for tok in line.split():
            try:
                lit = int(tok)
            except ValueError:
                raise DimacsError(f"bad token {tok!r}", lineno) from None
            if lit == 0:
                clauses.append(check_clause(current, num_vars, lineno))
                current = []
            else:
                if abs(lit) > num_vars:
                    raise VarOutOfRange(f"variable {abs(lit)} outside 1..{num_vars}", lineno)
                current.append(Literal.from_dimacs(lit))
    if num_vars is None:
        raise MissingHeader("no 'p cnf' header")
    if current:
        raise DimacsError("last clause not terminated by 0", lineno)
    if len(clauses) != num_clauses:
        raise ClauseCountMismatch(f"header declares {num_clauses} clauses, found {len(clauses)}")
    return CnfFormula(num_vars, tuple(clauses))


def read_dimacs(path) -> CnfFormula:
    with open(path, encoding="utf-8") as fh:
        return parse_dimacs(fh)


def emit_dimacs(formula: CnfFormula) -> str:
    lines = [f"p cnf {formula.num_vars} {formula.num_clauses}"]
    lines.extend(" ".join(str(l) for l in c) + " 0" for c in formula.to_dimacs_clauses())
    return "\n".join(lines) + "\n"


def write_dimacs(formula: CnfFormula, path, comments: Sequence[str] = ()) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for c in comments:
            fh.write(f"c {c}\n")
        fh.write(emit_dimacs(formula))


def _check_length(formula: CnfFormula, a: Sequence[bool]) -> None:
    if len(a) != formula.num_vars:
        raise LengthMismatch(f"assignment has {len(a)} values, formula has {formula.num_vars} variables")


def clause_satisfied(clause, a: Sequence[bool]) -> bool:
    return any(bool(a[lit.var]) != lit.negated for lit in clause)


def evaluate(formula: CnfFormula, a: Sequence[bool]) -> tuple[int, bool]:
    """Return ``(satisfied_count, is_model)``."""
    _check_length(formula, a)
    sat = sum(1 for c in formula.clauses if clause_satisfied(c, a))
    return sat, sat == formula.num_clauses


def unsatisfied_clauses(formula: CnfFormula, a: Sequence[bool]) -> list[int]:
    _check_length(formula, a)
    return [ci for ci, c in enumerate(formula.clauses) if not clause_satisfied(c, a)]


def is_model(formula: CnfFormula, a: Sequence[bool]) -> bool:
    return evaluate(formula, a)[1]


def assignment_from_index(index: int, num_vars: int) -> tuple:
    """State ``index`` of the 2^N-state chain: bit ``i`` is the value of variable ``i``."""
    return tuple(bool((index >> i) & 1) for i in range(num_vars))


def assignment_to_index(a: Sequence[bool]) -> int:
    return sum(1 << i for i, v in enumerate(a) if v)
