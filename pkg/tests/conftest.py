"""Shared oracles and generators for the test suite.

Everything here is deliberately independent of the package internals: plain
itertools enumeration, a textbook DPLL, and literal-by-literal evaluation on
signed-integer clauses.
"""

import itertools
import random

import pytest
from hypothesis import strategies as st

from csparrow.formula import CnfFormula

ACCEPTANCE_LINES = []


def record_acceptance(number, name, passed, detail=""):
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:>2}: {name}"
    if detail:
        line += f" -- {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


# ---- naive evaluation on signed-int clauses -------------------------------

def lit_true(lit, values):
    """``values`` is a 0-based sequence of bools; ``lit`` a signed 1-based int."""
    v = values[abs(lit) - 1]
    return v if lit > 0 else not v


def naive_satisfied(clauses, values):
    return [any(lit_true(l, values) for l in c) for c in clauses]


def brute_force_sat(num_vars, clauses):
    """First model found by plain enumeration, or None."""
    for bits in itertools.product([False, True], repeat=num_vars):
        if all(naive_satisfied(clauses, bits)):
            return bits
    return None


def dpll(num_vars, clauses):
    """Textbook DPLL with unit propagation. Returns a model tuple or None."""

    def simplify(cls, lit):
        out = []
        for c in cls:
            if lit in c:
                continue
            if -lit in c:
                c = [l for l in c if l != -lit]
                if not c:
                    return None
            out.append(c)
        return out

    def solve(cls, assign):
        while True:
            units = [c[0] for c in cls if len(c) == 1]
            if not units:
                break
            lit = units[0]
            assign[abs(lit)] = lit > 0
            cls = simplify(cls, lit)
            if cls is None:
                return None
        if not cls:
            return assign
        lit = cls[0][0]
        for choice in (lit, -lit):
            nxt = simplify(cls, choice)
            if nxt is None:
                continue
            res = solve(nxt, {**assign, abs(choice): choice > 0})
            if res is not None:
                return res
        return None

    res = solve([list(c) for c in clauses], {})
    if res is None:
        return None
    return tuple(bool(res.get(v, False)) for v in range(1, num_vars + 1))


def random_cnf(rng, n, c, widths=(1, 2, 3)):
    """Random valid ≤3-CNF over ``n`` variables as signed-int clause lists."""
    clauses = []
    for _ in range(c):
        k = min(rng.choice(widths), n)
        vs = rng.sample(range(1, n + 1), k)
        clauses.append([v if rng.random() < 0.5 else -v for v in vs])
    return clauses


@pytest.fixture
def pyrng():
    return random.Random(12345)


# ---- hypothesis strategies ------------------------------------------------

@st.composite
def formulas(draw, max_vars=8, max_clauses=12, min_vars=1):
    n = draw(st.integers(min_vars, max_vars))
    m = draw(st.integers(0, max_clauses))
    clauses = []
    for _ in range(m):
        k = draw(st.integers(1, min(3, n)))
        vs = draw(st.lists(st.integers(1, n), min_size=k, max_size=k, unique=True))
        signs = draw(st.lists(st.booleans(), min_size=k, max_size=k))
        clauses.append([v if s else -v for v, s in zip(vs, signs)])
    return CnfFormula.from_dimacs_clauses(n, clauses)


@st.composite
def formula_and_assignment(draw, max_vars=8, max_clauses=12):
    f = draw(formulas(max_vars=max_vars, max_clauses=max_clauses))
    a = tuple(draw(st.lists(st.booleans(), min_size=f.num_vars, max_size=f.num_vars)))
    return f, a
