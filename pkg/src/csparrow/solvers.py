"""Clustered Sparrow local search and the Schöning random-walk baseline.

Randomness: every run owns one ``numpy.random.Generator`` on the PCG64
bit generator, seeded with the run's 64-bit seed. Draw order is fixed:

1. initial assignment: ``integers(0, 2, N)``
2. per step, when ``epsilon > 0``: ``random()`` for the jump test, and on a
   jump ``integers(0, 2, N)`` for the new assignment;
3. per flip, when at least two flip classes are available: ``random()`` for
   the class coin (``< alpha`` picks the highest class);
4. per flip: ``integers(k)`` for the index into the chosen sorted pool.

Schöning draws ``integers(0, 2, n)`` per restart, then per step
``integers(#unsat)`` for the clause and ``integers(width)`` for the literal.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .cluster import clusterize, recover_assignment
from .errors import InvalidParams, NoCandidates
from .flips import FlipClass, FlipState, StateClassification, StateKind, classify_flip
from .formula import CnfFormula, evaluate


def make_rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


class Status(enum.Enum):
    SOLVED = "solved"
    BUDGET_EXHAUSTED = "budget_exhausted"


@dataclass(frozen=True)
class SparrowParams:
    alpha: float = 0.75
    budget_multiplier: int = 9
    epsilon: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise InvalidParams(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.budget_multiplier < 1:
            raise InvalidParams(f"budget_multiplier must be >= 1, got {self.budget_multiplier}")
        if not 0 <= self.epsilon < 1:
            raise InvalidParams(f"epsilon must lie in [0, 1), got {self.epsilon}")

    def budget(self, num_clauses: int) -> int:
        return self.budget_multiplier * num_clauses * num_clauses


class FlipRecord(NamedTuple):
    """One step of a run. Random jumps have ``var`` and ``flip_class`` set to None."""

    step: int
    var: Optional[int]
    flip_class: Optional[FlipClass]
    state_kind: Optional[StateKind]


@dataclass
class RunResult:
    status: Status
    model: Optional[tuple]
    steps_used: int
    budget: int
    trajectory: Optional[list] = None
    flip_log: Optional[list] = None
    restarts_used: int = 1

    @property
    def solved(self) -> bool:
        return self.status is Status.SOLVED


def flip_distribution(sc: StateClassification, alpha: float) -> dict[int, float]:
    """Exact probability of each candidate being flipped under :func:`select_flip`."""
    classes = sc.by_class()
    if not classes:
        raise NoCandidates("no candidate variables: the assignment is a model")
    if len(classes) == 1:
        pool = classes[0][1]
        return {v: 1.0 / len(pool) for v in pool}
    top = classes[0][1]
    rest = sorted(v for _, vs in classes[1:] for v in vs)
    dist = {v: alpha / len(top) for v in top}
    for v in rest:
        dist[v] = (1.0 - alpha) / len(rest)
    return dist


def select_flip(sc: StateClassification, alpha: float, rng: np.random.Generator) -> int:
    """Pick the variable to flip.

    With one non-empty class, uniform over it. Otherwise, with probability
    ``alpha`` uniform over the highest non-empty class, else uniform over the
    union of the remaining non-empty classes.
    """
    classes = sc.by_class()
    if not classes:
        raise NoCandidates("no candidate variables: the assignment is a model")
    if len(classes) == 1:
        pool = classes[0][1]
    elif rng.random() < alpha:
        pool = classes[0][1]
    else:
        pool = sorted(v for _, vs in classes[1:] for v in vs)
    return pool[int(rng.integers(len(pool)))]


def _check_model(formula: CnfFormula, model) -> None:
    if not evaluate(formula, model)[1]:
        raise RuntimeError("solver produced a non-model; incremental state is corrupt")


def clustered_sparrow(formula: CnfFormula, params: SparrowParams = SparrowParams(), capture: bool = False) -> RunResult:
    """Run the make/break-prioritizing walk for ``budget_multiplier * m**2`` steps.

    With ``capture`` the result carries the satisfied-clause trajectory
    (``steps_used + 1`` entries) and one :class:`FlipRecord` per step.
    """
    rng = make_rng(params.seed)
    n = formula.num_vars
    budget = params.budget(formula.num_clauses)
    fs = FlipState(formula, rng.integers(0, 2, n).astype(bool))
    trajectory = [fs.satisfied_count] if capture else None
    log = [] if capture else None

    steps = 0
    while steps < budget and not fs.solved:
        if params.epsilon > 0 and rng.random() < params.epsilon:
            fs.reset(rng.integers(0, 2, n).astype(bool))
            if capture:
                log.append(FlipRecord(steps, None, None, None))
        else:
            sc = fs.classify()
            v = select_flip(sc, params.alpha, rng)
            d = fs.flip(v)
            if capture:
                log.append(FlipRecord(steps, v, classify_flip(d), sc.state_kind))
        steps += 1
        if capture:
            trajectory.append(fs.satisfied_count)

    if fs.solved:
        model = fs.assignment()
        _check_model(formula, model)
        return RunResult(Status.SOLVED, model, steps, budget, trajectory, log)
    return RunResult(Status.BUDGET_EXHAUSTED, None, steps, budget, trajectory, log)


def schoening_walk(formula: CnfFormula, restarts: int = 1, seed: int = 0, capture: bool = False) -> RunResult:
    """Schöning's random walk: ``restarts`` tries of ``3n`` flips from a uniform start.

    The trajectory (when captured) records the satisfied count after each
    flip; a restart replaces the current assignment without consuming a step.
    """
    if restarts < 1:
        raise InvalidParams(f"restarts must be >= 1, got {restarts}")
    rng = make_rng(seed)
    n = formula.num_vars
    per_try = 3 * n
    budget = restarts * per_try
    fs = None
    trajectory = [] if capture else None
    log = [] if capture else None
    steps = 0
    for r in range(restarts):
        a = rng.integers(0, 2, n).astype(bool)
        if fs is None:
            fs = FlipState(formula, a)
        else:
            fs.reset(a)
        if capture and r == 0:
            trajectory.append(fs.satisfied_count)
        for _ in range(per_try):
            if fs.solved:
                break
            unsat = sorted(fs.unsat)
            clause = formula.clauses[unsat[int(rng.integers(len(unsat)))]]
            v = clause[int(rng.integers(len(clause)))].var
            d = fs.flip(v)
            if capture:
                log.append(FlipRecord(steps, v, classify_flip(d), None))
                trajectory.append(fs.satisfied_count)
            steps += 1
        if fs.solved:
            model = fs.assignment()
            _check_model(formula, model)
            return RunResult(Status.SOLVED, model, steps, budget, trajectory, log, restarts_used=r + 1)
    return RunResult(Status.BUDGET_EXHAUSTED, None, steps, budget, trajectory, log, restarts_used=restarts)


def solve_end_to_end(formula: CnfFormula, params: SparrowParams = SparrowParams(), capture: bool = False) -> RunResult:
    """Clusterize, run clustered Sparrow on E*, and map any model back to ``formula``.

    Trajectory and flip log (if captured) refer to E*.
    """
    clustered, vmap = clusterize(formula)
    res = clustered_sparrow(clustered, params, capture=capture)
    if res.solved:
        model = recover_assignment(vmap, res.model)
        _check_model(formula, model)
        res.model = model
    return res
