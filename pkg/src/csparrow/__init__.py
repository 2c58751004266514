"""Clustered Sparrow: occurrence-split CNF, make/break local search and exact
Markov-chain analysis of the walk."""

from .cluster import ClusterShapeReport, VarMap, clusterize, lift_assignment, recover_assignment, verify_cluster_shape
from .flips import (
    FlipClass,
    FlipDelta,
    FlipState,
    StateClassification,
    StateKind,
    candidate_variables,
    classify_flip,
    classify_state,
    flip_table,
    make_break,
)
from .formula import (
    CnfFormula,
    Literal,
    emit_dimacs,
    evaluate,
    parse_dimacs,
    read_dimacs,
    unsatisfied_clauses,
)
from .solvers import RunResult, SparrowParams, Status, clustered_sparrow, schoening_walk, select_flip, solve_end_to_end

__version__ = "0.1.0"
