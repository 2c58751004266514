"""Exact Markov-chain analysis of the clustered Sparrow walk.

State ``s`` of the chain is the assignment whose bit ``i`` is variable ``i``.
A chain built from a formula is stored as a sparse flip kernel ``F`` plus a
jump probability ``epsilon``; the full transition matrix is
``P = (1 - epsilon) * F + epsilon / S`` (uniform jump to any of the S states).
Model states self-loop in ``F`` (the walk would halt there).
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy import sparse

from .errors import (
    DegenerateChain,
    EmptyClass,
    EpsilonRequired,
    InvalidProbabilities,
    NotConverged,
    TooManyVariables,
)
from .flips import FlipState, StateKind
from .formula import CnfFormula, assignment_from_index
from .solvers import flip_distribution, make_rng

MAX_CHAIN_VARS = 16
MAX_DENSE_STATES = 4096
MAX_FUNDAMENTAL_STATES = 1024
ROW_SUM_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    kernel: sparse.csr_matrix
    epsilon: float = 0.0
    models: Optional[np.ndarray] = None  # bool mask; set only for chains built from formulas

    @classmethod
    def from_dense(cls, P) -> "TransitionMatrix":
        P = np.asarray(P, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise InvalidProbabilities("transition matrix must be square")
        if (P < 0).any() or np.abs(P.sum(axis=1) - 1).max() > ROW_SUM_TOL:
            raise InvalidProbabilities("transition matrix is not row-stochastic")
        return cls(sparse.csr_matrix(P))

    @property
    def size(self) -> int:
        return self.kernel.shape[0]

    @property
    def rows(self) -> np.ndarray:
        return self.dense()

    def dense(self) -> np.ndarray:
        if self.size > MAX_DENSE_STATES * 4:
            raise TooManyVariables(f"refusing to densify a {self.size}-state chain")
        P = self.kernel.toarray() * (1.0 - self.epsilon)
        if self.epsilon:
            P += self.epsilon / self.size
        return P

    def left_mul(self, w: np.ndarray) -> np.ndarray:
        """``w @ P`` without materializing P."""
        out = (1.0 - self.epsilon) * (self.kernel.T @ w)
        if self.epsilon:
            out += self.epsilon * w.sum() / self.size
        return out

    def block(self, src, dst) -> np.ndarray:
        """Dense ``P[src][:, dst]``."""
        B = self.kernel[src][:, dst].toarray() * (1.0 - self.epsilon)
        if self.epsilon:
            B += self.epsilon / self.size
        return B

    def flow_vector(self, src, weights, dst) -> np.ndarray:
        """``weights @ P[src][:, dst]``: mass arriving in each of ``dst`` from ``src``."""
        out = (1.0 - self.epsilon) * (self.kernel[src][:, dst].T @ weights)
        if self.epsilon:
            out += self.epsilon * np.sum(weights) / self.size
        return np.asarray(out).ravel()


class StationaryDist(NamedTuple):
    w: np.ndarray
    residual: float


@dataclass(frozen=True)
class Lumped2Chain:
    a: float
    b: float
    P: np.ndarray
    w2state: tuple
    W: np.ndarray
    Z: np.ndarray
    sigma_sq: tuple
    # filled in by lump_two_state only
    W_plus: Optional[float] = None
    W_minus: Optional[float] = None
    excluded_mass: float = 0.0
    a_raw: Optional[float] = None
    b_raw: Optional[float] = None


class VisitStats(NamedTuple):
    state: int
    n: int
    visits: int
    frac: float
    standardized: float


@dataclass
class PayoffEstimate:
    f1: float
    f2: float
    w1: float
    w2: float
    E_per_step: float
    per_state: dict = field(default_factory=dict)
    bound_checks: list = field(default_factory=list)


def _state_values(num_vars: int):
    return (assignment_from_index(s, num_vars) for s in range(1 << num_vars))


def build_chain(formula: CnfFormula, alpha: float = 0.75, epsilon: float = 0.0, max_vars: int = MAX_CHAIN_VARS) -> TransitionMatrix:
    """One-step law of the walk over all 2^N assignments of ``formula``."""
    n = formula.num_vars
    if n > max_vars:
        raise TooManyVariables(f"chain over {n} variables exceeds the cap of {max_vars}")
    if not 0 <= epsilon < 1:
        raise InvalidProbabilities(f"epsilon must lie in [0, 1), got {epsilon}")
    S = 1 << n
    rows, cols, vals = [], [], []
    models = np.zeros(S, dtype=bool)
    fs = FlipState(formula, [False] * n)
    for s, a in enumerate(_state_values(n)):
        fs.reset(a)
        if fs.solved:
            models[s] = True
            rows.append(s)
            cols.append(s)
            vals.append(1.0)
            continue
        for v, p in flip_distribution(fs.classify(), alpha).items():
            rows.append(s)
            cols.append(s ^ (1 << v))
            vals.append(p)
    kernel = sparse.csr_matrix((vals, (rows, cols)), shape=(S, S))
    return TransitionMatrix(kernel, float(epsilon), models)


def state_partition(formula: CnfFormula, max_vars: int = MAX_CHAIN_VARS):
    """Index arrays ``(positive, non_positive, models)`` over all 2^N states."""
    n = formula.num_vars
    if n > max_vars:
        raise TooManyVariables(f"partition over {n} variables exceeds the cap of {max_vars}")
    groups = {StateKind.POSITIVE: [], StateKind.NON_POSITIVE: [], StateKind.SOLVED: []}
    fs = FlipState(formula, [False] * n)
    for s, a in enumerate(_state_values(n)):
        fs.reset(a)
        kind = StateKind.SOLVED if fs.solved else fs.classify().state_kind
        groups[kind].append(s)
    return tuple(np.array(groups[k], dtype=np.int64) for k in StateKind)


def _power_iteration(M: TransitionMatrix, w0=None, tol=1e-12, max_iter=1_000_000) -> np.ndarray:
    w = np.full(M.size, 1.0 / M.size) if w0 is None else np.asarray(w0, dtype=float)
    for _ in range(max_iter):
        nxt = M.left_mul(w)
        nxt /= nxt.sum()
        if np.abs(nxt - w).max() <= tol:
            return nxt
        w = nxt
    raise NotConverged(f"power iteration did not converge in {max_iter} iterations")


def stationary(M: TransitionMatrix, tol: float = 1e-10, max_iter: int = 1_000_000) -> StationaryDist:
    """Invariant distribution ``w`` with ``w P = w``.

    Direct solve of ``(P^T - I) w = 0`` with one equation replaced by
    ``sum(w) = 1`` up to 4096 states; power iteration beyond, or whenever
    the direct residual misses ``tol``.
    """
    if M.models is not None and M.epsilon == 0:
        raise EpsilonRequired("stationary analysis of a formula chain needs epsilon > 0")
    S = M.size
    w = None
    if S <= MAX_DENSE_STATES:
        A = M.dense().T - np.eye(S)
        A[-1, :] = 1.0
        rhs = np.zeros(S)
        rhs[-1] = 1.0
        w = np.linalg.solve(A, rhs)
        w = np.clip(w, 0.0, None)
        w /= w.sum()
        residual = float(np.abs(M.left_mul(w) - w).max())
        if residual <= tol:
            return StationaryDist(w, residual)
    w = _power_iteration(M, w, max_iter=max_iter)
    residual = float(np.abs(M.left_mul(w) - w).max())
    if residual > tol:
        raise NotConverged(f"stationary residual {residual:.3e} above {tol:.1e}")
    return StationaryDist(w, residual)


def two_state_quantities(a: float, b: float) -> Lumped2Chain:
    """Invariant vector, invariant matrix, fundamental matrix and CLT variances
    of ``P = [[1-a, a], [b, 1-b]]``, all in closed form."""
    if not (0 <= a <= 1 and 0 <= b <= 1):
        raise InvalidProbabilities(f"a, b must lie in [0, 1], got {a}, {b}")
    if a + b == 0:
        raise DegenerateChain("a = b = 0: both states absorbing")
    s = a + b
    P = np.array([[1 - a, a], [b, 1 - b]])
    w = np.array([b / s, a / s])
    W = np.array([[b, a], [b, a]]) / s
    Z = np.array([[b * b + a * b + a, a * a + a * b - a], [b * b + a * b - b, a * a + a * b + b]]) / s**2
    sigma_sq = 2 * w * np.diag(Z) - w - w**2
    return Lumped2Chain(float(a), float(b), P, (float(w[0]), float(w[1])), W, Z, (float(sigma_sq[0]), float(sigma_sq[1])))


def sigma_sq_closed_form(a: float, b: float) -> float:
    """Common CLT variance of both states of the 2-state chain."""
    return a * b / (a + b) ** 3 * (2 - a - b)


def sigma_sq_from_w1(a: float, b: float) -> float:
    """Same variance written through ``w1 = b / (a + b)``."""
    w1 = b / (a + b)
    return w1 * (1 - w1) * (2 - a - b) / (a + b)


def expected_gain(w1: float, alpha: float = 0.75) -> float:
    """Lower bound on the mean change in satisfied clauses per step.

    ``w1 * (2 alpha - 1) - (1 - w1) * (1 - alpha)``, i.e. ``3/4 w1 - 1/4`` at
    the default ``alpha``.
    """
    if not 0 <= w1 <= 1:
        raise InvalidProbabilities(f"w1 must lie in [0, 1], got {w1}")
    return alpha * w1 - (1 - alpha)


def positive_mass_threshold(alpha: float = 0.75) -> float:
    """Claimed floor on the lumped positive-state mass: ``w1 >= (1 - alpha) w2``
    with ``w1 + w2 = 1`` gives ``(1 - alpha) / (2 - alpha)``, 1/5 at 3/4."""
    return (1 - alpha) / (2 - alpha)


def lump_two_state(M: TransitionMatrix, w: StationaryDist, partition) -> Lumped2Chain:
    """Collapse the chain onto ``(S+, S-)``.

    ``a`` is the stationary-weighted probability of moving from S+ to S-
    (and ``b`` the reverse), computed on the chain watched only while it is
    inside S+ ∪ S-: an excursion through excluded states (models) counts as
    a transition to wherever it re-enters. Without excluded states this is
    exactly ``sum_{i in A} w_i sum_{j in B} p_ij / sum_{i in A} w_i``; the
    uncensored values are kept as ``a_raw`` / ``b_raw``.
    """
    plus = np.asarray(partition[0], dtype=np.int64)
    minus = np.asarray(partition[1], dtype=np.int64)
    if np.intersect1d(plus, minus).size:
        raise InvalidProbabilities("partition classes overlap")
    wv = w.w
    W_plus, W_minus = float(wv[plus].sum()), float(wv[minus].sum())
    if not len(plus) or not len(minus) or W_plus <= 0 or W_minus <= 0:
        raise EmptyClass("both partition classes need positive stationary mass")

    flow_pm = M.flow_vector(plus, wv[plus], minus).sum()
    flow_mp = M.flow_vector(minus, wv[minus], plus).sum()
    a_raw, b_raw = flow_pm / W_plus, flow_mp / W_minus

    inside = np.zeros(M.size, dtype=bool)
    inside[plus] = inside[minus] = True
    excl = np.flatnonzero(~inside)
    if excl.size:
        if excl.size > MAX_DENSE_STATES:
            raise TooManyVariables(f"{excl.size} excluded states exceed the dense cap")
        # probability that an excursion started in excluded state x re-enters via S- (resp. S+)
        G = np.eye(excl.size) - M.block(excl, excl)
        exit_minus = M.block(excl, minus).sum(axis=1)
        exit_plus = M.block(excl, plus).sum(axis=1)
        h = np.linalg.solve(G, np.column_stack([exit_minus, exit_plus]))
        flow_pm = flow_pm + M.flow_vector(plus, wv[plus], excl) @ h[:, 0]
        flow_mp = flow_mp + M.flow_vector(minus, wv[minus], excl) @ h[:, 1]

    a, b = float(flow_pm / W_plus), float(flow_mp / W_minus)
    base = two_state_quantities(min(a, 1.0), min(b, 1.0))
    return Lumped2Chain(
        base.a, base.b, base.P, base.w2state, base.W, base.Z, base.sigma_sq,
        W_plus=W_plus, W_minus=W_minus, excluded_mass=float(wv[excl].sum()),
        a_raw=float(a_raw), b_raw=float(b_raw),
    )


def expected_delta_per_state(formula: CnfFormula, states: Sequence[int], alpha: float) -> np.ndarray:
    """Exact expected change in satisfied clauses for one flip from each state."""
    n = formula.num_vars
    fs = FlipState(formula, [False] * n)
    out = np.empty(len(states))
    for k, s in enumerate(states):
        fs.reset(assignment_from_index(int(s), n))
        dist = flip_distribution(fs.classify(), alpha)
        out[k] = sum(p * (fs.make[v] - fs.brk[v]) for v, p in dist.items())
    return out


def _bound_check(name, value, low, high, states, per_state, limit=10):
    bad = [(int(s), float(g)) for s, g in zip(states, per_state) if not low - 1e-12 <= g <= high + 1e-12]
    return {
        "name": name,
        "low": low,
        "high": high,
        "value": float(value),
        "holds": bool(low - 1e-12 <= value <= high + 1e-12),
        "states_outside": len(bad),
        "witnesses": [{"state": s, "expected_delta": g} for s, g in bad[:limit]],
    }


def measure_class_payoffs(M: TransitionMatrix, w: StationaryDist, partition, formula: CnfFormula, alpha: float = 0.75) -> PayoffEstimate:
    """Stationary-weighted mean flip gain on positive (f1) and non-positive (f2) states.

    Random jumps are left out of the gain. ``bound_checks`` compares f1 with
    ``[2 alpha - 1, 1]`` and f2 with ``[-(1 - alpha), 0]``, both on the
    aggregate and state by state.
    """
    plus = np.asarray(partition[0], dtype=np.int64)
    minus = np.asarray(partition[1], dtype=np.int64)
    wv = w.w
    W_plus, W_minus = wv[plus].sum(), wv[minus].sum()
    if not len(plus) or not len(minus) or W_plus <= 0 or W_minus <= 0:
        raise EmptyClass("both partition classes need positive stationary mass")
    g_plus = expected_delta_per_state(formula, plus, alpha)
    g_minus = expected_delta_per_state(formula, minus, alpha)
    f1 = float(wv[plus] @ g_plus / W_plus)
    f2 = float(wv[minus] @ g_minus / W_minus)
    w1 = float(W_plus / (W_plus + W_minus))
    w2 = 1.0 - w1
    checks = [
        _bound_check("f1", f1, 2 * alpha - 1, 1.0, plus, g_plus),
        _bound_check("f2", f2, -(1 - alpha), 0.0, minus, g_minus),
    ]
    per_state = {int(s): float(g) for s, g in zip(plus, g_plus)}
    per_state.update({int(s): float(g) for s, g in zip(minus, g_minus)})
    return PayoffEstimate(f1, f2, w1, w2, w1 * f1 + w2 * f2, per_state, checks)


def fundamental_matrix(M: TransitionMatrix, w: StationaryDist) -> np.ndarray:
    if M.size > MAX_FUNDAMENTAL_STATES:
        raise TooManyVariables(f"fundamental matrix limited to {MAX_FUNDAMENTAL_STATES} states")
    P = M.dense()
    return np.linalg.inv(np.eye(M.size) - P + np.outer(np.ones(M.size), w.w))


def clt_variances(M: TransitionMatrix, w: StationaryDist) -> np.ndarray:
    """Per-state asymptotic variance ``2 w_j z_jj - w_j - w_j^2`` of the visit counts."""
    Z = fundamental_matrix(M, w)
    return 2 * w.w * np.diag(Z) - w.w - w.w**2


def visit_counts(M: TransitionMatrix, n: int, runs: int = 1, seed: int = 0, start=None, chunk: int = 65536) -> np.ndarray:
    """Simulate ``runs`` independent trajectories of ``n`` steps.

    Returns an integer array ``(runs, S)`` of visits ``V_j(n)`` over steps
    ``0..n-1``. Start states are drawn uniformly unless ``start`` is given.
    """
    S = M.size
    if S > MAX_DENSE_STATES:
        raise TooManyVariables("simulation needs dense rows")
    rng = make_rng(seed)
    cum = np.cumsum(M.dense(), axis=1)
    cum[:, -1] = 1.0
    state = rng.integers(S, size=runs) if start is None else np.full(runs, int(start))
    counts = np.zeros((runs, S), dtype=np.int64)
    done = 0
    if runs >= 16:
        rows = np.arange(runs)
        while done < n:
            u = rng.random((min(chunk, n - done), runs))
            for k in range(u.shape[0]):
                counts[rows, state] += 1
                state = (cum[state] <= u[k][:, None]).sum(axis=1)
            done += u.shape[0]
        return counts
    cum_rows = [list(r) for r in cum]
    cur = [int(x) for x in state]
    while done < n:
        u = rng.random((min(chunk, n - done), runs))
        for r in range(runs):
            s = cur[r]
            c = counts[r]
            tally = [0] * S
            for x in u[:, r].tolist():
                tally[s] += 1
                s = bisect.bisect_right(cum_rows[s], x)
            c += np.asarray(tally)
            cur[r] = s
        done += u.shape[0]
    return counts


def visit_count_stats(M: TransitionMatrix, w: StationaryDist, sigma_sq, j: int, n: int, runs: int = 1, seed: int = 0, start=None) -> list[VisitStats]:
    """Visit fraction and standardized count ``(V_j(n) - n w_j) / sqrt(n sigma_j^2)`` per run."""
    if sigma_sq is None:
        sigma_sq = clt_variances(M, w)
    counts = visit_counts(M, n, runs, seed, start)[:, j]
    wj, sj = float(w.w[j]), float(np.asarray(sigma_sq)[j])
    return [VisitStats(j, n, int(v), v / n, (v - n * wj) / np.sqrt(n * sj)) for v in counts]


def birth_death_hit_time(m: int, p_up, p_stay) -> list:
    """Expected steps to reach ``m`` from each of ``0..m`` on the up-or-stay chain.

    From ``i >= 1`` the chain moves up with ``p_up`` and stays with
    ``p_stay``; state 0 always moves to 1. Exact when the probabilities are
    ``fractions.Fraction``.
    """
    if m < 1:
        raise InvalidProbabilities(f"top state must be >= 1, got {m}")
    if not (0 < p_up <= 1 and 0 <= p_stay < 1) or abs(p_up + p_stay - 1) > 1e-12:
        raise InvalidProbabilities(f"need p_up + p_stay = 1 with p_up > 0, got {p_up}, {p_stay}")
    step = 1 / p_up
    E = [0 * p_up] * (m + 1)
    for i in range(m - 1, 0, -1):
        E[i] = E[i + 1] + step
    E[0] = 1 + E[1]
    return E


def analysis_report(formula: CnfFormula, alpha: float = 0.75, epsilon: float = 1e-3, max_vars: int = MAX_CHAIN_VARS) -> dict:
    """Everything the ``analyze`` command prints, as a JSON-ready dict."""
    M = build_chain(formula, alpha, epsilon, max_vars=max_vars)
    w = stationary(M)
    plus, minus, models = state_partition(formula, max_vars=max_vars)
    report = {
        "num_vars": formula.num_vars,
        "num_clauses": formula.num_clauses,
        "num_states": M.size,
        "alpha": alpha,
        "epsilon": epsilon,
        "stationary_residual": w.residual,
        "num_positive_states": int(len(plus)),
        "num_non_positive_states": int(len(minus)),
        "num_model_states": int(len(models)),
        "model_mass": float(w.w[models].sum()),
        "W_plus": float(w.w[plus].sum()),
        "W_minus": float(w.w[minus].sum()),
    }
    try:
        lumped = lump_two_state(M, w, (plus, minus))
        payoff = measure_class_payoffs(M, w, (plus, minus), formula, alpha)
    except EmptyClass as exc:
        report["error"] = f"EmptyClass: {exc}"
        return report
    w1 = lumped.w2state[0]
    threshold = positive_mass_threshold(alpha)
    report.update({
        "a": lumped.a,
        "b": lumped.b,
        "a_raw": lumped.a_raw,
        "b_raw": lumped.b_raw,
        "w2state": list(lumped.w2state),
        "Z": lumped.Z.tolist(),
        "sigma_sq": list(lumped.sigma_sq),
        "lumped_return_times": [1 / x for x in lumped.w2state],
        "f1": payoff.f1,
        "f2": payoff.f2,
        "E_per_step": payoff.E_per_step,
        "E_lower_bound": expected_gain(w1, alpha),
        "eq6_threshold": threshold,
        "eq6_holds": bool(w1 >= threshold),
        "bound_checks": payoff.bound_checks,
        "mean_return_times": [float(1 / x) if x > 0 else None for x in w.w],
    })
    return report
