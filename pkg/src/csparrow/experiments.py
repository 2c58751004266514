"""Instance generators and the measurement experiments.

Each trial derives its own seed from ``(master seed, tag, index)`` through
``numpy.random.SeedSequence``, so rows can be recomputed independently and
in any order.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, fields
from statistics import median
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.stats import norm, t as student_t

from .cluster import clusterize
from .errors import EmptyClass, InvalidConfig, UnsatInstance
from .flips import FlipClass, StateKind, null_flip_counterexamples, random_states
from .formula import CnfFormula, Literal, assignment_from_index
from .markov import (
    build_chain,
    lump_two_state,
    measure_class_payoffs,
    positive_mass_threshold,
    state_partition,
    stationary,
)
from .solvers import SparrowParams, clustered_sparrow, make_rng, schoening_walk

CSV_SCHEMA_VERSION = 1
REFERENCE_SUCCESS_RATE = 0.15
BRUTE_FORCE_MAX_VARS = 20
TINY_SOURCE_SIZES = ((3, 2), (4, 2), (3, 3), (4, 3), (5, 3))


def derive_seed(master: int, *keys: int) -> int:
    return int(np.random.SeedSequence([master, *keys]).generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class GeneratorConfig:
    n: int
    c: int
    planted: bool = False
    seed: int = 0


def generate_random_3sat(cfg: GeneratorConfig) -> CnfFormula:
    """Uniform random 3-CNF with three distinct variables per clause.

    In planted mode a hidden assignment is drawn first and each clause's
    polarities are redrawn until that assignment satisfies it; the hidden
    assignment is available through :func:`planted_assignment`.
    """
    return _generate(cfg)[0]


def planted_assignment(cfg: GeneratorConfig) -> tuple:
    if not cfg.planted:
        raise InvalidConfig("no hidden assignment in unplanted mode")
    return _generate(cfg)[1]


def _generate(cfg: GeneratorConfig):
    if cfg.n < 3:
        raise InvalidConfig(f"need n >= 3 for distinct-variable 3-clauses, got {cfg.n}")
    if cfg.c < 1:
        raise InvalidConfig(f"need c >= 1, got {cfg.c}")
    rng = make_rng(cfg.seed)
    hidden = tuple(bool(x) for x in rng.integers(0, 2, cfg.n)) if cfg.planted else None
    clauses = []
    for _ in range(cfg.c):
        vs = rng.choice(cfg.n, size=3, replace=False)
        while True:
            neg = rng.integers(0, 2, 3).astype(bool)
            clause = tuple(Literal(int(v), bool(s)) for v, s in zip(vs, neg))
            if hidden is None or any(hidden[l.var] != l.negated for l in clause):
                break
        clauses.append(clause)
    return CnfFormula(cfg.n, tuple(clauses)), hidden


def generate_two_occurrence(m: int, seed: int = 0) -> CnfFormula:
    """``m`` width-3 clauses in which every variable occurs at most twice.

    Variables fill the ``3m`` literal slots twice each (one single if ``3m``
    is odd); slots are shuffled and repaired so no clause repeats a variable.
    Polarities are uniform. Such formulas are always satisfiable: any set of
    k clauses touches at least 3k/2 variables, so clauses can be matched to
    distinct variables.
    """
    if m < 2:
        raise InvalidConfig(f"need m >= 2, got {m}")
    rng = make_rng(seed)
    slots = 3 * m
    n = (slots + 1) // 2
    pool = np.repeat(np.arange(n), 2)[:slots]
    rng.shuffle(pool)
    grid = pool.reshape(m, 3)
    for _ in range(100 * m):
        bad = [i for i in range(m) if len(set(grid[i])) < 3]
        if not bad:
            break
        i = bad[0]
        j = int(rng.integers(m))
        p, q = int(rng.integers(3)), int(rng.integers(3))
        grid[i, p], grid[j, q] = grid[j, q], grid[i, p]
    else:
        raise InvalidConfig("could not repair repeated variables")
    negs = rng.integers(0, 2, (m, 3)).astype(bool)
    clauses = tuple(tuple(Literal(int(v), bool(s)) for v, s in zip(row, nrow)) for row, nrow in zip(grid, negs))
    return CnfFormula(n, clauses)


def brute_force_model(formula: CnfFormula) -> Optional[tuple]:
    """First model in index order, or None. Vectorized over all 2^N assignments."""
    n = formula.num_vars
    if n > BRUTE_FORCE_MAX_VARS:
        raise InvalidConfig(f"brute force limited to {BRUTE_FORCE_MAX_VARS} variables")
    idx = np.arange(1 << n, dtype=np.int64)
    bits = ((idx[:, None] >> np.arange(n)) & 1).astype(bool)
    ok = np.ones(len(idx), dtype=bool)
    for clause in formula.clauses:
        sat = np.zeros(len(idx), dtype=bool)
        for lit in clause:
            sat |= bits[:, lit.var] != lit.negated
        ok &= sat
    hits = np.flatnonzero(ok)
    return assignment_from_index(int(hits[0]), n) if hits.size else None


def wilson_interval(successes: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    if trials <= 0:
        return 0.0, 1.0
    z = norm.ppf(0.5 + confidence / 2)
    p = successes / trials
    denom = 1 + z * z / trials
    centre = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    # the bounds touch 0 and 1 exactly at the extremes; pin them against rounding
    lo = 0.0 if successes == 0 else max(0.0, centre - half)
    hi = 1.0 if successes == trials else min(1.0, centre + half)
    return float(lo), float(hi)


@dataclass
class ExperimentRow:
    m: int
    n_star: int
    trials: int
    successes: int
    success_rate: float
    wilson_low: float
    wilson_high: float
    median_steps: Optional[float]
    budget: int


def _row(m, n_star, results, budget) -> ExperimentRow:
    wins = [r.steps_used for r in results if r.solved]
    lo, hi = wilson_interval(len(wins), len(results))
    return ExperimentRow(
        m, n_star, len(results), len(wins), len(wins) / len(results), lo, hi,
        float(median(wins)) if wins else None, budget,
    )


def write_csv(rows: Sequence, out, columns: Optional[Sequence[str]] = None, kind: str = "experiment-row") -> str:
    """Write dataclass or dict rows with a schema comment line; returns the text."""
    if columns is None:
        columns = [f.name for f in fields(rows[0])] if rows and hasattr(rows[0], "__dataclass_fields__") else []
    buf = io.StringIO()
    buf.write(f"# schema: {kind} v{CSV_SCHEMA_VERSION}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        d = asdict(row) if hasattr(row, "__dataclass_fields__") else row
        writer.writerow(["" if d[c] is None else _fmt(d[c]) for c in columns])
    text = buf.getvalue()
    if out is not None:
        if hasattr(out, "write"):
            out.write(text)
        else:
            with open(out, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
    return text


def _fmt(x):
    if isinstance(x, float):
        return repr(round(x, 12))
    return str(x)


def satisfiable_instance(n: int, c: int, seed: int, planted: bool = True) -> CnfFormula:
    formula = generate_random_3sat(GeneratorConfig(n, c, planted, seed))
    if not planted:
        if n > BRUTE_FORCE_MAX_VARS or brute_force_model(formula) is None:
            raise UnsatInstance(f"instance n={n} c={c} seed={seed} not verified satisfiable")
    return formula


def success_rate_experiment(
    sizes: Iterable[tuple[int, int]],
    trials: int,
    params: SparrowParams = SparrowParams(),
    out=None,
    planted: bool = True,
) -> list[ExperimentRow]:
    """Success within the step budget on one satisfiable instance per size.

    The instance for each size is drawn from ``params.seed``; trial ``t``
    runs the solver with a seed derived from ``(params.seed, size, t)``.
    """
    rows = []
    for k, (n, c) in enumerate(sizes):
        formula = satisfiable_instance(n, c, derive_seed(params.seed, 1, k), planted)
        clustered, _ = clusterize(formula)
        results = []
        for t in range(trials):
            p = SparrowParams(params.alpha, params.budget_multiplier, params.epsilon, derive_seed(params.seed, 2, k, t))
            results.append(clustered_sparrow(clustered, p))
        rows.append(_row(clustered.num_clauses, clustered.num_vars, results, params.budget(clustered.num_clauses)))
    if out is not None:
        write_csv(rows, out)
    return rows


@dataclass
class Prop3Row:
    m: int
    m_star_median: float
    trials: int
    solved: int
    median_steps: Optional[float]
    negative_flips: int
    budget_median: float


def prop3_scaling_experiment(
    m_values: Sequence[int], trials: int, seed: int = 0, out=None, budget_multiplier: int = 9, alpha: float = 0.75
) -> tuple[list[Prop3Row], float]:
    """Median solve steps on clustered two-occurrence formulas, and the log-log slope vs ``m``.

    ``m`` is the source clause count; a fresh instance is drawn for every trial.
    """
    rows = []
    for k, m in enumerate(m_values):
        steps, sizes, budgets = [], [], []
        negatives = solved = 0
        for t in range(trials):
            clustered, _ = clusterize(generate_two_occurrence(m, derive_seed(seed, 3, k, t)))
            params = SparrowParams(alpha, budget_multiplier, 0.0, derive_seed(seed, 4, k, t))
            res = clustered_sparrow(clustered, params, capture=True)
            negatives += sum(1 for rec in res.flip_log if rec.flip_class is FlipClass.NEGATIVE)
            sizes.append(clustered.num_clauses)
            budgets.append(res.budget)
            if res.solved:
                solved += 1
                steps.append(res.steps_used)
        rows.append(Prop3Row(m, float(median(sizes)), trials, solved,
                             float(median(steps)) if steps else None, negatives, float(median(budgets))))
    if out is not None:
        write_csv(rows, out, kind="prop3-row")
    return rows, loglog_slope([r.m for r in rows], [r.median_steps for r in rows])


def loglog_slope(xs, ys) -> float:
    pts = [(x, y) for x, y in zip(xs, ys) if y is not None and y > 0]
    if len(pts) < 2:
        return float("nan")
    x, y = np.log([p[0] for p in pts]), np.log([p[1] for p in pts])
    return float(np.polyfit(x, y, 1)[0])


@dataclass
class BaselineRow:
    algorithm: str
    n: int
    c: int
    trials: int
    successes: int
    success_rate: float
    wilson_low: float
    wilson_high: float
    median_flips: Optional[float]
    restarts_used: int
    per_restart_success: Optional[float]


def baseline_comparison(
    sizes: Iterable[tuple[int, int]],
    trials: int,
    seed: int = 0,
    out=None,
    params: SparrowParams = SparrowParams(),
    schoening_restarts: Optional[int] = None,
) -> list[BaselineRow]:
    """Clustered Sparrow (on E*) vs Schöning (on E) over the same planted instances.

    By default Schöning gets as many restarts as fit into Sparrow's flip
    budget, ``ceil(budget / 3n)``.
    """
    rows = []
    for k, (n, c) in enumerate(sizes):
        sp, sc = [], []
        for t in range(trials):
            formula = generate_random_3sat(GeneratorConfig(n, c, True, derive_seed(seed, 5, k, t)))
            clustered, _ = clusterize(formula)
            p = SparrowParams(params.alpha, params.budget_multiplier, params.epsilon, derive_seed(seed, 6, k, t))
            sp.append(clustered_sparrow(clustered, p))
            restarts = schoening_restarts or max(1, math.ceil(sp[-1].budget / (3 * n)))
            sc.append(schoening_walk(formula, restarts, derive_seed(seed, 7, k, t)))
        for name, results in (("sparrow", sp), ("schoening", sc)):
            wins = [r.steps_used for r in results if r.solved]
            lo, hi = wilson_interval(len(wins), trials)
            used = sum(r.restarts_used for r in results)
            per_restart = len(wins) / used if name == "schoening" else None
            rows.append(BaselineRow(name, n, c, trials, len(wins), len(wins) / trials, lo, hi,
                                    float(median(wins)) if wins else None, used, per_restart))
    if out is not None:
        write_csv(rows, out, kind="baseline-row")
    return rows


def _mean_ci(samples: Sequence[float], confidence: float = 0.95) -> dict:
    x = np.asarray([s for s in samples if s is not None and not math.isnan(s)], dtype=float)
    if x.size == 0:
        return {"mean": None, "low": None, "high": None, "samples": 0}
    mean = float(x.mean())
    if x.size == 1:
        return {"mean": mean, "low": mean, "high": mean, "samples": 1}
    half = float(student_t.ppf(0.5 + confidence / 2, x.size - 1) * x.std(ddof=1) / math.sqrt(x.size))
    return {"mean": mean, "low": mean - half, "high": mean + half, "samples": int(x.size)}


def exhaustive_claims(formula: CnfFormula, alpha: float = 0.75, epsilon: float = 1e-3) -> dict:
    """Exact w1, f1, f2 on the full chain of an (already clustered) tiny formula."""
    M = build_chain(formula, alpha, epsilon)
    w = stationary(M)
    plus, minus, models = state_partition(formula)
    no_null = null_flip_counterexamples(formula, limit=M.size)
    entry = {"num_vars": formula.num_vars, "num_clauses": formula.num_clauses,
             "model_mass": float(w.w[models].sum()),
             "states_without_positive_or_null_flip": len(no_null),
             "witness_without_null_flip": [int(x) for x in no_null[0]] if no_null else None}
    try:
        lumped = lump_two_state(M, w, (plus, minus))
        pay = measure_class_payoffs(M, w, (plus, minus), formula, alpha)
    except EmptyClass as exc:
        entry["skipped"] = str(exc)
        return entry
    threshold = positive_mass_threshold(alpha)
    entry.update({
        "w1": lumped.w2state[0],
        "w1_holds": bool(lumped.w2state[0] >= threshold),
        "a": lumped.a,
        "b": lumped.b,
        "f1": pay.f1,
        "f2": pay.f2,
        "f1_holds": pay.bound_checks[0]["holds"],
        "f2_holds": pay.bound_checks[1]["holds"],
        "f1_states_outside": pay.bound_checks[0]["states_outside"],
        "f2_states_outside": pay.bound_checks[1]["states_outside"],
        "f1_witnesses": pay.bound_checks[0]["witnesses"][:3],
        "f2_witnesses": pay.bound_checks[1]["witnesses"][:3],
    })
    return entry


def sampled_claims(formula: CnfFormula, runs: int, seed: int, params: SparrowParams = SparrowParams()) -> dict:
    """Trajectory estimates of w1, f1, f2 on a clustered formula too large for the exact chain.

    Each run contributes one estimate (fraction of steps spent in positive
    states, mean gain in positive and in non-positive states); intervals are
    Student-t over the independent runs.
    """
    w1s, f1s, f2s = [], [], []
    for r in range(runs):
        p = SparrowParams(params.alpha, params.budget_multiplier, params.epsilon, derive_seed(seed, 8, r))
        res = clustered_sparrow(formula, p, capture=True)
        gains = {StateKind.POSITIVE: [], StateKind.NON_POSITIVE: []}
        for rec, before, after in zip(res.flip_log, res.trajectory, res.trajectory[1:]):
            if rec.state_kind in gains:
                gains[rec.state_kind].append(after - before)
        total = len(gains[StateKind.POSITIVE]) + len(gains[StateKind.NON_POSITIVE])
        if total == 0:
            continue
        w1s.append(len(gains[StateKind.POSITIVE]) / total)
        f1s.append(float(np.mean(gains[StateKind.POSITIVE])) if gains[StateKind.POSITIVE] else None)
        f2s.append(float(np.mean(gains[StateKind.NON_POSITIVE])) if gains[StateKind.NON_POSITIVE] else None)
    probe = random_states(formula.num_vars, 2000, derive_seed(seed, 12))
    no_null = null_flip_counterexamples(formula, states=probe, limit=2000)
    return {"num_vars": formula.num_vars, "num_clauses": formula.num_clauses, "runs": runs,
            "w1": _mean_ci(w1s), "f1": _mean_ci(f1s), "f2": _mean_ci(f2s),
            "random_states_probed": 2000, "states_without_positive_or_null_flip": len(no_null)}


def claim_check_report(
    seed: int = 0,
    tiny_count: int = 12,
    large_sizes: Sequence[tuple[int, int]] = ((12, 40), (20, 80)),
    large_runs: int = 20,
    rate_sizes: Sequence[tuple[int, int]] = ((8, 32), (12, 48), (16, 64)),
    rate_trials: int = 100,
    alpha: float = 0.75,
) -> dict:
    """Measured values for the positive-mass floor, the f1/f2 bounds and the
    success probability after ``m**2`` steps, each next to its reference value.

    Nothing here is asserted; ``holds``/``agrees`` fields record the finding.
    """
    threshold = positive_mass_threshold(alpha)
    tiny = []
    k = 0
    while len(tiny) < tiny_count:
        # two or three width-3 source clauses cluster to at most 9 variables
        if k % 4 == 3:
            src = generate_two_occurrence(3, derive_seed(seed, 9, k))
        else:
            n, c = TINY_SOURCE_SIZES[k % len(TINY_SOURCE_SIZES)]
            src = generate_random_3sat(GeneratorConfig(n, c, True, derive_seed(seed, 9, k)))
        clustered, _ = clusterize(src)
        k += 1
        if clustered.num_vars > 10:
            continue
        entry = exhaustive_claims(clustered, alpha)
        entry["source"] = src.to_dimacs_clauses()
        tiny.append(entry)

    large = []
    for j, (n, c) in enumerate(large_sizes):
        clustered, _ = clusterize(generate_random_3sat(GeneratorConfig(n, c, True, derive_seed(seed, 10, j))))
        entry = sampled_claims(clustered, large_runs, derive_seed(seed, 11, j), SparrowParams(alpha=alpha))
        entry["source"] = {"n": n, "c": c}
        entry["w1_holds"] = entry["w1"]["mean"] is not None and entry["w1"]["mean"] >= threshold
        large.append(entry)

    rate_rows = success_rate_experiment(rate_sizes, rate_trials, SparrowParams(alpha=alpha, budget_multiplier=1, seed=seed))
    rates = []
    for (n, c), row in zip(rate_sizes, rate_rows):
        d = asdict(row)
        d["source"] = {"n": n, "c": c}
        d["reference_rate"] = REFERENCE_SUCCESS_RATE
        d["reference_in_interval"] = bool(row.wilson_low <= REFERENCE_SUCCESS_RATE <= row.wilson_high)
        rates.append(d)

    # a variable with four occurrences: every unsolved state should still offer a null flip
    four = CnfFormula.from_dimacs_clauses(7, [[-1, 2, 3], [1, 4, 5], [1, 6], [1, 7]])
    four_star, _ = clusterize(four)
    no_null = null_flip_counterexamples(four_star, limit=1 << four_star.num_vars)
    null_probe = {
        "source": four.to_dimacs_clauses(),
        "num_vars": four_star.num_vars,
        "states_without_positive_or_null_flip": len(no_null),
        "witness": [int(x) for x in no_null[0]] if no_null else None,
    }

    exact = [e for e in tiny if "w1" in e]
    return {
        "alpha": alpha,
        "seed": seed,
        "positive_mass_threshold": threshold,
        "f1_bounds": [2 * alpha - 1, 1.0],
        "f2_bounds": [-(1 - alpha), 0.0],
        "exhaustive": tiny,
        "sampled": large,
        "success_after_m_squared": rates,
        "null_flip_probe": null_probe,
        "summary": {
            "exhaustive_instances": len(exact),
            "w1_floor_violations": sum(1 for e in exact if not e["w1_holds"]),
            "f1_bound_violations": sum(1 for e in exact if not e["f1_holds"]),
            "f2_bound_violations": sum(1 for e in exact if not e["f2_holds"]),
            "sampled_w1_floor_violations": sum(1 for e in large if not e["w1_holds"]),
            "states_without_positive_or_null_flip": sum(e["states_without_positive_or_null_flip"] for e in tiny + large),
            "four_occurrence_states_without_null_flip": null_probe["states_without_positive_or_null_flip"],
            "success_rates": [r["success_rate"] for r in rates],
        },
    }
