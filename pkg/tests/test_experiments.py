import io
import math

import numpy as np
import pytest
from scipy.optimize import brentq
from scipy.stats import binom

from csparrow.cluster import clusterize, verify_cluster_shape
from csparrow.errors import InvalidConfig, UnsatInstance
from csparrow.experiments import (
    ExperimentRow,
    GeneratorConfig,
    baseline_comparison,
    brute_force_model,
    claim_check_report,
    derive_seed,
    generate_random_3sat,
    generate_two_occurrence,
    loglog_slope,
    planted_assignment,
    prop3_scaling_experiment,
    satisfiable_instance,
    success_rate_experiment,
    wilson_interval,
    write_csv,
)
from csparrow.formula import evaluate
from csparrow.solvers import SparrowParams

from conftest import brute_force_sat


def test_generator_example():
    f = generate_random_3sat(GeneratorConfig(10, 42, seed=7))
    assert f.num_vars == 10 and f.num_clauses == 42
    for clause in f.clauses:
        assert len(clause) == 3 and len({l.var for l in clause}) == 3


def test_generator_planted_and_deterministic():
    cfg = GeneratorConfig(20, 90, True, 3)
    f = generate_random_3sat(cfg)
    assert evaluate(f, planted_assignment(cfg))[1]
    assert generate_random_3sat(cfg) == f
    assert generate_random_3sat(GeneratorConfig(20, 90, True, 4)) != f
    with pytest.raises(InvalidConfig):
        planted_assignment(GeneratorConfig(20, 90, False, 3))
    with pytest.raises(InvalidConfig):
        generate_random_3sat(GeneratorConfig(2, 5))


def test_derive_seed_is_stable_and_keyed():
    assert derive_seed(0, 1, 2) == derive_seed(0, 1, 2)
    assert len({derive_seed(0, 1, t) for t in range(100)}) == 100
    assert derive_seed(0, 1, 2) != derive_seed(1, 1, 2)


@pytest.mark.parametrize("m", [2, 3, 7, 20, 51])
def test_two_occurrence_shape(m):
    for seed in range(5):
        f = generate_two_occurrence(m, seed)
        assert f.num_clauses == m
        assert max(len(o) for o in f.occurrence_index) <= 2
        assert all(len(c) == 3 for c in f.clauses)
        star, _ = clusterize(f)
        assert verify_cluster_shape(star).ok
        if f.num_vars <= 12:
            assert brute_force_sat(f.num_vars, f.to_dimacs_clauses()) is not None


def test_two_occurrence_rejects_tiny():
    with pytest.raises(InvalidConfig):
        generate_two_occurrence(1)


def test_brute_force_model_matches_oracle():
    for seed in range(20):
        f = generate_random_3sat(GeneratorConfig(8, 40, seed=seed))
        expected = brute_force_sat(8, f.to_dimacs_clauses())
        got = brute_force_model(f)
        assert (got is None) == (expected is None)
        if got is not None:
            assert evaluate(f, got)[1]


def wilson_oracle(s, t, z=1.959963984540054):
    """Bounds as the roots of (s/t - p)^2 = z^2 p (1 - p) / t."""
    phat = s / t
    g = lambda p: (phat - p) ** 2 - z * z * p * (1 - p) / t
    # p = phat is itself a root when phat is 0 or 1, so step off it
    lo = 0.0 if s == 0 else brentq(g, 0.0, min(phat, 1 - 1e-12))
    hi = 1.0 if s == t else brentq(g, max(phat, 1e-12), 1.0)
    return lo, hi


WILSON_PAIRS = [
    (0, 1), (1, 1), (0, 10), (10, 10), (5, 10), (1, 20), (3, 20), (15, 100), (50, 100), (99, 100),
    (0, 100), (100, 100), (7, 30), (12, 45), (1, 1000), (150, 1000), (500, 1000), (999, 1000), (2, 3), (40, 41),
]


@pytest.mark.parametrize("s, t", WILSON_PAIRS)
def test_wilson_matches_root_oracle(s, t):
    lo, hi = wilson_interval(s, t)
    olo, ohi = wilson_oracle(s, t)
    assert lo == pytest.approx(olo, abs=1e-9)
    assert hi == pytest.approx(ohi, abs=1e-9)
    assert 0 <= lo <= s / t <= hi <= 1


def test_wilson_known_value():
    lo, hi = wilson_interval(15, 100)
    assert (round(lo, 4), round(hi, 4)) == (0.0931, 0.2328)


def test_wilson_exact_binomial_coverage():
    """Average coverage over p is close to nominal for Wilson intervals."""
    for t in (20, 50, 100):
        bounds = [wilson_interval(s, t) for s in range(t + 1)]
        cover = []
        for p in np.linspace(0.05, 0.95, 91):
            pmf = binom.pmf(np.arange(t + 1), t, p)
            cover.append(sum(q for q, (lo, hi) in zip(pmf, bounds) if lo <= p <= hi))
        assert 0.935 <= np.mean(cover) <= 0.965
        assert min(cover) >= 0.83


def test_success_rate_small():
    rows = success_rate_experiment([(8, 20)], 200, SparrowParams(seed=1))
    row = rows[0]
    assert row.trials == 200 and row.successes == 200 and row.success_rate == 1.0
    assert row.wilson_low <= row.success_rate <= row.wilson_high
    assert row.budget == 9 * row.m**2


def test_success_rate_budget_monotone():
    sizes = [(12, 50)]
    low = success_rate_experiment(sizes, 60, SparrowParams(budget_multiplier=1, seed=2))[0]
    high = success_rate_experiment(sizes, 60, SparrowParams(budget_multiplier=9, seed=2))[0]
    # identical trial seeds: every run that solves within m^2 also solves within 9 m^2
    assert high.successes >= low.successes
    assert high.budget == 9 * low.budget


def test_unplanted_screening():
    with pytest.raises(UnsatInstance):
        satisfiable_instance(25, 100, 0, planted=False)
    # far above threshold: unsatisfiable with overwhelming probability
    with pytest.raises(UnsatInstance):
        satisfiable_instance(6, 200, 0, planted=False)
    f = satisfiable_instance(10, 20, 0, planted=False)
    assert brute_force_model(f) is not None


def test_csv_schema_and_columns():
    row = ExperimentRow(10, 30, 5, 4, 0.8, 0.4, 0.96, 12.0, 900)
    buf = io.StringIO()
    text = write_csv([row], buf)
    lines = text.splitlines()
    assert lines[0] == "# schema: experiment-row v1"
    assert lines[1] == "m,n_star,trials,successes,success_rate,wilson_low,wilson_high,median_steps,budget"
    assert lines[2] == "10,30,5,4,0.8,0.4,0.96,12.0,900"
    assert buf.getvalue() == text


def test_csv_rerun_identical(tmp_path):
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    success_rate_experiment([(8, 24), (10, 40)], 20, SparrowParams(seed=5), out=str(p1))
    success_rate_experiment([(8, 24), (10, 40)], 20, SparrowParams(seed=5), out=str(p2))
    assert p1.read_bytes() == p2.read_bytes()


def test_prop3_scaling_small():
    rows, slope = prop3_scaling_experiment([10, 20, 40], 10, seed=1)
    assert [r.m for r in rows] == [10, 20, 40]
    assert all(r.solved == 10 and r.negative_flips == 0 for r in rows)
    assert 0.3 < slope < 1.7
    again = prop3_scaling_experiment([20], 1, seed=9)[0]
    assert prop3_scaling_experiment([20], 1, seed=9)[0] == again


def test_loglog_slope():
    assert loglog_slope([1, 2, 4], [3, 6, 12]) == pytest.approx(1.0)
    assert loglog_slope([1, 2, 4], [1, 4, 16]) == pytest.approx(2.0)
    assert math.isnan(loglog_slope([1, 2], [None, 5]))


def test_baseline_tiny_and_deterministic():
    rows = baseline_comparison([(6, 12)], 10, seed=3)
    assert [r.algorithm for r in rows] == ["sparrow", "schoening"]
    assert all(r.success_rate == 1.0 for r in rows)
    assert rows[1].per_restart_success is not None and rows[0].per_restart_success is None
    assert baseline_comparison([(6, 12)], 10, seed=3) == rows


def test_claim_check_report_small():
    rep = claim_check_report(seed=1, tiny_count=2, large_sizes=((8, 24),), large_runs=4,
                             rate_sizes=((6, 18),), rate_trials=10)
    assert rep["positive_mass_threshold"] == pytest.approx(0.2)
    assert len(rep["exhaustive"]) == 2 and len(rep["sampled"]) == 1
    for ci in (rep["sampled"][0][k] for k in ("w1", "f1", "f2")):
        if ci["samples"] > 1:
            assert ci["low"] <= ci["mean"] <= ci["high"]
    r = rep["success_after_m_squared"][0]
    assert r["wilson_low"] <= r["success_rate"] <= r["wilson_high"]
