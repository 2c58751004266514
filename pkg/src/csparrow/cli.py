"""Command line entry point: ``csparrow <command> ...``."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict

from .cluster import clusterize
from .errors import SatToolkitError
from .experiments import (
    GeneratorConfig,
    REFERENCE_SUCCESS_RATE,
    baseline_comparison,
    claim_check_report,
    generate_random_3sat,
    generate_two_occurrence,
    planted_assignment,
    prop3_scaling_experiment,
    success_rate_experiment,
)
from .flips import flip_table, format_flip_table
from .formula import CnfFormula, emit_dimacs, parse_dimacs, read_dimacs
from .markov import MAX_CHAIN_VARS, analysis_report
from .solvers import SparrowParams, schoening_walk, solve_end_to_end

EXIT_SOLVED = 10
EXIT_UNKNOWN = 20

PATTERNS = {
    # x, a, b: (x | a) & (x | ~b) & (~x | b)
    "prop3": CnfFormula.from_dimacs_clauses(3, [[1, 2], [1, -3], [-1, 3]]),
    # x, alpha, beta, gamma, theta: (x | alpha | beta) & (x | ~gamma) & (~x | theta)
    "main": CnfFormula.from_dimacs_clauses(5, [[1, 2, 3], [1, -4], [-1, 5]]),
}


def _read(path) -> CnfFormula:
    if path == "-":
        return parse_dimacs(sys.stdin)
    return read_dimacs(path)


def _write(text: str, path) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _sizes(text: str) -> list[tuple[int, int]]:
    out = []
    for item in text.split(","):
        n, c = item.split(":")
        out.append((int(n), int(c)))
    return out


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False, allow_nan=False, default=_json_default) + "\n"


def _json_default(x):
    if hasattr(x, "item"):
        return x.item()
    raise TypeError(f"not JSON serializable: {type(x).__name__}")


def cmd_transform(args) -> int:
    formula = _read(args.input)
    clustered, vmap = clusterize(formula)
    _write(emit_dimacs(clustered), args.output)
    map_path = args.map or (args.output + ".map" if args.output not in (None, "-") else None)
    if map_path:
        _write("\n".join(vmap.sidecar_lines()) + "\n", map_path)
    return 0


def cmd_fliptable(args) -> int:
    pattern = PATTERNS[args.pattern] if args.pattern in PATTERNS else _read(args.pattern)
    primary = args.primary - 1
    sys.stdout.write(format_flip_table(pattern, flip_table(pattern, primary), primary))
    return 0


def cmd_solve(args) -> int:
    formula = _read(args.input)
    capture = args.trace is not None
    if args.algo == "sparrow":
        params = SparrowParams(args.alpha, args.budget_mult, args.epsilon, args.seed)
        res = solve_end_to_end(formula, params, capture=capture)
    else:
        res = schoening_walk(formula, args.restarts, args.seed, capture=capture)
    if capture:
        with open(args.trace, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["step", "satisfied_count", "flipped_var", "class"])
            w.writerow([0, res.trajectory[0], "", ""])
            for rec, sat in zip(res.flip_log, res.trajectory[1:]):
                if rec.var is None:
                    w.writerow([rec.step + 1, sat, "", "jump"])
                else:
                    w.writerow([rec.step + 1, sat, rec.var + 1, rec.flip_class.label])
    print(f"c steps {res.steps_used} budget {res.budget}")
    if res.solved:
        print("s SATISFIABLE")
        lits = [str(i + 1 if v else -(i + 1)) for i, v in enumerate(res.model)]
        print("v " + " ".join(lits + ["0"]))
        return EXIT_SOLVED
    print("s UNKNOWN")
    return EXIT_UNKNOWN


def cmd_analyze(args) -> int:
    formula = _read(args.input)
    if args.clusterize:
        formula, _ = clusterize(formula)
    report = analysis_report(formula, args.alpha, args.epsilon, args.max_vars)
    _write(_dump(report), args.output)
    return 0


def cmd_gen(args) -> int:
    if args.two_occurrence:
        formula = generate_two_occurrence(args.two_occurrence, args.seed)
        comments = [f"two-occurrence m={args.two_occurrence} seed={args.seed}"]
    else:
        cfg = GeneratorConfig(args.n, args.c, args.planted, args.seed)
        formula = generate_random_3sat(cfg)
        comments = [f"random 3-SAT n={args.n} c={args.c} planted={args.planted} seed={args.seed}"]
        if args.planted:
            hidden = planted_assignment(cfg)
            comments.append("hidden " + " ".join(str(i + 1 if v else -(i + 1)) for i, v in enumerate(hidden)))
    text = "".join(f"c {c}\n" for c in comments) + emit_dimacs(formula)
    _write(text, args.out)
    return 0


def cmd_bench_success(args) -> int:
    params = SparrowParams(args.alpha, args.budget_mult, args.epsilon, args.seed)
    rows = success_rate_experiment(_sizes(args.sizes), args.trials, params, out=args.out)
    if args.json:
        summary = [dict(asdict(r), reference_rate=REFERENCE_SUCCESS_RATE) for r in rows]
        sys.stdout.write(_dump(summary))
    return 0


def cmd_bench_prop3(args) -> int:
    ms = [int(x) for x in args.m_values.split(",")]
    rows, slope = prop3_scaling_experiment(ms, args.trials, args.seed, out=args.out, budget_multiplier=args.budget_mult)
    if args.json:
        sys.stdout.write(_dump({"rows": [asdict(r) for r in rows], "loglog_slope": slope}))
    return 0


def cmd_bench_baseline(args) -> int:
    params = SparrowParams(args.alpha, args.budget_mult, args.epsilon, args.seed)
    rows = baseline_comparison(_sizes(args.sizes), args.trials, args.seed, out=args.out, params=params,
                               schoening_restarts=args.restarts)
    if args.json:
        sys.stdout.write(_dump([asdict(r) for r in rows]))
    return 0


def cmd_bench_claims(args) -> int:
    report = claim_check_report(seed=args.seed, rate_trials=args.trials, large_runs=args.runs,
                                rate_sizes=_sizes(args.rate_sizes))
    _write(_dump(report), args.out)
    return 0


def _sparrow_flags(p, budget_default=9):
    p.add_argument("--alpha", type=float, default=0.75)
    p.add_argument("--budget-mult", type=int, default=budget_default)
    p.add_argument("--epsilon", type=float, default=0.0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="csparrow", description="Clustered Sparrow SAT local search toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("transform", help="write the occurrence-split formula and its variable map")
    p.add_argument("input", help="DIMACS file or - for stdin")
    p.add_argument("-o", "--output", default="-")
    p.add_argument("--map", help="sidecar map path (default: <output>.map)")
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("fliptable", help="print the flip table of a small pattern")
    p.add_argument("pattern", nargs="?", default="prop3", help="'prop3', 'main' or a DIMACS file")
    p.add_argument("--primary", type=int, default=1, help="1-based variable to flip")
    p.set_defaults(func=cmd_fliptable)

    p = sub.add_parser("solve", help="run a local search solver")
    p.add_argument("input")
    p.add_argument("--algo", choices=["sparrow", "schoening"], default="sparrow")
    _sparrow_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--restarts", type=int, default=100, help="Schöning restarts")
    p.add_argument("--trace", help="CSV trajectory output path")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("analyze", help="exact Markov-chain report (JSON)")
    p.add_argument("input")
    p.add_argument("--clusterize", action="store_true", help="split occurrences first")
    p.add_argument("--alpha", type=float, default=0.75)
    p.add_argument("--epsilon", type=float, default=1e-3)
    p.add_argument("--max-vars", type=int, default=MAX_CHAIN_VARS)
    p.add_argument("-o", "--output", default="-")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("gen", help="generate a random instance")
    p.add_argument("--n", type=int, default=20)
    p.add_argument("--c", type=int, default=85)
    p.add_argument("--planted", action="store_true")
    p.add_argument("--two-occurrence", type=int, metavar="M", help="M clauses, each variable at most twice")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_gen)

    bench = sub.add_parser("bench", help="experiments").add_subparsers(dest="bench", required=True)

    p = bench.add_parser("success-rate")
    p.add_argument("--sizes", default="8:20,12:48,16:64", help="n:c pairs")
    p.add_argument("--trials", type=int, default=100)
    _sparrow_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_bench_success)

    p = bench.add_parser("prop3")
    p.add_argument("--m-values", default="20,40,80,160")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--budget-mult", type=int, default=9)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_bench_prop3)

    p = bench.add_parser("baseline")
    p.add_argument("--sizes", default="8:32,12:48,16:64,20:80")
    p.add_argument("--trials", type=int, default=50)
    _sparrow_flags(p)
    p.add_argument("--restarts", type=int, help="Schöning restarts (default: match Sparrow's flip budget)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_bench_baseline)

    p = bench.add_parser("claims", help="measured values next to the reference claims (JSON)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--runs", type=int, default=20)
    p.add_argument("--rate-sizes", default="8:32,12:48,16:64", help="n:c pairs for the success-rate check")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_bench_claims)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (SatToolkitError, OSError) as exc:
        print(f"csparrow: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
