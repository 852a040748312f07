"""Benchmark entry point (console script: bench).

    bench run --suite challenges/ --conditions baseline,minimal \
              --trials 5 --timeout-min 1 --workers 4 --out runs/demo

    bench stats --in runs/demo

``run`` executes the full challenge x condition x trial matrix and
writes records.jsonl, trials.csv, summary.csv, and rates.csv into the
output directory.  ``stats`` re-reads trials.csv and prints the success
table with Wilson intervals plus, when the shape allows, a chi-squared
independence test across conditions and a Kruskal-Wallis comparison of
step counts.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from ctfgate.harness.manifest import discover_suite
from ctfgate.harness.matrix import (
    DEFAULT_PORT_BASE,
    TRIALS_FILE,
    emit_report,
    load_trials_csv,
    run_matrix,
    summarize,
)
from ctfgate.harness.stats import (
    DomainError,
    chi_square_independence,
    kruskal_wallis,
    wilson_interval,
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bench", description="Benchmark matrix runner.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the challenge matrix")
    run.add_argument("--suite", required=True, help="directory of challenge subdirectories")
    run.add_argument("--conditions", default="baseline",
                     help="comma-separated guidance conditions")
    run.add_argument("--trials", type=int, default=1)
    run.add_argument("--timeout-min", type=float, default=1.0)
    run.add_argument("--workers", type=int, default=1)
    run.add_argument("--out", required=True)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--port-base", type=int, default=DEFAULT_PORT_BASE)
    run.add_argument("--challenges", default=None,
                     help="comma-separated challenge ids (default: all in suite)")

    stats = sub.add_parser("stats", help="summarize an existing run")
    stats.add_argument("--in", dest="in_dir", required=True)
    return parser


def _cmd_run(args: argparse.Namespace) -> int:
    suite = discover_suite(Path(args.suite))
    if args.challenges:
        wanted = {c.strip() for c in args.challenges.split(",") if c.strip()}
        suite = [m for m in suite if m.challenge_id in wanted]
        missing = wanted - {m.challenge_id for m in suite}
        if missing:
            print(f"unknown challenges: {sorted(missing)}", file=sys.stderr)
            return 2
    conditions = [c.strip() for c in args.conditions.split(",") if c.strip()]
    if not conditions:
        print("no conditions given", file=sys.stderr)
        return 2

    records = run_matrix(
        suite,
        conditions,
        args.trials,
        Path(args.out),
        workers=args.workers,
        seed=args.seed,
        port_base=args.port_base,
        timeout_s=args.timeout_min * 60.0,
    )
    paths = emit_report(records, Path(args.out))

    for summary in summarize(records):
        print(
            f"{summary.condition:>10}: {summary.successes}/{summary.trials} "
            f"rate={summary.rate:.3f} ci95=[{summary.low:.3f}, {summary.high:.3f}]"
            + (f" invalid={summary.invalid}" if summary.invalid else "")
        )
    failures = [r for r in records if r.valid and not r.success]
    for rec in failures:
        print(
            f"  miss: {rec.challenge_id}/{rec.condition} t{rec.trial_index} "
            f"stop={rec.stop_kind} error={rec.error}"
        )
    print(f"report: {paths['trials']}")
    return 0


def _cmd_stats(args: argparse.Namespace) -> int:
    trials_path = Path(args.in_dir) / TRIALS_FILE
    if not trials_path.exists():
        print(f"no {TRIALS_FILE} under {args.in_dir}", file=sys.stderr)
        return 2
    rows = [r for r in load_trials_csv(trials_path) if r["valid"]]
    if not rows:
        print("no valid trials in report", file=sys.stderr)
        return 2

    by_condition: dict[str, list[dict]] = {}
    for row in rows:
        by_condition.setdefault(row["condition"], []).append(row)
    conditions = sorted(by_condition)

    print(f"{'condition':>10} {'success':>9} {'rate':>6}  wilson95")
    for condition in conditions:
        group = by_condition[condition]
        wins = sum(1 for r in group if r["success"])
        low, high = wilson_interval(wins, len(group))
        print(
            f"{condition:>10} {wins:>4}/{len(group):<4} {wins / len(group):>6.3f}  "
            f"[{low:.3f}, {high:.3f}]"
        )

    if len(conditions) >= 2:
        table = []
        for condition in conditions:
            group = by_condition[condition]
            wins = sum(1 for r in group if r["success"])
            table.append([wins, len(group) - wins])
        try:
            statistic, p = chi_square_independence(table)
            print(f"chi-squared independence: stat={statistic:.4f} p={p:.4f}")
        except DomainError as exc:
            print(f"chi-squared independence: not applicable ({exc})")

        step_groups = [[r["steps"] for r in by_condition[c]] for c in conditions]
        try:
            h, p = kruskal_wallis(step_groups)
            print(f"kruskal-wallis on steps:  H={h:.4f} p={p:.4f}")
        except DomainError as exc:
            print(f"kruskal-wallis on steps:  not applicable ({exc})")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return _cmd_run(args)
    return _cmd_stats(args)


if __name__ == "__main__":
    sys.exit(main())
