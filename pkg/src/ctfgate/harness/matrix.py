"""The benchmark matrix: challenges x guidance conditions x trials.

Trials are enumerated in a fixed sorted order so that port assignment,
sandbox names, and session labels are functions of the arguments alone.
Workers only change wall time, never results.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

from ctfgate.harness.manifest import ChallengeManifest
from ctfgate.harness.stats import wilson_interval
from ctfgate.harness.trial import DEFAULT_TRIAL_TIMEOUT_S, TrialRecord, run_trial

DEFAULT_PORT_BASE = 8800
TRIALS_FILE = "trials.csv"
SUMMARY_FILE = "summary.csv"
PLOT_FILE = "rates.csv"
RECORDS_FILE = "records.jsonl"

_TRIAL_COLUMNS = (
    "challenge_id",
    "category",
    "condition",
    "trial_index",
    "seed",
    "valid",
    "success",
    "stop_kind",
    "flag",
    "steps",
    "duration_s",
    "trace_path",
    "sandbox",
    "error",
)


@dataclass(frozen=True)
class ConditionSummary:
    condition: str
    trials: int
    invalid: int
    successes: int
    rate: float
    low: float
    high: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "condition": self.condition,
            "trials": self.trials,
            "invalid": self.invalid,
            "successes": self.successes,
            "rate": self.rate,
            "low": self.low,
            "high": self.high,
        }


def plan_matrix(
    suite: Sequence[ChallengeManifest],
    conditions: Sequence[str],
    trials: int,
) -> list[tuple[ChallengeManifest, str, int, int]]:
    """The full trial list as (manifest, condition, trial_index, slot).

    slot is the global enumeration index; ports and seeds derive from
    it, so the plan must stay sorted and stable.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    plan = []
    slot = 0
    for manifest in sorted(suite, key=lambda m: m.challenge_id):
        for condition in conditions:
            for trial_index in range(trials):
                plan.append((manifest, condition, trial_index, slot))
                slot += 1
    return plan


def run_matrix(
    suite: Sequence[ChallengeManifest],
    conditions: Sequence[str],
    trials: int,
    out_dir: Path | str,
    *,
    workers: int = 1,
    seed: int = 0,
    port_base: int = DEFAULT_PORT_BASE,
    timeout_s: float = DEFAULT_TRIAL_TIMEOUT_S,
) -> list[TrialRecord]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    plan = plan_matrix(suite, conditions, trials)

    def one(item) -> TrialRecord:
        manifest, condition, trial_index, slot = item
        sandbox = out_dir / f"{manifest.challenge_id}-{condition}-t{trial_index:02d}"
        return run_trial(
            manifest,
            condition,
            sandbox,
            trial_index=trial_index,
            seed=seed,
            port=port_base + slot,
            timeout_s=timeout_s,
        )

    if workers <= 1:
        records = [one(item) for item in plan]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(one, plan))
    return records


def summarize(records: Sequence[TrialRecord]) -> list[ConditionSummary]:
    """Per-condition success rates over *valid* trials, with Wilson
    95% intervals."""
    by_condition: dict[str, list[TrialRecord]] = {}
    for rec in records:
        by_condition.setdefault(rec.condition, []).append(rec)
    out = []
    for condition in sorted(by_condition):
        group = by_condition[condition]
        valid = [r for r in group if r.valid]
        invalid = len(group) - len(valid)
        successes = sum(1 for r in valid if r.success)
        if valid:
            rate = successes / len(valid)
            low, high = wilson_interval(successes, len(valid))
        else:
            rate, low, high = 0.0, 0.0, 0.0
        out.append(
            ConditionSummary(
                condition=condition,
                trials=len(valid),
                invalid=invalid,
                successes=successes,
                rate=rate,
                low=low,
                high=high,
            )
        )
    return out


def emit_report(records: Sequence[TrialRecord], out_dir: Path | str) -> dict[str, Path]:
    """Write the run's artifacts: raw records, per-trial CSV, the
    condition summary, and a plot-ready (condition, rate, low, high)
    table."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "records": out_dir / RECORDS_FILE,
        "trials": out_dir / TRIALS_FILE,
        "summary": out_dir / SUMMARY_FILE,
        "rates": out_dir / PLOT_FILE,
    }

    with open(paths["records"], "w", encoding="utf-8") as fp:
        for rec in records:
            fp.write(json.dumps(rec.to_dict(), sort_keys=True) + "\n")

    with open(paths["trials"], "w", encoding="utf-8", newline="") as fp:
        writer = csv.DictWriter(fp, fieldnames=_TRIAL_COLUMNS)
        writer.writeheader()
        for rec in records:
            writer.writerow(rec.to_dict())

    summaries = summarize(records)
    with open(paths["summary"], "w", encoding="utf-8", newline="") as fp:
        writer = csv.DictWriter(
            fp,
            fieldnames=(
                "condition",
                "trials",
                "invalid",
                "successes",
                "rate",
                "low",
                "high",
            ),
        )
        writer.writeheader()
        for summary in summaries:
            writer.writerow(summary.to_dict())

    with open(paths["rates"], "w", encoding="utf-8", newline="") as fp:
        writer = csv.writer(fp)
        writer.writerow(["condition", "rate", "low", "high"])
        for summary in summaries:
            writer.writerow([summary.condition, summary.rate, summary.low, summary.high])

    return paths


def load_trials_csv(path: Path | str) -> list[dict[str, Any]]:
    """Read a trials.csv back with the numeric and boolean columns
    restored to their natural types."""
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as fp:
        for raw in csv.DictReader(fp):
            row: dict[str, Any] = dict(raw)
            row["trial_index"] = int(raw["trial_index"])
            row["seed"] = int(raw["seed"])
            row["steps"] = int(raw["steps"])
            row["duration_s"] = float(raw["duration_s"])
            row["valid"] = raw["valid"] == "True"
            row["success"] = raw["success"] == "True"
            rows.append(row)
    return rows
