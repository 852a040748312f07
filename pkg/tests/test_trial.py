"""Trial provisioning, auditing, and the benchmark matrix."""

import dataclasses
import json
import shutil
from pathlib import Path

import pytest

from ctfgate.gateway.trace import canonical_trace_bytes, read_trace
from ctfgate.harness.manifest import load_manifest
from ctfgate.harness.matrix import (
    emit_report,
    load_trials_csv,
    plan_matrix,
    summarize,
)
from ctfgate.harness.stats import wilson_interval
from ctfgate.harness.trial import TrialRecord, run_trial

SUITE_ROOT = Path(__file__).resolve().parent.parent / "challenges"


def fake_record(**overrides) -> TrialRecord:
    base = dict(
        challenge_id="toy",
        category="Reverse Engineering",
        condition="baseline",
        trial_index=0,
        seed=0,
        valid=True,
        success=True,
        stop_kind="flag-captured",
        flag="flag{x}",
        steps=3,
        duration_s=1.25,
        trace_path="/tmp/t/trace.jsonl",
        sandbox="/tmp/t",
        error=None,
    )
    base.update(overrides)
    return TrialRecord(**base)


class TestRunTrial:
    def test_scripted_solve_captures_flag(self, tmp_path):
        manifest = load_manifest(SUITE_ROOT / "strings_recon")
        record = run_trial(manifest, "baseline", tmp_path / "sbx", port=9310)
        assert record.valid and record.success
        assert record.stop_kind == "flag-captured"
        assert record.flag == "flag{str1ngs_t3ll_t4l3s}"
        assert record.steps >= 2
        assert Path(record.trace_path).is_file()
        # provisioning side effects live in the sandbox
        assert (tmp_path / "sbx" / "chal").is_file()
        assert (tmp_path / "sbx" / "policy.json").is_file()

    def test_same_arguments_give_identical_canonical_traces(self, tmp_path):
        manifest = load_manifest(SUITE_ROOT / "strings_recon")
        sandbox = tmp_path / "sbx"
        blobs = []
        for _ in range(2):
            if sandbox.exists():
                shutil.rmtree(sandbox)
            record = run_trial(manifest, "baseline", sandbox, port=9311, seed=7)
            blobs.append(canonical_trace_bytes(read_trace(record.trace_path)))
        assert blobs[0] == blobs[1]

    def test_setup_failure_marks_trial_invalid(self, tmp_path):
        manifest = load_manifest(SUITE_ROOT / "strings_recon")
        broken = dataclasses.replace(
            manifest, setup=(("/bin/false",),) + manifest.setup
        )
        record = run_trial(broken, "baseline", tmp_path / "sbx", port=9312)
        assert record.valid is False
        assert record.success is False
        assert record.stop_kind is None
        assert "exited 1" in record.error

    def test_empty_plan_marks_trial_invalid(self, tmp_path):
        chal = tmp_path / "chal"
        chal.mkdir()
        (chal / "challenge.json").write_text(
            json.dumps(
                {
                    "id": "planless",
                    "category": "Reverse Engineering",
                    "objective": "do nothing",
                    "flag_pattern": r"flag\{[a-z]+\}",
                    "points": 10,
                    "scenario": "solve.json",
                }
            )
        )
        (chal / "solve.json").write_text(
            json.dumps({"version": 1, "plans": [], "steps": []})
        )
        record = run_trial(load_manifest(chal), "baseline", tmp_path / "sbx", port=9313)
        assert record.valid is False
        assert "plan" in record.error


class TestPlanMatrix:
    def test_slots_are_global_and_ordered(self):
        suite = [
            load_manifest(SUITE_ROOT / "strings_recon"),
            load_manifest(SUITE_ROOT / "dirguess_web"),
        ]
        plan = plan_matrix(suite, ["baseline", "minimal"], trials=2)
        assert [slot for _, _, _, slot in plan] == list(range(8))
        # challenge order is sorted by id regardless of input order
        assert [m.challenge_id for m, _, _, _ in plan[:4]] == ["dirguess_web"] * 4
        assert [(c, t) for _, c, t, _ in plan[:4]] == [
            ("baseline", 0),
            ("baseline", 1),
            ("minimal", 0),
            ("minimal", 1),
        ]

    def test_rejects_zero_trials(self):
        with pytest.raises(ValueError):
            plan_matrix([], [], trials=0)


class TestSummaries:
    def test_invalid_trials_leave_the_denominator(self):
        records = [
            fake_record(trial_index=0),
            fake_record(trial_index=1, success=False, stop_kind="timeout", flag=None),
            fake_record(trial_index=2, valid=False, success=False, error="gcc died"),
        ]
        (summary,) = summarize(records)
        assert summary.trials == 2
        assert summary.invalid == 1
        assert summary.successes == 1
        assert summary.rate == 0.5
        low, high = wilson_interval(1, 2)
        assert (summary.low, summary.high) == (low, high)

    def test_conditions_sorted(self):
        records = [
            fake_record(condition="minimal"),
            fake_record(condition="baseline"),
        ]
        assert [s.condition for s in summarize(records)] == ["baseline", "minimal"]

    def test_report_round_trip(self, tmp_path):
        records = [
            fake_record(trial_index=0),
            fake_record(trial_index=1, success=False, stop_kind="timeout", flag=None),
        ]
        paths = emit_report(records, tmp_path)
        for path in paths.values():
            assert path.is_file()

        rows = load_trials_csv(paths["trials"])
        assert len(rows) == 2
        assert rows[0]["trial_index"] == 0 and isinstance(rows[0]["trial_index"], int)
        assert rows[0]["success"] is True and rows[1]["success"] is False
        assert rows[0]["duration_s"] == pytest.approx(1.25)

        lines = paths["records"].read_text().splitlines()
        assert [json.loads(l)["trial_index"] for l in lines] == [0, 1]

        rates = paths["rates"].read_text().splitlines()
        assert rates[0] == "condition,rate,low,high"
        assert rates[1].startswith("baseline,0.5,")
