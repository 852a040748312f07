"""Agent loop integration: scripted reasoner, real gateway, real
command server.  These tests drive whole episodes and read the trace
back to check ordering guarantees."""

import json
import sys

import pytest

from ctfgate.agent.checkpoint import load_checkpoint
from ctfgate.agent.loop import EpisodeConfig, EpisodeRunner
from ctfgate.agent.state import MAX_RETRIES
from ctfgate.errors import EmptyPlan
from ctfgate.gateway.dispatch import Gateway
from ctfgate.gateway.policy import load_policy
from ctfgate.gateway.registry import load_manifest
from ctfgate.gateway.trace import TraceWriter, canonical_trace_bytes, read_trace
from ctfgate.reasoner.scripted import ScriptedReasoner
from ctfgate.toolsrv.catalog import build_manifest

ECHO = "/bin/echo"


def make_gateway(tmp_path, trace_name="trace.jsonl", session="loop-test", start_seq=0):
    policy_path = tmp_path / "policy.json"
    policy_path.write_text(
        json.dumps(
            {
                "allowed_cidrs": [],
                "allowed_binaries": [ECHO],
                "max_wall_time_seconds": 20,
            }
        )
    )
    registry = load_manifest(
        build_manifest(["commands"]),
        substitutions={
            "python": sys.executable,
            "policy": str(policy_path),
            "cwd": str(tmp_path),
        },
    )
    trace = TraceWriter(tmp_path / trace_name, session=session, start_seq=start_seq)
    return Gateway(registry, load_policy(policy_path), trace)


def echo_step(text, guards=None):
    step = {
        "candidates": [
            {"tool": "run_command", "arguments": {"binary": ECHO, "args": [text]}}
        ]
    }
    if guards:
        step["guards"] = guards
    return step


def scenario(steps, plans):
    return {"version": 1, "name": "loop-test", "plans": plans, "steps": steps}


def run_episode(tmp_path, doc, config=None, trace_name="trace.jsonl"):
    gateway = make_gateway(tmp_path, trace_name=trace_name)
    runner = EpisodeRunner(
        config or EpisodeConfig(objective="test objective", timeout_s=30),
        ScriptedReasoner(doc),
        gateway,
    )
    try:
        state = runner.run()
    finally:
        gateway.close()
    return state, read_trace(tmp_path / trace_name)


class TestHappyPath:
    def test_flag_capture_stops_the_episode(self, tmp_path):
        doc = scenario(
            [echo_step("probing"), echo_step("flag{loop_happy_path}")],
            plans=[["probe the target", "extract the flag"]],
        )
        state, events = run_episode(tmp_path, doc)
        assert state.stop.kind == "flag-captured"
        assert state.stop.detail == "flag{loop_happy_path}"
        assert state.step_count == 2
        assert [e.kind for e in events] == [
            "plan-update",
            "call", "verdict", "verdict", "result",
            "call", "verdict", "verdict", "result",
            "stop",
        ]
        assert events[-1].payload["kind"] == "flag-captured"

    def test_tasks_complete_one_per_successful_step(self, tmp_path):
        doc = scenario(
            [echo_step("one"), echo_step("flag{tasks_track_steps}")],
            plans=[["first", "second"]],
        )
        state, _ = run_episode(tmp_path, doc)
        statuses = [t.status for t in state.queue.tasks()]
        assert statuses == ["done", "done"]

    def test_history_grows_monotonically(self, tmp_path):
        doc = scenario(
            [echo_step("a"), echo_step("b"), echo_step("flag{history_grows}")],
            plans=[["t1", "t2", "t3"]],
        )
        state, _ = run_episode(tmp_path, doc)
        assert len(state.history) == 3
        assert [o.source for o in state.history.observations()] == ["run_command"] * 3


class TestRejectionHandling:
    def rejection_step(self, guards=None):
        step = {
            "candidates": [
                {
                    "tool": "run_command",
                    "arguments": {"binary": "/usr/bin/uname", "args": []},
                }
            ]
        }
        if guards:
            step["guards"] = guards
        return step

    def test_every_rejection_emits_plan_update(self, tmp_path):
        doc = scenario(
            [self.rejection_step() for _ in range(MAX_RETRIES)],
            plans=[["stubborn task"]],
        )
        state, events = run_episode(tmp_path, doc)
        kinds = [e.kind for e in events]
        assert kinds.count("rejection") == MAX_RETRIES
        for i, kind in enumerate(kinds):
            if kind == "rejection":
                assert kinds[i + 1] == "plan-update", f"rejection at {i} not re-planned"
        assert state.stop.kind == "search-exhausted"

    def test_retry_bounded_then_abandoned(self, tmp_path):
        doc = scenario(
            [self.rejection_step() for _ in range(MAX_RETRIES)],
            plans=[["stubborn task"]],
        )
        state, _ = run_episode(tmp_path, doc)
        task = state.queue.tasks()[0]
        assert task.status == "abandoned"
        assert task.retry_count == MAX_RETRIES

    def test_abandonment_replan_continues_episode(self, tmp_path):
        steps = [self.rejection_step() for _ in range(MAX_RETRIES)]
        steps.append(echo_step("flag{second_plan_wins}", guards={"min_history": 0}))
        doc = scenario(
            steps,
            plans=[["doomed task"], ["workable task"]],
        )
        state, events = run_episode(tmp_path, doc)
        assert state.stop.kind == "flag-captured"
        triggers = [
            e.payload["trigger"] for e in events if e.kind == "plan-update"
        ]
        assert triggers == ["initial"] + ["rejection"] * (MAX_RETRIES - 1) + [
            "rejection",
            "abandonment",
        ]

    def test_rejection_feedback_reaches_next_request(self, tmp_path):
        steps = [
            self.rejection_step(),
            echo_step(
                "flag{feedback_consumed}",
                guards={"has_rejection": True, "rejection_param": "binary"},
            ),
        ]
        doc = scenario(steps, plans=[["task one", "task two"]])
        state, _ = run_episode(tmp_path, doc)
        # the guarded step only fires if last_rejection was delivered
        assert state.stop.kind == "flag-captured"
        assert state.last_rejection is None  # consumed exactly once


class TestStopConditions:
    def test_timeout_before_any_step(self, tmp_path):
        doc = scenario([echo_step("never runs")], plans=[["task"]])
        config = EpisodeConfig(objective="slow", timeout_s=0.0)
        state, events = run_episode(tmp_path, doc, config)
        assert state.stop.kind == "timeout"
        assert state.step_count == 0
        assert [e.kind for e in events] == ["plan-update", "stop"]

    def test_step_budget_exhaustion(self, tmp_path):
        doc = scenario(
            [echo_step("one"), echo_step("two")],
            plans=[["t1", "t2"]],
        )
        config = EpisodeConfig(objective="short leash", timeout_s=30, max_steps=1)
        state, _ = run_episode(tmp_path, doc, config)
        assert state.stop.kind == "budget-exhausted"
        assert state.step_count == 1

    def test_search_exhausted_when_replan_is_empty(self, tmp_path):
        doc = scenario([echo_step("no flag here")], plans=[["only task"]])
        state, _ = run_episode(tmp_path, doc)
        assert state.stop.kind == "search-exhausted"

    def test_empty_initial_plan_raises(self, tmp_path):
        doc = scenario([echo_step("x")], plans=[])
        with pytest.raises(EmptyPlan):
            run_episode(tmp_path, doc)

    def test_empty_valid_set_triggers_replan(self, tmp_path):
        steps = [
            {
                "candidates": [
                    {"tool": "no_such_tool", "arguments": {}},
                    {
                        "tool": "run_command",
                        # schema-invalid: the required binary param is missing
                        "arguments": {"args": []},
                    },
                ]
            },
            echo_step("flag{replanned_after_empty_set}"),
        ]
        doc = scenario(steps, plans=[["task a"], ["task b"]])
        state, events = run_episode(tmp_path, doc)
        assert state.stop.kind == "flag-captured"
        triggers = [e.payload["trigger"] for e in events if e.kind == "plan-update"]
        assert "empty-valid-set" in triggers
        # nothing invalid ever reached the gateway: no rejections either
        assert all(e.kind != "rejection" for e in events)


class TestCheckpointResume:
    def build(self, flag="flag{split_responsibly}"):
        steps = [echo_step(f"step {i}") for i in range(11)] + [echo_step(flag)]
        tasks = [f"task {i}" for i in range(12)]
        return scenario(steps, plans=[tasks])

    def test_split_episode_matches_uninterrupted_twin(self, tmp_path):
        # uninterrupted twin: checkpoints at step 5 and keeps going
        twin_dir = tmp_path / "twin"
        twin_dir.mkdir()
        gateway = make_gateway(twin_dir, session="ckpt-test")
        config = EpisodeConfig(
            objective="twin",
            timeout_s=60,
            checkpoint_path=str(twin_dir / "ep.ckpt"),
            checkpoint_after_steps=5,
        )
        runner = EpisodeRunner(config, ScriptedReasoner(self.build()), gateway)
        twin_state = runner.run()
        gateway.close()
        assert twin_state.stop.kind == "flag-captured"

        # split run: halt at the checkpoint, then resume into the same trace
        split_dir = tmp_path / "split"
        split_dir.mkdir()
        gateway = make_gateway(split_dir, session="ckpt-test")
        config = EpisodeConfig(
            objective="twin",
            timeout_s=60,
            checkpoint_path=str(split_dir / "ep.ckpt"),
            checkpoint_after_steps=5,
            halt_at_checkpoint=True,
        )
        runner = EpisodeRunner(config, ScriptedReasoner(self.build()), gateway)
        halted = runner.run()
        gateway.close()
        assert halted.stop is None
        assert halted.step_count == 5

        cp = load_checkpoint(split_dir / "ep.ckpt")
        gateway = make_gateway(
            split_dir, session=cp.session, start_seq=cp.trace_next_seq
        )
        config = EpisodeConfig(objective="twin", timeout_s=60)
        runner = EpisodeRunner(config, ScriptedReasoner(self.build()), gateway)
        runner.resume_from(cp)
        resumed = runner.run()
        gateway.close()
        assert resumed.stop.kind == "flag-captured"
        assert resumed.step_count == 12

        twin_bytes = canonical_trace_bytes(twin_dir / "trace.jsonl")
        split_bytes = canonical_trace_bytes(split_dir / "trace.jsonl")
        assert twin_bytes == split_bytes

    def test_checkpoint_event_is_clock_free(self, tmp_path):
        gateway = make_gateway(tmp_path)
        config = EpisodeConfig(
            objective="clock free",
            timeout_s=60,
            checkpoint_path=str(tmp_path / "ep.ckpt"),
            checkpoint_after_steps=1,
        )
        runner = EpisodeRunner(config, ScriptedReasoner(self.build()), gateway)
        runner.run()
        gateway.close()
        events = read_trace(tmp_path / "trace.jsonl")
        marks = [e for e in events if e.kind == "checkpoint"]
        assert len(marks) == 1
        assert set(marks[0].payload) == {"step_count", "queue", "history_length"}
        assert marks[0].payload["step_count"] == 1
