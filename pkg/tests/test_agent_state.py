"""Agent state containers: history, task queue, stop reasons."""

import pytest

from ctfgate.agent.state import (
    MAX_RETRIES,
    AgentState,
    History,
    Observation,
    StopReason,
    Task,
    TaskQueue,
    reward,
)
from ctfgate.protocol.schema import ToolCall


def obs(n: int) -> Observation:
    return Observation(source=f"tool{n}", salient={"n": n}, raw_digest="d" * 64, token_cost=3)


def call(n: int) -> ToolCall:
    return ToolCall(call_id=f"c{n}", tool_name="run_command", arguments={"binary": "/bin/true"})


class TestHistory:
    def test_append_only_growth(self):
        h = History()
        for n in range(5):
            h.append(obs(n), call(n))
            assert len(h) == n + 1
        assert [o.salient["n"] for o in h.observations()] == [0, 1, 2, 3, 4]

    def test_round_trip(self):
        h = History()
        h.append(obs(1), call(1))
        h.append(obs(2), call(2))
        again = History.from_list(h.to_list())
        assert again == h

    def test_pairs_are_copies(self):
        h = History()
        h.append(obs(1), call(1))
        h.pairs().clear()
        assert len(h) == 1


class TestTaskQueue:
    def test_lifecycle(self):
        q = TaskQueue()
        t1 = q.add("scan the host")
        t2 = q.add("grab the banner")
        assert (t1.task_id, t2.task_id) == ("t000", "t001")
        active = q.activate_next()
        assert active is not None and active.task_id == "t000"
        # activating again returns the same task, never a second one
        assert q.activate_next().task_id == "t000"
        q.complete_active()
        statuses = {t.task_id: t.status for t in q.tasks()}
        assert statuses["t000"] == "done"
        assert q.activate_next().task_id == "t001"

    def test_rejection_retries_then_abandons(self):
        q = TaskQueue()
        q.add("fragile task")
        task = q.activate_next()
        for attempt in range(1, MAX_RETRIES):
            assert q.note_rejection() is False
            assert q.tasks()[0].retry_count == attempt
            assert q.activate_next().task_id == task.task_id
        assert q.note_rejection() is True
        assert q.tasks()[0].status == "abandoned"
        assert q.activate_next() is None

    def test_replace_pending_preserves_finished_work(self):
        q = TaskQueue()
        q.add("done already")
        q.activate_next()
        q.complete_active()
        q.add("stale pending")
        q.replace_pending(["fresh one", "fresh two"])
        statuses = [(t.description, t.status) for t in q.tasks()]
        assert ("done already", "done") in statuses
        assert all(desc != "stale pending" for desc, _ in statuses)
        assert [d for d, s in statuses if s == "pending"] == ["fresh one", "fresh two"]

    def test_ids_never_reused_after_replace(self):
        q = TaskQueue()
        q.add("a")
        q.replace_pending(["b"])
        q.replace_pending(["c"])
        assert q.tasks()[-1].task_id == "t002"

    def test_round_trip(self):
        q = TaskQueue()
        q.add("a")
        q.add("b")
        q.activate_next()
        q.note_rejection()
        again = TaskQueue.from_dict(q.to_dict())
        assert again == q
        # creation counter restored: new ids continue the sequence
        assert again.add("c").task_id == "t002"

    def test_task_invariants(self):
        with pytest.raises(ValueError):
            Task(task_id="t000", description="", status="pending")
        with pytest.raises(ValueError):
            Task(task_id="t000", description="x", status="sleeping")
        with pytest.raises(ValueError):
            Task(task_id="t000", description="x", status="pending", retry_count=-1)


class TestStopReason:
    def test_flag_capture_requires_the_flag(self):
        with pytest.raises(ValueError):
            StopReason("flag-captured", "")
        assert StopReason("flag-captured", "flag{x}").detail == "flag{x}"

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            StopReason("gave-up", "meh")

    def test_reward_is_binary_on_flag_capture_only(self):
        assert reward(StopReason("flag-captured", "flag{x}")) == 1
        assert reward(StopReason("timeout", "slow")) == 0
        assert reward(StopReason("search-exhausted", "no ideas")) == 0
        assert reward(StopReason("budget-exhausted", "steps")) == 0
        assert reward(None) == 0


class TestAgentState:
    def test_round_trip(self):
        state = AgentState(objective="win", seed=9)
        state.history.append(obs(1), call(1))
        state.queue.add("only task")
        state.step_count = 4
        state.elapsed_s = 1.5
        again = AgentState.from_dict(state.to_dict())
        assert again == state

    def test_require_live_blocks_after_stop(self):
        state = AgentState(objective="win")
        state.stop = StopReason("timeout", "late")
        with pytest.raises(ValueError):
            state.require_live()
