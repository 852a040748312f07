"""Episode state: history, task queue, stop reasons.

Everything here serializes to plain JSON shapes so checkpoints are
stable and diffable. Wall-clock values live only in `elapsed_s`; every
other field is a pure function of the episode's decisions, which is
what makes same-seed traces reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional

from ctfgate.protocol.schema import ToolCall

MAX_RETRIES = 3

TASK_STATUSES = ("pending", "active", "done", "abandoned")

STOP_KINDS = ("flag-captured", "timeout", "search-exhausted", "budget-exhausted")


@dataclass(frozen=True)
class Observation:
    """Compacted view of one tool result (or tool failure)."""

    source: str  # tool name
    salient: dict[str, Any]
    raw_digest: str  # sha256 of the full structured result
    token_cost: int

    def to_dict(self) -> dict:
        return {
            "source": self.source,
            "salient": self.salient,
            "raw_digest": self.raw_digest,
            "token_cost": self.token_cost,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Observation":
        return cls(
            source=doc["source"],
            salient=dict(doc["salient"]),
            raw_digest=doc["raw_digest"],
            token_cost=int(doc["token_cost"]),
        )


class History:
    """Append-only (observation, action) pairs, oldest first."""

    def __init__(self, pairs: list[tuple[Observation, ToolCall]] | None = None):
        self._pairs: list[tuple[Observation, ToolCall]] = list(pairs or [])

    def append(self, observation: Observation, action: ToolCall) -> None:
        self._pairs.append((observation, action))

    def __len__(self) -> int:
        return len(self._pairs)

    def __iter__(self):
        return iter(self._pairs)

    def pairs(self) -> list[tuple[Observation, ToolCall]]:
        return list(self._pairs)

    def observations(self) -> list[Observation]:
        return [obs for obs, _ in self._pairs]

    def to_list(self) -> list[dict]:
        return [
            {"observation": obs.to_dict(), "action": call.to_dict()}
            for obs, call in self._pairs
        ]

    @classmethod
    def from_list(cls, docs: list[dict]) -> "History":
        return cls(
            [
                (Observation.from_dict(d["observation"]), ToolCall.from_dict(d["action"]))
                for d in docs
            ]
        )

    def __eq__(self, other: object) -> bool:
        return isinstance(other, History) and self._pairs == other._pairs


@dataclass
class Task:
    task_id: str
    description: str
    status: str = "pending"
    retry_count: int = 0

    def __post_init__(self) -> None:
        if not self.description.strip():
            raise ValueError("task description must be nonempty")
        if self.status not in TASK_STATUSES:
            raise ValueError(f"unknown task status {self.status!r}")
        if not 0 <= self.retry_count <= MAX_RETRIES:
            raise ValueError(f"retry_count {self.retry_count} outside 0..{MAX_RETRIES}")

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "description": self.description,
            "status": self.status,
            "retry_count": self.retry_count,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Task":
        return cls(
            task_id=doc["task_id"],
            description=doc["description"],
            status=doc["status"],
            retry_count=int(doc["retry_count"]),
        )


class TaskQueue:
    """Ordered tasks; at most one active at a time."""

    def __init__(self, tasks: list[Task] | None = None):
        self._tasks: list[Task] = list(tasks or [])
        self._created = sum(1 for _ in self._tasks)
        self._check()

    def _check(self) -> None:
        active = [t for t in self._tasks if t.status == "active"]
        if len(active) > 1:
            raise ValueError("at most one task may be active")

    def tasks(self) -> list[Task]:
        return list(self._tasks)

    @property
    def active(self) -> Optional[Task]:
        for task in self._tasks:
            if task.status == "active":
                return task
        return None

    def pending(self) -> list[Task]:
        return [t for t in self._tasks if t.status == "pending"]

    def add(self, description: str) -> Task:
        task = Task(task_id=f"t{self._created:03d}", description=description)
        self._created += 1
        self._tasks.append(task)
        return task

    def replace_pending(self, descriptions: list[str]) -> list[Task]:
        """Re-plan: drop pending tasks, keep the record of finished and
        abandoned ones, append the new decomposition."""
        self._tasks = [t for t in self._tasks if t.status not in ("pending",)]
        return [self.add(d) for d in descriptions]

    def activate_next(self) -> Optional[Task]:
        if self.active is not None:
            return self.active
        for task in self._tasks:
            if task.status == "pending":
                task.status = "active"
                return task
        return None

    def complete_active(self) -> None:
        task = self.active
        if task is None:
            raise ValueError("no active task to complete")
        task.status = "done"

    def note_rejection(self) -> bool:
        """Count one rejection against the active task.

        Returns True when the task just hit the retry ceiling and was
        abandoned (the caller must re-plan)."""
        task = self.active
        if task is None:
            raise ValueError("no active task to count a rejection against")
        task.retry_count += 1
        if task.retry_count >= MAX_RETRIES:
            task.status = "abandoned"
            return True
        return False

    def snapshot(self) -> list[dict]:
        return [t.to_dict() for t in self._tasks]

    def to_dict(self) -> dict:
        return {"tasks": self.snapshot(), "created": self._created}

    @classmethod
    def from_dict(cls, doc: dict) -> "TaskQueue":
        queue = cls([Task.from_dict(t) for t in doc["tasks"]])
        queue._created = int(doc["created"])
        return queue

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, TaskQueue)
            and self._tasks == other._tasks
            and self._created == other._created
        )


@dataclass(frozen=True)
class StopReason:
    kind: str
    detail: str = ""

    def __post_init__(self) -> None:
        if self.kind not in STOP_KINDS:
            raise ValueError(f"unknown stop kind {self.kind!r}")
        if self.kind == "flag-captured" and not self.detail:
            raise ValueError("flag-captured must carry the matched flag text")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "detail": self.detail}

    @classmethod
    def from_dict(cls, doc: dict) -> "StopReason":
        return cls(kind=doc["kind"], detail=doc.get("detail", ""))


def reward(stop: Optional[StopReason]) -> int:
    """Sparse episode reward: 1 exactly on flag capture."""
    return 1 if stop is not None and stop.kind == "flag-captured" else 0


@dataclass
class AgentState:
    """Everything the controller knows, minus the environment itself."""

    objective: str
    history: History = field(default_factory=History)
    queue: TaskQueue = field(default_factory=TaskQueue)
    elapsed_s: float = 0.0
    step_count: int = 0
    stop: Optional[StopReason] = None
    last_rejection: Optional[dict] = None
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.objective:
            raise ValueError("objective must be nonempty")

    def require_live(self) -> None:
        if self.stop is not None:
            raise ValueError(f"episode already stopped: {self.stop.kind}")

    def to_dict(self) -> dict:
        return {
            "objective": self.objective,
            "history": self.history.to_list(),
            "queue": self.queue.to_dict(),
            "elapsed_s": self.elapsed_s,
            "step_count": self.step_count,
            "stop": self.stop.to_dict() if self.stop else None,
            "last_rejection": self.last_rejection,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "AgentState":
        return cls(
            objective=doc["objective"],
            history=History.from_list(doc["history"]),
            queue=TaskQueue.from_dict(doc["queue"]),
            elapsed_s=float(doc["elapsed_s"]),
            step_count=int(doc["step_count"]),
            stop=StopReason.from_dict(doc["stop"]) if doc.get("stop") else None,
            last_rejection=doc.get("last_rejection"),
            seed=int(doc.get("seed", 0)),
        )

    def __eq__(self, other: object) -> bool:
        return isinstance(other, AgentState) and self.to_dict() == other.to_dict()
