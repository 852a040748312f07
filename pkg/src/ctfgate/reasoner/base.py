"""The reasoning boundary: request in, weighted candidates out.

Nothing on this side of the boundary may touch the sandbox. A reasoner
receives a compacted view of the episode (objective, tool catalog,
salient history, queue snapshot, last rejection) and emits candidate
tool calls with nonnegative weights. Validation, scope checks and
execution all happen elsewhere.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Protocol

from ctfgate.protocol.schema import ToolCall

# Serialized request ceiling. A request that cannot fit here would not
# fit a hosted model's context either; building one is a bug upstream
# in history compaction, so it fails loudly.
CONTEXT_BUDGET_BYTES = 262_144


@dataclass(frozen=True)
class ReasonerRequest:
    """One turn's input to a reasoner.

    tool_catalog is always present, whatever the doc-pack condition:
    the schemas are the floor of what any reasoner gets to see.
    """

    objective: str
    tool_catalog: tuple[dict, ...]  # ToolSchema.to_dict() documents
    history: tuple[dict, ...] = ()  # salient observation summaries, oldest first
    queue_snapshot: tuple[dict, ...] = ()
    doc_pack: str | None = None  # condition name, not the text itself
    last_rejection: dict | None = None
    step_index: int = 0

    def __post_init__(self) -> None:
        if not self.objective:
            raise ValueError("objective must be nonempty")
        if not self.tool_catalog:
            raise ValueError("tool catalog must always be present")
        size = len(json.dumps(self.to_dict()))
        if size > CONTEXT_BUDGET_BYTES:
            raise ValueError(
                f"serialized request is {size} bytes, over the {CONTEXT_BUDGET_BYTES} budget"
            )

    def to_dict(self) -> dict:
        return {
            "objective": self.objective,
            "tool_catalog": list(self.tool_catalog),
            "history": list(self.history),
            "queue_snapshot": list(self.queue_snapshot),
            "doc_pack": self.doc_pack,
            "last_rejection": self.last_rejection,
            "step_index": self.step_index,
        }


@dataclass(frozen=True)
class CandidateSet:
    """Weighted candidate actions for one step."""

    candidates: tuple[tuple[ToolCall, float], ...]
    rationale: str | None = None

    def __post_init__(self) -> None:
        if not self.candidates:
            raise ValueError("a candidate set holds at least one candidate")
        weights = [w for _, w in self.candidates]
        if any(w < 0 for w in weights):
            raise ValueError("candidate weights must be nonnegative")
        if all(w == 0 for w in weights):
            raise ValueError("candidate weights must not all be zero")

    def calls(self) -> list[ToolCall]:
        return [call for call, _ in self.candidates]


@dataclass
class PlanProposal:
    """A task decomposition proposed by a reasoner; may be empty on
    re-plans (the loop turns that into search exhaustion)."""

    tasks: list[str] = field(default_factory=list)
    rationale: str | None = None


class Reasoner(Protocol):
    """What the agent loop requires of any reasoning backend."""

    def propose_plan(self, request: ReasonerRequest) -> PlanProposal:
        """Decompose the objective into ordered atomic tasks."""
        ...

    def next_candidates(self, request: ReasonerRequest) -> CandidateSet:
        """Emit weighted candidate calls for the current step."""
        ...


def candidate_from_dict(doc: dict, default_call_id: str, rank: int) -> tuple[ToolCall, float]:
    """One candidate from its wire/scenario form.

    Weight falls back to 1/rank when absent: ordered lists without
    scores are the common case for hosted models.
    """
    call = ToolCall(
        call_id=str(doc.get("call_id", default_call_id)),
        tool_name=str(doc["tool"]),
        arguments=dict(doc.get("arguments", {})),
    )
    weight = float(doc.get("weight", 1.0 / rank))
    return call, weight
