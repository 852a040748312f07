"""Deterministic scripted reasoner: replays a recorded scenario.

Scenario file (JSON):

    {
      "version": 1,
      "name": "optional label",
      "plans": [["task", ...], ...],     # one list per plan() call, in order
      "steps": [
        {
          "guards": {                     # all optional; all must hold
            "objective_contains": "flag",
            "has_rejection": true,
            "rejection_param": "port",
            "min_history": 2,
            "step_index": 4
          },
          "candidates": [
            {"tool": "port_scan", "arguments": {...}, "weight": 1.0},
            ...
          ],
          "rationale": "optional text"
        },
        ...
      ]
    }

Candidate call_ids are derived from the step position (step-0003-c01),
never from clocks, so identical scenarios yield identical traces.
Guards pin the script to the episode it was recorded against: when the
live request stops matching, the replay refuses with ScriptDesync
naming the divergent field instead of feeding stale actions forward.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

from ctfgate.errors import ScriptDesync, ScriptExhausted
from ctfgate.reasoner.base import (
    CandidateSet,
    PlanProposal,
    ReasonerRequest,
    candidate_from_dict,
)

SCENARIO_VERSION = 1


def load_scenario(source: str | Path | dict) -> dict:
    """Structurally check one scenario document (a path or an
    already-parsed object)."""
    if isinstance(source, dict):
        doc: Any = source
    else:
        doc = json.loads(Path(source).read_text(encoding="utf-8"))
    if not isinstance(doc, dict) or doc.get("version") != SCENARIO_VERSION:
        raise ValueError(f"not a version-{SCENARIO_VERSION} scenario document")
    if not isinstance(doc.get("steps"), list):
        raise ValueError("scenario needs a steps list")
    for i, step in enumerate(doc["steps"]):
        if not step.get("candidates"):
            raise ValueError(f"step {i} has no candidates")
    if not isinstance(doc.get("plans", []), list):
        raise ValueError("plans must be a list of task lists")
    return doc


def _check_guards(guards: dict[str, Any], request: ReasonerRequest, step: int) -> None:
    if "objective_contains" in guards:
        needle = guards["objective_contains"]
        if needle not in request.objective:
            raise ScriptDesync(
                "objective",
                f"step {step} expects the objective to mention {needle!r}",
            )
    if "has_rejection" in guards:
        expected = bool(guards["has_rejection"])
        actual = request.last_rejection is not None
        if expected != actual:
            raise ScriptDesync(
                "last_rejection",
                f"step {step} expects rejection feedback {'present' if expected else 'absent'},"
                f" found it {'present' if actual else 'absent'}",
            )
    if "rejection_param" in guards:
        wanted = guards["rejection_param"]
        violations = (request.last_rejection or {}).get("violations", [])
        params = [v.get("param") for v in violations]
        if wanted not in params:
            raise ScriptDesync(
                "last_rejection",
                f"step {step} expects a violation on {wanted!r}, found {params}",
            )
    if "min_history" in guards and len(request.history) < guards["min_history"]:
        raise ScriptDesync(
            "history",
            f"step {step} expects at least {guards['min_history']} observations,"
            f" found {len(request.history)}",
        )
    if "step_index" in guards and request.step_index != guards["step_index"]:
        raise ScriptDesync(
            "step_index",
            f"step {step} was recorded at loop index {guards['step_index']},"
            f" replay reached it at {request.step_index}",
        )


class ScriptedReasoner:
    """Replays one scenario; emission only, no side effects."""

    def __init__(self, scenario: dict | str | Path):
        if not isinstance(scenario, dict):
            scenario = load_scenario(scenario)
        self._scenario = scenario
        self._steps: list[dict] = scenario["steps"]
        self._plans: list[list[str]] = list(scenario.get("plans", []))
        self._next_step = 0
        self._next_plan = 0
        self.name = scenario.get("name", "scripted")

    @property
    def steps_remaining(self) -> int:
        return len(self._steps) - self._next_step

    def propose_plan(self, request: ReasonerRequest) -> PlanProposal:
        # An exhausted plan list is an empty proposal, not an error:
        # the loop turns an empty re-plan into search exhaustion.
        if self._next_plan >= len(self._plans):
            return PlanProposal(tasks=[])
        tasks = list(self._plans[self._next_plan])
        self._next_plan += 1
        return PlanProposal(tasks=tasks, rationale=f"scripted plan {self._next_plan}")

    def next_candidates(self, request: ReasonerRequest) -> CandidateSet:
        if self._next_step >= len(self._steps):
            raise ScriptExhausted(
                f"scenario {self.name!r} has no step {self._next_step}"
            )
        step = self._steps[self._next_step]
        _check_guards(step.get("guards", {}), request, self._next_step)
        position = self._next_step
        self._next_step += 1
        candidates = tuple(
            candidate_from_dict(doc, f"step-{position:04d}-c{rank:02d}", rank)
            for rank, doc in enumerate(step["candidates"], start=1)
        )
        return CandidateSet(candidates=candidates, rationale=step.get("rationale"))

    # Replay state for checkpointing: two cursors fully describe it.
    def cursor(self) -> dict:
        return {"next_step": self._next_step, "next_plan": self._next_plan}

    def seek(self, cursor: dict) -> None:
        self._next_step = int(cursor["next_step"])
        self._next_plan = int(cursor["next_plan"])
