"""The plan/execute/parse/iterate loop.

One sequential controller per episode. Each iteration asks the
reasoner for weighted candidates, projects them onto the valid set,
dispatches the best survivor through the gateway, compacts the result
into an observation, and updates the task queue. Rejections feed back
into the next request as structured violations; a task that keeps
drawing rejections is abandoned and the plan rebuilt.

Termination: flag capture (the sparse reward), wall-clock timeout,
step budget, or search exhaustion (a re-plan that proposes nothing).

Determinism contract: with a scripted reasoner and fixed fixtures, the
trace is byte-identical across runs once wall-clock fields are
stripped, including across a checkpoint/resume split. Everything the
loop writes into trace payloads is derived from decisions, never from
clocks; clocks only decide *whether* to stop, and the resulting stop
event records the reason, not the time.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

from ctfgate.agent.checkpoint import Checkpoint, save_checkpoint
from ctfgate.agent.salience import (
    DEFAULT_BUDGET_WORDS,
    DEFAULT_FLAG_PATTERN,
    error_observation,
    parse_observation,
)
from ctfgate.agent.state import AgentState, Observation, StopReason
from ctfgate.errors import EmptyPlan, EmptyValidSet, EndpointDown, ToolTimeout
from ctfgate.gateway.dispatch import Gateway, ToolResult
from ctfgate.protocol.projection import (
    ActionDistribution,
    argmax_candidate,
    project_distribution,
)
from ctfgate.protocol.schema import Rejection, ToolCall
from ctfgate.reasoner.base import CandidateSet, Reasoner, ReasonerRequest

HISTORY_WINDOW = 12  # most recent observation summaries shown to the reasoner


@dataclass
class EpisodeConfig:
    objective: str
    flag_pattern: str = DEFAULT_FLAG_PATTERN
    doc_pack: Optional[str] = None
    timeout_s: float = 3600.0
    grace_s: float = 5.0
    max_steps: int = 100
    observation_budget: int = DEFAULT_BUDGET_WORDS
    checkpoint_path: Optional[str] = None
    checkpoint_every_s: float = 600.0
    # Deterministic split for tests: checkpoint exactly after this many
    # steps (both the split run and its uninterrupted twin take it, so
    # their traces agree event for event).
    checkpoint_after_steps: Optional[int] = None
    halt_at_checkpoint: bool = False
    seed: int = 0


@dataclass
class StepOutcome:
    kind: str  # result | rejection | empty-valid-set
    call: Optional[ToolCall] = None
    observation: Optional[Observation] = None
    rejection: Optional[dict] = None


@dataclass
class EpisodeRunner:
    config: EpisodeConfig
    reasoner: Reasoner
    gateway: Gateway
    state: AgentState = field(init=False)
    _started: float = field(init=False, default=0.0)
    _last_checkpoint: float = field(init=False, default=0.0)

    def __post_init__(self) -> None:
        self.state = AgentState(objective=self.config.objective, seed=self.config.seed)

    # -- request assembly ---------------------------------------------------------

    def _request(self) -> ReasonerRequest:
        recent = self.state.history.observations()[-HISTORY_WINDOW:]
        request = ReasonerRequest(
            objective=self.config.objective,
            tool_catalog=tuple(self.gateway.tools_list()),
            history=tuple(obs.to_dict() for obs in recent),
            queue_snapshot=tuple(self.state.queue.snapshot()),
            doc_pack=self.config.doc_pack,
            last_rejection=self.state.last_rejection,
            step_index=self.state.step_count,
        )
        return request

    # -- planning ----------------------------------------------------------------

    def plan(self, trigger: str) -> bool:
        """Ask the reasoner for a task decomposition.

        Returns False when the proposal was empty on a re-plan; raises
        EmptyPlan when even the initial plan is empty.
        """
        proposal = self.reasoner.propose_plan(self._request())
        if not proposal.tasks:
            if trigger == "initial":
                raise EmptyPlan("the reasoner proposed no tasks for the objective")
            return False
        self.state.queue.replace_pending(proposal.tasks)
        self._plan_update(trigger, proposal.rationale)
        return True

    def _plan_update(self, trigger: str, rationale: Optional[str]) -> None:
        self.gateway.trace.append("plan-update", {
            "trigger": trigger,
            "tasks": self.state.queue.snapshot(),
            "rationale": rationale,
        })

    # -- one loop turn ------------------------------------------------------------

    def execute_step(self) -> StepOutcome:
        """Candidates -> projection -> dispatch -> parse. One action."""
        self.state.require_live()
        if self.state.queue.activate_next() is None:
            raise ValueError("execute_step needs an active or pending task")

        request = self._request()
        self.state.last_rejection = None  # feedback is consumed exactly once
        candidates: CandidateSet = self.reasoner.next_candidates(request)
        distribution = ActionDistribution(
            entries=tuple(candidates.candidates)
        )
        schemas = self.gateway.schema_lookup()
        try:
            projected = project_distribution(distribution, schemas)
        except EmptyValidSet:
            # nothing the reasoner wants is even well-formed: force a re-plan
            handled = self.plan("empty-valid-set")
            if not handled:
                self.state.stop = StopReason("search-exhausted",
                                             "re-plan after empty valid set proposed nothing")
            self.state.step_count += 1
            return StepOutcome(kind="empty-valid-set")

        call = argmax_candidate(projected)
        remaining = self._remaining_s()
        try:
            outcome = self.gateway.dispatch(call, deadline_s=remaining)
        except (ToolTimeout, EndpointDown) as exc:
            status = "timeout" if isinstance(exc, ToolTimeout) else "endpoint-down"
            observation = error_observation(call.tool_name, status, str(exc))
            self.state.history.append(observation, call)
            self.state.step_count += 1
            return StepOutcome(kind="result", call=call, observation=observation)

        if isinstance(outcome, Rejection):
            self.state.step_count += 1
            self.handle_rejection(outcome)
            return StepOutcome(kind="rejection", call=call, rejection=outcome.to_dict())

        assert isinstance(outcome, ToolResult)
        observation = parse_observation(
            outcome,
            budget=self.config.observation_budget,
            flag_pattern=self.config.flag_pattern,
        )
        self.state.history.append(observation, call)
        self.state.step_count += 1
        # atomic task: one successful action completes it
        self.state.queue.complete_active()
        return StepOutcome(kind="result", call=call, observation=observation)

    def handle_rejection(self, rejection: Rejection) -> None:
        """Feed a rejection back: bump the retry counter, refine the plan."""
        self.state.last_rejection = rejection.to_dict()
        abandoned = self.state.queue.note_rejection()
        # every rejection refines the plan before the next attempt
        self._plan_update("rejection", rejection.hint)
        if abandoned:
            if not self.plan("abandonment"):
                self.state.stop = StopReason(
                    "search-exhausted", "re-plan after task abandonment proposed nothing"
                )

    # -- termination --------------------------------------------------------------

    def _remaining_s(self) -> float:
        if self._started == 0.0:
            return self.config.timeout_s
        consumed = self.state.elapsed_s + (time.monotonic() - self._started)
        return self.config.timeout_s - consumed

    def check_termination(self) -> Optional[StopReason]:
        if self.state.stop is not None:
            return self.state.stop
        for obs in reversed(self.state.history.observations()):
            flag = obs.salient.get("flag")
            if flag:
                return StopReason("flag-captured", flag)
        if self._remaining_s() <= 0:
            return StopReason("timeout", f"episode exceeded {self.config.timeout_s:.0f}s")
        if self.state.step_count >= self.config.max_steps:
            return StopReason("budget-exhausted",
                              f"step budget of {self.config.max_steps} spent")
        if self.state.queue.activate_next() is None:
            if not self.plan("queue-empty"):
                return StopReason("search-exhausted", "re-plan proposed nothing")
        return None

    # -- checkpointing ------------------------------------------------------------

    def _cursor(self) -> dict:
        cursor = getattr(self.reasoner, "cursor", None)
        return cursor() if callable(cursor) else {}

    def take_checkpoint(self) -> Optional[str]:
        if not self.config.checkpoint_path:
            return None
        self.state.elapsed_s += time.monotonic() - self._started
        self._started = time.monotonic()
        # marker first, snapshot second: the recorded trace_next_seq
        # must point past the checkpoint event itself, or the resumed
        # writer would reuse its sequence number. payload is clock-free
        # so split and uninterrupted traces agree.
        self.gateway.trace.append("checkpoint", {
            "step_count": self.state.step_count,
            "queue": self.state.queue.snapshot(),
            "history_length": len(self.state.history),
        })
        cp = Checkpoint(
            state=self.state,
            reasoner_cursor=self._cursor(),
            trace_next_seq=self.gateway.trace.next_seq,
            session=self.gateway.trace.session,
        )
        return save_checkpoint(cp, self.config.checkpoint_path)

    def _checkpoint_due(self) -> bool:
        if self.config.checkpoint_after_steps is not None:
            return self.state.step_count == self.config.checkpoint_after_steps
        if not self.config.checkpoint_path:
            return False
        return time.monotonic() - self._last_checkpoint >= self.config.checkpoint_every_s

    # -- episode ------------------------------------------------------------------

    def resume_from(self, cp: Checkpoint) -> None:
        """Adopt a checkpointed state; the reasoner cursor is restored
        when the implementation supports seeking."""
        self.state = cp.state
        seek = getattr(self.reasoner, "seek", None)
        if callable(seek) and cp.reasoner_cursor:
            seek(cp.reasoner_cursor)

    def run(self) -> AgentState:
        """Drive the loop to a stop reason. Returns the final state."""
        self._started = time.monotonic()
        self._last_checkpoint = self._started
        if len(self.state.queue.tasks()) == 0:
            self.plan("initial")
        while True:
            stop = self.check_termination()
            if stop is not None:
                self.state.stop = stop
                break
            self.execute_step()
            if self._checkpoint_due():
                self.take_checkpoint()
                self._last_checkpoint = time.monotonic()
                if self.config.halt_at_checkpoint:
                    # interrupted mid-episode: no stop event, resumable
                    self.state.elapsed_s += time.monotonic() - self._started
                    return self.state
        self.gateway.trace.append("stop", self.state.stop.to_dict())
        self.state.elapsed_s += time.monotonic() - self._started
        return self.state
