"""Validation-gated dispatch.

The dispatch pipeline is the circuit breaker: trace the call, run the
schema pass, run the scope pass, and only if both verdicts are valid
contact the tool server. An invalid call produces a structured
Rejection and the endpoint is never touched. Every path appends its
events before returning; if the trace sink fails, nothing executes.

Event order per dispatch:
    call, verdict(schema), [rejection] |
    call, verdict(schema), verdict(scope), [rejection] |
    call, verdict(schema), verdict(scope), result(ok|timeout|endpoint-down)
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from ctfgate.errors import EndpointDown, ToolTimeout
from ctfgate.gateway.policy import ScopePolicy, enforce_scope
from ctfgate.gateway.registry import HandlePool, ToolRegistry, new_session_id
from ctfgate.gateway.trace import TraceWriter
from ctfgate.protocol import wire
from ctfgate.protocol.schema import (
    Rejection,
    ToolCall,
    ValidationVerdict,
    make_rejection,
    unknown_tool_verdict,
    validate_call,
)


@dataclass(frozen=True)
class ToolResult:
    """Structured success payload returned by a tool server."""

    call_id: str
    tool_name: str
    payload: Any
    status: str = "ok"

    def to_dict(self) -> dict[str, Any]:
        return {
            "call_id": self.call_id,
            "tool_name": self.tool_name,
            "payload": self.payload,
            "status": self.status,
        }


@dataclass
class SessionState:
    """Per-session bookkeeping: id, registry snapshot, budget counters."""

    session_id: str
    calls_dispatched: int = 0
    calls_rejected: int = 0
    calls_executed: int = 0
    seen_call_ids: set[str] = field(default_factory=set)

    def note_call(self, call_id: str) -> None:
        if call_id in self.seen_call_ids:
            raise ValueError(f"call_id {call_id!r} reused within session")
        self.seen_call_ids.add(call_id)
        self.calls_dispatched += 1


class Gateway:
    """One agent session's gate to the tool servers."""

    def __init__(
        self,
        registry: ToolRegistry,
        policy: ScopePolicy,
        trace: TraceWriter,
        session_id: str | None = None,
    ):
        self.registry = registry
        self.policy = policy
        self.trace = trace
        self.session = SessionState(session_id=session_id or new_session_id())
        self.pool = HandlePool()

    # -- queries ---------------------------------------------------------------

    def tools_list(self) -> list[dict[str, Any]]:
        return self.registry.list_schemas()

    def schema_lookup(self):
        return self.registry.schema_lookup()

    # -- the gate ----------------------------------------------------------------

    def dispatch(self, call: ToolCall, deadline_s: float | None = None) -> ToolResult | Rejection:
        """Validate, scope-check, and only then execute one call.

        Raises ToolTimeout when the per-call budget expires (the tool
        process group is killed first) and EndpointDown when the server
        cannot be reached; both are traced as result events before the
        raise so the trace stays complete.
        """
        self.session.note_call(call.call_id)
        self.trace.append("call", {
            "call_id": call.call_id,
            "tool_name": call.tool_name,
            "arguments": call.arguments,
        })

        entry = self.registry.get(call.tool_name)
        if entry is None:
            verdict = unknown_tool_verdict(call.tool_name)
        else:
            verdict = validate_call(call, entry.schema)
        self._trace_verdict(call, "schema", verdict)
        if not verdict.valid:
            return self._reject(call, verdict)

        assert entry is not None
        scope_verdict = enforce_scope(call, self.policy, entry.schema)
        self._trace_verdict(call, "scope", scope_verdict)
        if not scope_verdict.valid:
            return self._reject(call, scope_verdict)

        return self._forward(call, entry, deadline_s)

    # -- helpers -----------------------------------------------------------------

    def _trace_verdict(self, call: ToolCall, pass_name: str, verdict: ValidationVerdict) -> None:
        self.trace.append("verdict", {
            "call_id": call.call_id,
            "pass": pass_name,
            "valid": verdict.valid,
            "violations": [v.to_dict() for v in verdict.violations],
        })

    def _reject(self, call: ToolCall, verdict: ValidationVerdict) -> Rejection:
        rejection = make_rejection(call, verdict.violations)
        self.session.calls_rejected += 1
        self.trace.append("rejection", rejection.to_dict())
        return rejection

    def _forward(self, call: ToolCall, entry, deadline_s: float | None) -> ToolResult | Rejection:
        budget = self.policy.max_wall_time
        if deadline_s is not None:
            budget = min(budget, max(deadline_s, 0.1))
        if entry.degraded:
            self.trace.append("result", {
                "call_id": call.call_id,
                "tool_name": call.tool_name,
                "status": "endpoint-down",
                "error": f"endpoint degraded at registration: {entry.degraded_reason}",
            })
            raise EndpointDown(
                f"tool {call.tool_name}: endpoint degraded: {entry.degraded_reason}"
            )
        handle = self.pool.get(entry.server, entry.endpoint)
        try:
            reply = handle.request(
                wire.METHOD_TOOLS_CALL,
                {"call_id": call.call_id, "tool": call.tool_name, "arguments": call.arguments},
                deadline_s=budget,
            )
        except ToolTimeout:
            self.trace.append("result", {
                "call_id": call.call_id,
                "tool_name": call.tool_name,
                "status": "timeout",
                "error": f"no response within {budget:.1f}s; tool process killed",
            })
            raise
        except EndpointDown as exc:
            self.trace.append("result", {
                "call_id": call.call_id,
                "tool_name": call.tool_name,
                "status": "endpoint-down",
                "error": str(exc),
            })
            raise

        if reply.kind == wire.KIND_ERROR_RESPONSE:
            rejection = Rejection.from_dict(reply.payload)
            self.session.calls_rejected += 1
            self.trace.append("rejection", rejection.to_dict())
            return rejection

        payload = reply.payload.get("result") if isinstance(reply.payload, dict) else reply.payload
        result = ToolResult(call_id=call.call_id, tool_name=call.tool_name, payload=payload)
        self.session.calls_executed += 1
        self.trace.append("result", {
            "call_id": call.call_id,
            "tool_name": call.tool_name,
            "status": "ok",
            "result": payload,
        })
        return result

    def close(self) -> None:
        self.pool.close_all()

    def __enter__(self) -> "Gateway":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()
