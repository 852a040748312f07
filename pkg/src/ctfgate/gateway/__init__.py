"""Gateway: registry, scope policy, trace log, and validation-gated dispatch."""

from ctfgate.gateway.policy import ScopePolicy, enforce_scope, load_policy
from ctfgate.gateway.trace import TraceEvent, TraceWriter, canonical_trace_bytes, read_trace
from ctfgate.gateway.registry import EndpointDescriptor, RegistryEntry, ToolRegistry, register_tool
from ctfgate.gateway.dispatch import Gateway, ToolResult

__all__ = [
    "ScopePolicy",
    "enforce_scope",
    "load_policy",
    "TraceEvent",
    "TraceWriter",
    "canonical_trace_bytes",
    "read_trace",
    "EndpointDescriptor",
    "RegistryEntry",
    "ToolRegistry",
    "register_tool",
    "Gateway",
    "ToolResult",
]
