"""Engagement-scope policy and its enforcement pass.

Scope is orthogonal to schema validity: a call can be perfectly typed
and still aim outside the engagement. The scope pass runs only after
the schema pass succeeded, inspects the parameters the schema marks as
scope relevant (ipv4-target kinds, binary-path roles), and returns a
verdict enumerating every breach. Shrinking the policy can only shrink
the valid set.
"""

from __future__ import annotations

import ipaddress
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from ctfgate.protocol.schema import (
    KIND_IPV4_TARGET,
    KIND_LIST_OF,
    ParamSpec,
    ToolCall,
    ToolSchema,
    ValidationVerdict,
    Violation,
    verdict_from_violations,
)

DEFAULT_MAX_WALL_TIME_S = 120.0


@dataclass(frozen=True)
class ScopePolicy:
    """What the agent may touch: address ranges, binaries, per-call time."""

    allowed_cidrs: tuple[ipaddress.IPv4Network, ...]
    allowed_binaries: frozenset[str]
    max_wall_time: float = DEFAULT_MAX_WALL_TIME_S

    def __post_init__(self) -> None:
        if self.max_wall_time <= 0:
            raise ValueError("max_wall_time must be positive")
        for path in self.allowed_binaries:
            if not path.startswith("/"):
                raise ValueError(f"allow-listed binary {path!r} is not an absolute path")

    def permits_address(self, address: str) -> bool:
        addr = ipaddress.IPv4Address(address)
        return any(addr in net for net in self.allowed_cidrs)

    def permits_binary(self, path: str) -> bool:
        return path in self.allowed_binaries

    def cidr_text(self) -> str:
        return ", ".join(str(net) for net in self.allowed_cidrs) or "(none)"

    def to_dict(self) -> dict[str, Any]:
        return {
            "allowed_cidrs": [str(net) for net in self.allowed_cidrs],
            "allowed_binaries": sorted(self.allowed_binaries),
            "max_wall_time_seconds": self.max_wall_time,
        }


def make_policy(
    allowed_cidrs: list[str] | tuple[str, ...] = (),
    allowed_binaries: list[str] | tuple[str, ...] = (),
    max_wall_time_seconds: float = DEFAULT_MAX_WALL_TIME_S,
) -> ScopePolicy:
    nets = tuple(ipaddress.IPv4Network(c, strict=False) for c in allowed_cidrs)
    return ScopePolicy(
        allowed_cidrs=nets,
        allowed_binaries=frozenset(allowed_binaries),
        max_wall_time=float(max_wall_time_seconds),
    )


def load_policy(path: str | Path) -> ScopePolicy:
    """Read a policy file: JSON with allowed_cidrs, allowed_binaries,
    max_wall_time_seconds."""
    with open(path, "r", encoding="utf-8") as fp:
        obj = json.load(fp)
    if not isinstance(obj, dict):
        raise ValueError(f"policy file {path} is not a JSON object")
    return make_policy(
        allowed_cidrs=obj.get("allowed_cidrs", []),
        allowed_binaries=obj.get("allowed_binaries", []),
        max_wall_time_seconds=obj.get("max_wall_time_seconds", DEFAULT_MAX_WALL_TIME_S),
    )


def _scope_check_value(spec: ParamSpec, value: Any, label: str, policy: ScopePolicy,
                       out: list[Violation]) -> None:
    if spec.kind == KIND_IPV4_TARGET:
        # Syntax was the schema pass's job; here only range membership.
        if not policy.permits_address(value):
            out.append(Violation(label, f"IPv4 address within engagement scope {policy.cidr_text()}", value))
        return
    if spec.scope_role == "binary":
        if not policy.permits_binary(value):
            out.append(Violation(label, "binary on the engagement allow-list", value))
        return
    if spec.kind == KIND_LIST_OF and spec.item is not None and isinstance(value, list):
        if spec.item.kind == KIND_IPV4_TARGET or spec.item.scope_role == "binary":
            for i, element in enumerate(value):
                _scope_check_value(spec.item, element, f"{label}[{i}]", policy, out)


def enforce_scope(call: ToolCall, policy: ScopePolicy, schema: ToolSchema) -> ValidationVerdict:
    """Scope pass over a schema-valid call; lists every breach.

    Precondition: validate_call(call, schema).valid is true. Values are
    therefore syntactically well-formed for their kinds.
    """
    violations: list[Violation] = []
    for spec in schema.params:
        if spec.name not in call.arguments:
            continue
        _scope_check_value(spec, call.arguments[spec.name], spec.name, policy, violations)
    return verdict_from_violations(violations)
