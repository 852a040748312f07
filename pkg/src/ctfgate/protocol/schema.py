"""Tool schemas and the call-validity predicate.

A ToolSchema describes one callable tool: its name and an ordered list
of typed parameters. validate_call evaluates the validity predicate
over a ToolCall: true iff every required parameter is present, no
unknown parameters appear, and every offered value satisfies its
parameter's constraints. Validation is strict by design:

  * unknown tools and unknown parameters are violations, not warnings;
  * values are never coerced ("80" does not satisfy an integer param);
  * ALL failures are enumerated, not just the first.

Invalidity is a value (ValidationVerdict), never an exception. The
constraint strings rendered into violations are part of the package's
contract and are golden-tested; change them deliberately.
"""

from __future__ import annotations

import ipaddress
import re
from dataclasses import dataclass, field
from typing import Any

# The only accepted shape for address-valued parameters.
HEX_ADDRESS_PATTERN = r"0x[0-9a-fA-F]+"

KIND_INTEGER = "integer"
KIND_STRING = "string"
KIND_HEX_ADDRESS = "hex-address-string"
KIND_IPV4_TARGET = "ipv4-target"
KIND_ENUM = "enum"
KIND_BOOLEAN = "boolean"
KIND_LIST_OF = "list-of"

_KINDS = frozenset({
    KIND_INTEGER,
    KIND_STRING,
    KIND_HEX_ADDRESS,
    KIND_IPV4_TARGET,
    KIND_ENUM,
    KIND_BOOLEAN,
    KIND_LIST_OF,
})

_IDENTIFIER_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_./-]*")


@dataclass(frozen=True)
class ParamSpec:
    """One typed parameter of a tool schema.

    Constraint fields apply per kind: lo/hi for integer (inclusive),
    pattern for string, variants for enum, item for list-of.
    hex-address-string is a string pinned to HEX_ADDRESS_PATTERN and
    carries no other constraints. ipv4-target values are checked for
    IPv4 syntax here; whether the address is inside the engagement
    scope is the gateway's separate scope pass.

    scope_role marks parameters the scope pass must additionally check:
    "binary" for executable paths checked against the allow-list.
    ipv4-target params are scope-checked by kind and need no role.
    """

    name: str
    kind: str
    required: bool = True
    lo: int | None = None
    hi: int | None = None
    pattern: str | None = None
    variants: tuple[str, ...] | None = None
    item: "ParamSpec | None" = None
    scope_role: str | None = None
    description: str = ""

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise ValueError(f"unknown param kind {self.kind!r}")
        if not _IDENTIFIER_RE.fullmatch(self.name):
            raise ValueError(f"bad param name {self.name!r}")
        if self.lo is not None and self.hi is not None and self.lo > self.hi:
            raise ValueError(f"param {self.name}: lo {self.lo} > hi {self.hi}")
        if self.kind == KIND_ENUM and not self.variants:
            raise ValueError(f"enum param {self.name} needs variants")
        if self.kind == KIND_LIST_OF and self.item is None:
            raise ValueError(f"list param {self.name} needs an item spec")
        if self.pattern is not None:
            re.compile(self.pattern)  # must compile; raises re.error otherwise

    def constraint_text(self) -> str:
        """The human- and model-readable description of what satisfies this param.

        These exact strings appear in violations and rejection hints.
        """
        if self.kind == KIND_INTEGER:
            if self.lo is not None and self.hi is not None:
                return f"integer in range {self.lo}-{self.hi}"
            if self.lo is not None:
                return f"integer >= {self.lo}"
            if self.hi is not None:
                return f"integer <= {self.hi}"
            return "integer"
        if self.kind == KIND_HEX_ADDRESS:
            return f"string matching {HEX_ADDRESS_PATTERN}"
        if self.kind == KIND_STRING:
            if self.pattern is not None:
                return f"string matching {self.pattern}"
            return "string"
        if self.kind == KIND_IPV4_TARGET:
            return "IPv4 address"
        if self.kind == KIND_ENUM:
            assert self.variants is not None
            return "one of: " + ", ".join(self.variants)
        if self.kind == KIND_BOOLEAN:
            return "boolean"
        assert self.kind == KIND_LIST_OF and self.item is not None
        return f"list of {self.item.constraint_text()}"

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"name": self.name, "kind": self.kind, "required": self.required}
        if self.lo is not None:
            out["lo"] = self.lo
        if self.hi is not None:
            out["hi"] = self.hi
        if self.pattern is not None:
            out["pattern"] = self.pattern
        if self.variants is not None:
            out["variants"] = list(self.variants)
        if self.item is not None:
            out["item"] = self.item.to_dict()
        if self.scope_role is not None:
            out["scope_role"] = self.scope_role
        if self.description:
            out["description"] = self.description
        return out

    @classmethod
    def from_dict(cls, obj: dict[str, Any]) -> "ParamSpec":
        return cls(
            name=obj["name"],
            kind=obj["kind"],
            required=obj.get("required", True),
            lo=obj.get("lo"),
            hi=obj.get("hi"),
            pattern=obj.get("pattern"),
            variants=tuple(obj["variants"]) if obj.get("variants") is not None else None,
            item=cls.from_dict(obj["item"]) if obj.get("item") is not None else None,
            scope_role=obj.get("scope_role"),
            description=obj.get("description", ""),
        )


@dataclass(frozen=True)
class ToolSchema:
    """Name, description, and ordered parameters of one tool."""

    tool_name: str
    description: str
    params: tuple[ParamSpec, ...] = ()

    def __post_init__(self) -> None:
        if not self.tool_name or not _IDENTIFIER_RE.fullmatch(self.tool_name):
            raise ValueError(f"bad tool name {self.tool_name!r}")
        names = [p.name for p in self.params]
        if len(names) != len(set(names)):
            raise ValueError(f"duplicate param names in {self.tool_name}: {names}")

    def param(self, name: str) -> ParamSpec | None:
        for p in self.params:
            if p.name == name:
                return p
        return None

    def to_dict(self) -> dict[str, Any]:
        return {
            "tool_name": self.tool_name,
            "description": self.description,
            "params": [p.to_dict() for p in self.params],
        }

    @classmethod
    def from_dict(cls, obj: dict[str, Any]) -> "ToolSchema":
        return cls(
            tool_name=obj["tool_name"],
            description=obj.get("description", ""),
            params=tuple(ParamSpec.from_dict(p) for p in obj.get("params", [])),
        )


@dataclass(frozen=True)
class ToolCall:
    """One proposed action: a tool name with named arguments."""

    call_id: str
    tool_name: str
    arguments: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {"call_id": self.call_id, "tool_name": self.tool_name, "arguments": self.arguments}

    @classmethod
    def from_dict(cls, obj: dict[str, Any]) -> "ToolCall":
        return cls(call_id=obj["call_id"], tool_name=obj["tool_name"], arguments=dict(obj.get("arguments", {})))


# Violations against the call as a whole (unknown tool) use this marker
# as the param name, since no schema param can be named.
CALL_ITSELF = "(call)"


@dataclass(frozen=True)
class Violation:
    """One failed constraint: which param, what was required, what was offered."""

    param: str
    constraint: str
    offered: Any

    def render(self) -> str:
        return f"{self.param}: expected {self.constraint}, got {self.offered!r}"

    def to_dict(self) -> dict[str, Any]:
        return {"param": self.param, "constraint": self.constraint, "offered": self.offered}

    @classmethod
    def from_dict(cls, obj: dict[str, Any]) -> "Violation":
        return cls(param=obj["param"], constraint=obj["constraint"], offered=obj.get("offered"))


@dataclass(frozen=True)
class ValidationVerdict:
    """The validity predicate's output: valid iff violations is empty."""

    valid: bool
    violations: tuple[Violation, ...] = ()

    def __post_init__(self) -> None:
        if self.valid != (len(self.violations) == 0):
            raise ValueError("verdict invariant broken: valid must equal violations-empty")

    def to_dict(self) -> dict[str, Any]:
        return {"valid": self.valid, "violations": [v.to_dict() for v in self.violations]}


def verdict_from_violations(violations: list[Violation] | tuple[Violation, ...]) -> ValidationVerdict:
    vs = tuple(violations)
    return ValidationVerdict(valid=not vs, violations=vs)


@dataclass(frozen=True)
class Rejection:
    """Structured refusal of one call, with correction guidance."""

    call_id: str
    violations: tuple[Violation, ...]
    hint: str

    def to_dict(self) -> dict[str, Any]:
        return {
            "call_id": self.call_id,
            "violations": [v.to_dict() for v in self.violations],
            "hint": self.hint,
        }

    @classmethod
    def from_dict(cls, obj: dict[str, Any]) -> "Rejection":
        return cls(
            call_id=obj["call_id"],
            violations=tuple(Violation.from_dict(v) for v in obj.get("violations", [])),
            hint=obj.get("hint", ""),
        )


def make_hint(violations: tuple[Violation, ...]) -> str:
    """Render violations into one correction-guidance line."""
    return "; ".join(v.render() for v in violations)


def make_rejection(call: ToolCall, violations: tuple[Violation, ...]) -> Rejection:
    return Rejection(call_id=call.call_id, violations=violations, hint=make_hint(violations))


def unknown_tool_verdict(tool_name: str) -> ValidationVerdict:
    """Verdict for a call naming a tool absent from the registry."""
    v = Violation(param=CALL_ITSELF, constraint="a registered tool name", offered=tool_name)
    return ValidationVerdict(valid=False, violations=(v,))


# -- per-kind value checks ---------------------------------------------------

def _check_value(spec: ParamSpec, value: Any, param_label: str, out: list[Violation]) -> None:
    """Append a violation for param_label unless value satisfies spec.

    No coercion anywhere: an int is not a bool, a digit string is not
    an integer, 1 is not True.
    """
    constraint = spec.constraint_text()
    if spec.kind == KIND_INTEGER:
        if not isinstance(value, int) or isinstance(value, bool):
            out.append(Violation(param_label, constraint, value))
            return
        if (spec.lo is not None and value < spec.lo) or (spec.hi is not None and value > spec.hi):
            out.append(Violation(param_label, constraint, value))
        return
    if spec.kind == KIND_HEX_ADDRESS:
        if not isinstance(value, str) or not re.fullmatch(HEX_ADDRESS_PATTERN, value):
            out.append(Violation(param_label, constraint, value))
        return
    if spec.kind == KIND_STRING:
        if not isinstance(value, str):
            out.append(Violation(param_label, constraint, value))
            return
        if spec.pattern is not None and not re.fullmatch(spec.pattern, value):
            out.append(Violation(param_label, constraint, value))
        return
    if spec.kind == KIND_IPV4_TARGET:
        if not isinstance(value, str):
            out.append(Violation(param_label, constraint, value))
            return
        try:
            ipaddress.IPv4Address(value)
        except (ipaddress.AddressValueError, ValueError):
            out.append(Violation(param_label, constraint, value))
        return
    if spec.kind == KIND_ENUM:
        assert spec.variants is not None
        if not isinstance(value, str) or value not in spec.variants:
            out.append(Violation(param_label, constraint, value))
        return
    if spec.kind == KIND_BOOLEAN:
        if not isinstance(value, bool):
            out.append(Violation(param_label, constraint, value))
        return
    assert spec.kind == KIND_LIST_OF and spec.item is not None
    if not isinstance(value, list):
        out.append(Violation(param_label, constraint, value))
        return
    for i, element in enumerate(value):
        _check_value(spec.item, element, f"{param_label}[{i}]", out)


def validate_call(call: ToolCall, schema: ToolSchema) -> ValidationVerdict:
    """Evaluate the validity predicate for one call against its schema.

    The caller must have resolved the schema for call.tool_name; for an
    unknown tool use unknown_tool_verdict instead. All failures are
    enumerated in the returned verdict.
    """
    violations: list[Violation] = []
    known = {p.name for p in schema.params}
    for name in call.arguments:
        if name not in known:
            violations.append(Violation(name, "no such parameter for this tool", call.arguments[name]))
    for spec in schema.params:
        if spec.name not in call.arguments:
            if spec.required:
                violations.append(Violation(spec.name, f"required parameter ({spec.constraint_text()})", None))
            continue
        _check_value(spec, call.arguments[spec.name], spec.name, violations)
    return verdict_from_violations(violations)
