"""Parser for the debugger's machine-interface line protocol.

One call parses one output line into an MIRecord. The grammar:

    record       = prompt | stream | result | async
    prompt       = "(gdb)" [ " " ]
    result       = [token] "^" class ("," named-value)*
    async        = [token] ("*" | "+" | "=") class ("," named-value)*
    stream       = ("~" | "@" | "&") c-string
    named-value  = name "=" value
    value        = c-string | "{" named-value, ... "}" | "[" items "]"

List items are either bare values or named values; both occur in real
output (frame lists name every element "frame"). The parsed tree keeps
named list items as (name, value) pairs so re-serialization reproduces
the original structure exactly.

parse_mi_record is total: any input yields an MIRecord or a ParseError
carrying the byte offset of the failure; nothing else escapes. One
deliberate narrowing: a duplicate field name inside one tuple or record
is a ParseError, because a name-to-value tree cannot represent it
faithfully and silent last-wins corruption is worse than refusal.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Any, Union

from ctfgate.errors import ParseError

# The parsed value tree: const strings, tuples as dicts, lists holding
# values or (name, value) pairs.
MIValue = Union[str, dict, list]

RESULT_CLASSES = ("done", "running", "connected", "error", "exit")

_STREAM_CLASSES = {"~": "console-stream", "@": "target-stream", "&": "log-stream"}
_ASYNC_CLASSES = {"*": "exec-async", "+": "status-async", "=": "notify-async"}

_NAME_RE = re.compile(r"[a-zA-Z_][a-zA-Z0-9_-]*")

_ESCAPES = {
    '"': '"',
    "\\": "\\",
    "'": "'",
    "n": "\n",
    "t": "\t",
    "r": "\r",
    "f": "\f",
    "b": "\b",
    "a": "\a",
    "v": "\v",
    "e": "\x1b",
}
_UNESCAPES = {"\n": "\\n", "\t": "\\t", "\r": "\\r", "\f": "\\f", "\b": "\\b",
              "\a": "\\a", "\v": "\\v", '"': '\\"', "\\": "\\\\"}


@dataclass(frozen=True)
class MIRecord:
    """One parsed machine-interface output line."""

    record_class: str  # result | exec-async | status-async | notify-async |
                       # console-stream | target-stream | log-stream | prompt
    result_class: str | None = None  # done/running/connected/error/exit, or the async class
    token: str | None = None
    fields: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.record_class == "result" and self.result_class not in RESULT_CLASSES:
            raise ValueError(f"result record needs a result class, got {self.result_class!r}")
        if self.record_class == "prompt" and (self.result_class or self.token or self.fields):
            raise ValueError("prompt records carry nothing")


class _Cursor:
    __slots__ = ("text", "pos")

    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def peek(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def take(self) -> str:
        ch = self.peek()
        if not ch:
            raise ParseError("unexpected end of record", self.pos)
        self.pos += 1
        return ch

    def expect(self, ch: str) -> None:
        if self.peek() != ch:
            raise ParseError(f"expected {ch!r}, found {self.peek()!r}", self.pos)
        self.pos += 1

    def at_end(self) -> bool:
        return self.pos >= len(self.text)


def _parse_c_string(cur: _Cursor) -> str:
    cur.expect('"')
    out: list[str] = []
    while True:
        if cur.at_end():
            raise ParseError("unterminated string", cur.pos)
        ch = cur.take()
        if ch == '"':
            return "".join(out)
        if ch != "\\":
            out.append(ch)
            continue
        esc = cur.take()
        if esc in _ESCAPES:
            out.append(_ESCAPES[esc])
        elif esc.isdigit():
            digits = esc
            while len(digits) < 3 and cur.peek().isdigit():
                digits += cur.take()
            code = int(digits, 8)
            if code > 0xFF:
                raise ParseError(f"octal escape out of range: \\{digits}", cur.pos)
            out.append(chr(code))
        else:
            raise ParseError(f"unknown escape \\{esc}", cur.pos - 1)


def _escape_c_string(text: str) -> str:
    out: list[str] = []
    for ch in text:
        if ch in _UNESCAPES:
            out.append(_UNESCAPES[ch])
        elif " " <= ch <= "~":
            out.append(ch)
        else:
            code = ord(ch)
            if code <= 0xFF:
                out.append(f"\\{code:03o}")
            else:
                out.extend(f"\\{b:03o}" for b in ch.encode("utf-8"))
    return '"' + "".join(out) + '"'


def _parse_name(cur: _Cursor) -> str:
    m = _NAME_RE.match(cur.text, cur.pos)
    if not m:
        raise ParseError("expected a field name", cur.pos)
    cur.pos = m.end()
    return m.group(0)


def _parse_value(cur: _Cursor) -> MIValue:
    ch = cur.peek()
    if ch == '"':
        return _parse_c_string(cur)
    if ch == "{":
        cur.take()
        tup: dict[str, MIValue] = {}
        if cur.peek() == "}":
            cur.take()
            return tup
        while True:
            name_pos = cur.pos
            name = _parse_name(cur)
            cur.expect("=")
            if name in tup:
                raise ParseError(f"duplicate field {name!r} in tuple", name_pos)
            tup[name] = _parse_value(cur)
            if cur.peek() == "}":
                cur.take()
                return tup
            cur.expect(",")
    if ch == "[":
        cur.take()
        items: list[Any] = []
        if cur.peek() == "]":
            cur.take()
            return items
        while True:
            # A named item looks like name=...; a bare value starts with
            # a quote or bracket. Disambiguate by trying a name.
            m = _NAME_RE.match(cur.text, cur.pos)
            if m and m.end() < len(cur.text) and cur.text[m.end()] == "=":
                name = m.group(0)
                cur.pos = m.end() + 1
                items.append((name, _parse_value(cur)))
            else:
                items.append(_parse_value(cur))
            if cur.peek() == "]":
                cur.take()
                return items
            cur.expect(",")
    raise ParseError(f"expected a value, found {ch!r}", cur.pos)


def _parse_results(cur: _Cursor) -> dict[str, MIValue]:
    fields: dict[str, MIValue] = {}
    while not cur.at_end():
        cur.expect(",")
        name_pos = cur.pos
        name = _parse_name(cur)
        cur.expect("=")
        if name in fields:
            raise ParseError(f"duplicate field {name!r} in record", name_pos)
        fields[name] = _parse_value(cur)
    return fields


def parse_mi_record(line: str) -> MIRecord:
    """Parse one machine-interface output line.

    Raises ParseError (with byte offset) on anything outside the
    grammar; never any other exception, whatever the input.
    """
    line = line.rstrip("\r\n")
    if line == "(gdb)" or line == "(gdb) ":
        return MIRecord(record_class="prompt")

    cur = _Cursor(line)
    token_match = re.match(r"\d+", line)
    token: str | None = None
    if token_match:
        token = token_match.group(0)
        cur.pos = token_match.end()

    ch = cur.peek()
    if ch in _STREAM_CLASSES:
        if token is not None:
            raise ParseError("stream records carry no token", 0)
        cur.take()
        text = _parse_c_string(cur)
        if not cur.at_end():
            raise ParseError("trailing bytes after stream string", cur.pos)
        return MIRecord(record_class=_STREAM_CLASSES[ch], fields={"text": text})

    if ch == "^":
        cur.take()
        klass = _parse_name(cur)
        if klass not in RESULT_CLASSES:
            raise ParseError(f"unknown result class {klass!r}", cur.pos - len(klass))
        fields = _parse_results(cur)
        return MIRecord(record_class="result", result_class=klass, token=token, fields=fields)

    if ch in _ASYNC_CLASSES:
        cur.take()
        klass = _parse_name(cur)
        fields = _parse_results(cur)
        return MIRecord(
            record_class=_ASYNC_CLASSES[ch], result_class=klass, token=token, fields=fields
        )

    raise ParseError(f"unrecognized record start {ch!r}", cur.pos)


# -- serialization -------------------------------------------------------------

def _serialize_value(value: MIValue) -> str:
    if isinstance(value, str):
        return _escape_c_string(value)
    if isinstance(value, dict):
        return "{" + ",".join(f"{k}={_serialize_value(v)}" for k, v in value.items()) + "}"
    if isinstance(value, list):
        parts = []
        for item in value:
            if isinstance(item, tuple):
                name, inner = item
                parts.append(f"{name}={_serialize_value(inner)}")
            else:
                parts.append(_serialize_value(item))
        return "[" + ",".join(parts) + "]"
    raise ValueError(f"unsupported value in tree: {type(value).__name__}")


def serialize_mi_record(record: MIRecord) -> str:
    """Inverse of parse_mi_record (without trailing newline)."""
    if record.record_class == "prompt":
        return "(gdb) "
    token = record.token or ""
    if record.record_class in ("console-stream", "target-stream", "log-stream"):
        symbol = {v: k for k, v in _STREAM_CLASSES.items()}[record.record_class]
        return symbol + _escape_c_string(record.fields.get("text", ""))
    tail = "".join(f",{k}={_serialize_value(v)}" for k, v in record.fields.items())
    if record.record_class == "result":
        return f"{token}^{record.result_class}{tail}"
    symbol = {v: k for k, v in _ASYNC_CLASSES.items()}[record.record_class]
    return f"{token}{symbol}{record.result_class}{tail}"


def simplify_tree(value: Any) -> Any:
    """JSON-safe view of a parsed tree: (name, value) pairs become
    one-key objects. Used for shipping records over the wire; the exact
    tree (with pairs) stays Python-side for round-trip tests."""
    if isinstance(value, dict):
        return {k: simplify_tree(v) for k, v in value.items()}
    if isinstance(value, list):
        return [
            {item[0]: simplify_tree(item[1])} if isinstance(item, tuple) else simplify_tree(item)
            for item in value
        ]
    return value
