"""Wire envelope codec for the gateway protocol, server side.

One frame is one UTF-8 JSON object on one line. The envelope fields:

    v       protocol version string, always "1"
    kind    request | response | error-response | notification
    id      present on requests; echoed on responses and error-responses
    method  present on requests and notifications
    payload any JSON value

This server only ever reads requests and writes responses, so the
codec covers exactly that surface. decode_line raises WireError on
anything that is not a well-formed envelope; the serializer emits
sorted compact JSON, so equal frames encode to equal bytes and never
contain a raw newline.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any, BinaryIO

PROTOCOL_VERSION = "1"

KIND_REQUEST = "request"
KIND_RESPONSE = "response"
KIND_ERROR_RESPONSE = "error-response"
KIND_NOTIFICATION = "notification"

_KINDS = frozenset({KIND_REQUEST, KIND_RESPONSE, KIND_ERROR_RESPONSE, KIND_NOTIFICATION})

METHOD_TOOLS_LIST = "tools/list"
METHOD_TOOLS_CALL = "tools/call"
METHOD_TOOLS_RESULT = "tools/result"
METHOD_TOOLS_REJECT = "tools/reject"

_ENVELOPE_FIELDS = frozenset({"v", "kind", "id", "method", "payload"})


class WireError(Exception):
    """The bytes are not one well-formed protocol frame."""


@dataclass(frozen=True)
class Frame:
    kind: str
    id: str | None = None
    method: str | None = None
    payload: Any = None


def decode_line(data: bytes) -> Frame:
    try:
        obj = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise WireError(f"frame is not one JSON object: {exc}") from exc
    if not isinstance(obj, dict):
        raise WireError(f"frame is not a JSON object: {type(obj).__name__}")
    unknown = set(obj) - _ENVELOPE_FIELDS
    if unknown:
        raise WireError(f"unknown envelope fields: {sorted(unknown)}")
    if obj.get("v") != PROTOCOL_VERSION:
        raise WireError(f"unsupported protocol version {obj.get('v')!r}")
    kind = obj.get("kind")
    if kind not in _KINDS:
        raise WireError(f"unknown message kind {kind!r}")
    frame_id = obj.get("id")
    if frame_id is not None and not isinstance(frame_id, str):
        raise WireError("envelope field 'id' must be a string when present")
    method = obj.get("method")
    if method is not None and not isinstance(method, str):
        raise WireError("envelope field 'method' must be a string when present")
    if kind == KIND_REQUEST and (not frame_id or not method):
        raise WireError("request carries no id or no method")
    if kind == KIND_NOTIFICATION and not method:
        raise WireError("notification carries no method")
    if kind in (KIND_RESPONSE, KIND_ERROR_RESPONSE) and not frame_id:
        raise WireError(f"{kind} carries no id")
    return Frame(kind=kind, id=frame_id, method=method, payload=obj.get("payload"))


def encode_line(kind: str, *, id: str | None = None, method: str | None = None,
                payload: Any = None) -> bytes:
    obj: dict[str, Any] = {"v": PROTOCOL_VERSION, "kind": kind, "payload": payload}
    if id is not None:
        obj["id"] = id
    if method is not None:
        obj["method"] = method
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


def read_frame(fp: BinaryIO) -> Frame | None:
    """Read one newline-terminated frame. Returns None on clean EOF."""
    line = fp.readline()
    if line == b"":
        return None
    return decode_line(line.rstrip(b"\n"))


def write_frame(fp: BinaryIO, kind: str, *, id: str | None = None,
                method: str | None = None, payload: Any = None) -> None:
    fp.write(encode_line(kind, id=id, method=method, payload=payload) + b"\n")
    fp.flush()
