"""Wire message envelope and transport framing.

One frame carries one UTF-8 JSON object. The envelope has five fields:

    v       protocol version string, always "1"
    kind    request | response | error-response | notification
    id      present on requests; echoed on responses and error-responses
    method  present on requests and notifications
    payload any JSON value

Framing is transport specific. On stdio a frame is one line: the JSON
object followed by b"\\n", and the serializer never emits unescaped
newlines. On TCP a frame is an 8-digit decimal byte-length header
followed by exactly that many bytes of JSON.

decode_message never raises anything but MalformedFrame (bytes are not
one JSON object) or ProtocolViolation (object parsed, envelope bad),
no matter the input.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass
from typing import Any, BinaryIO

from ctfgate.errors import MalformedFrame, ProtocolViolation

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

# Length header: 8 ASCII decimal digits, zero padded.
_TCP_HEADER_LEN = 8
_TCP_MAX_FRAME = 10**_TCP_HEADER_LEN - 1


@dataclass(frozen=True)
class WireMessage:
    """One protocol frame, decoded.

    id and method are optional depending on kind; __post_init__ enforces
    the envelope rules so a WireMessage is well-formed by construction.
    """

    kind: str
    id: str | None = None
    method: str | None = None
    payload: Any = None
    v: str = PROTOCOL_VERSION

    def __post_init__(self) -> None:
        if self.v != PROTOCOL_VERSION:
            raise ProtocolViolation(f"unsupported protocol version {self.v!r}")
        if self.kind not in _KINDS:
            raise ProtocolViolation(f"unknown message kind {self.kind!r}")
        if self.kind == KIND_REQUEST:
            if not self.id:
                raise ProtocolViolation("request carries no id")
            if not self.method:
                raise ProtocolViolation("request carries no method")
        elif self.kind == KIND_NOTIFICATION:
            if not self.method:
                raise ProtocolViolation("notification carries no method")
        else:  # response / error-response
            if not self.id:
                raise ProtocolViolation(f"{self.kind} carries no id")


def request(id: str, method: str, payload: Any = None) -> WireMessage:
    return WireMessage(kind=KIND_REQUEST, id=id, method=method, payload=payload)


def response(id: str, payload: Any = None, method: str | None = None) -> WireMessage:
    return WireMessage(kind=KIND_RESPONSE, id=id, method=method, payload=payload)


def error_response(id: str, payload: Any = None, method: str | None = None) -> WireMessage:
    return WireMessage(kind=KIND_ERROR_RESPONSE, id=id, method=method, payload=payload)


def notification(method: str, payload: Any = None) -> WireMessage:
    return WireMessage(kind=KIND_NOTIFICATION, method=method, payload=payload)


def encode_message(msg: WireMessage) -> bytes:
    """Serialize one message to frame bytes (no framing header/terminator).

    Keys are sorted and output is compact, so equal messages encode to
    equal bytes. json.dumps never emits raw newlines, which keeps the
    stdio one-frame-per-line rule safe.
    """
    obj: dict[str, Any] = {"v": msg.v, "kind": msg.kind, "payload": msg.payload}
    if msg.id is not None:
        obj["id"] = msg.id
    if msg.method is not None:
        obj["method"] = msg.method
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


def decode_message(data: bytes) -> WireMessage:
    """Parse one frame's bytes into a WireMessage.

    Raises:
        MalformedFrame: not UTF-8, not JSON, or not a JSON object.
        ProtocolViolation: JSON object but the envelope is invalid.
    """
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise MalformedFrame(f"frame is not UTF-8: {exc}") from exc
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedFrame(f"frame is not JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise MalformedFrame(f"frame is not a JSON object: {type(obj).__name__}")

    version = obj.get("v")
    if not isinstance(version, str):
        raise ProtocolViolation("envelope field 'v' missing or not a string")
    kind = obj.get("kind")
    if not isinstance(kind, str):
        raise ProtocolViolation("envelope field 'kind' missing or not a string")
    msg_id = obj.get("id")
    if msg_id is not None and not isinstance(msg_id, str):
        raise ProtocolViolation("envelope field 'id' must be a string when present")
    method = obj.get("method")
    if method is not None and not isinstance(method, str):
        raise ProtocolViolation("envelope field 'method' must be a string when present")
    unknown = set(obj) - {"v", "kind", "id", "method", "payload"}
    if unknown:
        raise ProtocolViolation(f"unknown envelope fields: {sorted(unknown)}")
    # WireMessage.__post_init__ enforces the per-kind rules.
    return WireMessage(kind=kind, id=msg_id, method=method, payload=obj.get("payload"), v=version)


# -- stdio framing -----------------------------------------------------------

def write_frame_stdio(fp: BinaryIO, msg: WireMessage) -> None:
    fp.write(encode_message(msg) + b"\n")
    fp.flush()


def read_frame_stdio(fp: BinaryIO) -> WireMessage | None:
    """Read one newline-terminated frame. Returns None on clean EOF."""
    line = fp.readline()
    if line == b"":
        return None
    return decode_message(line.rstrip(b"\n"))


# -- TCP framing -------------------------------------------------------------

def write_frame_tcp(fp: BinaryIO, msg: WireMessage) -> None:
    data = encode_message(msg)
    if len(data) > _TCP_MAX_FRAME:
        raise ProtocolViolation(f"frame of {len(data)} bytes exceeds the length-header capacity")
    fp.write(b"%08d" % len(data) + data)
    fp.flush()


def _read_exact(fp: BinaryIO, n: int) -> bytes | None:
    buf = io.BytesIO()
    remaining = n
    while remaining:
        chunk = fp.read(remaining)
        if not chunk:
            return None if buf.tell() == 0 else buf.getvalue()
        buf.write(chunk)
        remaining -= len(chunk)
    return buf.getvalue()


def read_frame_tcp(fp: BinaryIO) -> WireMessage | None:
    """Read one length-prefixed frame. Returns None on clean EOF."""
    header = _read_exact(fp, _TCP_HEADER_LEN)
    if header is None:
        return None
    if len(header) != _TCP_HEADER_LEN or not header.isdigit():
        raise MalformedFrame(f"bad length header {header!r}")
    body = _read_exact(fp, int(header))
    if body is None or len(body) != int(header):
        raise MalformedFrame("frame truncated before declared length")
    return decode_message(body)
