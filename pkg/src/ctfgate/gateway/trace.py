"""Append-only decision trace.

One JSON object per line, written and flushed before dispatch proceeds:
no execution without audit. Events carry both wall-clock and monotonic
timestamps for humans, and a per-session sequence number that defines
the authoritative order.

canonical_trace_bytes strips the wall-clock fields (and any duration
fields, which are wall-clock in disguise) and re-serializes with sorted
keys, giving the byte-exact form used for determinism comparisons:
two runs of the same seeded episode must produce identical canonical
bytes even though their timestamps differ.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable

from ctfgate.errors import SinkUnavailable

EVENT_KINDS = frozenset({
    "call", "verdict", "result", "rejection", "plan-update", "checkpoint", "stop",
})

# Stripped from the canonical form: anything that encodes when rather
# than what. Matched exactly, at any nesting depth.
WALL_CLOCK_FIELDS = frozenset({
    "ts_wall", "ts_mono", "duration_s", "duration_min", "elapsed_s", "started_at", "ended_at",
})


@dataclass(frozen=True)
class TraceEvent:
    seq: int
    session: str
    kind: str
    ts_wall: float
    ts_mono: float
    payload: dict[str, Any]

    def to_dict(self) -> dict[str, Any]:
        return {
            "seq": self.seq,
            "session": self.session,
            "kind": self.kind,
            "ts_wall": self.ts_wall,
            "ts_mono": self.ts_mono,
            "payload": self.payload,
        }

    @classmethod
    def from_dict(cls, obj: dict[str, Any]) -> "TraceEvent":
        return cls(
            seq=obj["seq"],
            session=obj["session"],
            kind=obj["kind"],
            ts_wall=obj["ts_wall"],
            ts_mono=obj["ts_mono"],
            payload=obj.get("payload", {}),
        )


class TraceWriter:
    """Durable appender with gapless per-session sequence numbers.

    Append failures raise SinkUnavailable so the dispatcher can fail
    closed. The file handle is kept open in append mode; each event is
    one line, flushed immediately.
    """

    def __init__(self, path: str | Path, session: str, start_seq: int = 0):
        self.path = Path(path)
        self.session = session
        self._seq = start_seq
        try:
            self._fp = open(self.path, "a", encoding="utf-8")
        except OSError as exc:
            raise SinkUnavailable(f"cannot open trace sink {self.path}: {exc}") from exc

    @property
    def next_seq(self) -> int:
        return self._seq

    def append(self, kind: str, payload: dict[str, Any]) -> TraceEvent:
        if kind not in EVENT_KINDS:
            raise ValueError(f"unknown trace event kind {kind!r}")
        event = TraceEvent(
            seq=self._seq,
            session=self.session,
            kind=kind,
            ts_wall=time.time(),
            ts_mono=time.monotonic(),
            payload=payload,
        )
        line = json.dumps(event.to_dict(), sort_keys=True, separators=(",", ":"), ensure_ascii=False)
        try:
            self._fp.write(line + "\n")
            self._fp.flush()
        except (OSError, ValueError) as exc:
            raise SinkUnavailable(f"trace append failed: {exc}") from exc
        self._seq += 1
        return event

    def close(self) -> None:
        try:
            self._fp.close()
        except OSError:
            pass

    def __enter__(self) -> "TraceWriter":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


def read_trace(path: str | Path) -> list[TraceEvent]:
    events = []
    with open(path, "r", encoding="utf-8") as fp:
        for line in fp:
            line = line.strip()
            if line:
                events.append(TraceEvent.from_dict(json.loads(line)))
    return events


def _strip_wall_clock(value: Any) -> Any:
    if isinstance(value, dict):
        return {k: _strip_wall_clock(v) for k, v in value.items() if k not in WALL_CLOCK_FIELDS}
    if isinstance(value, list):
        return [_strip_wall_clock(v) for v in value]
    return value


def canonical_event(event: TraceEvent | dict[str, Any]) -> dict[str, Any]:
    obj = event.to_dict() if isinstance(event, TraceEvent) else event
    return _strip_wall_clock(obj)


def canonical_trace_bytes(events: Iterable[TraceEvent] | str | Path) -> bytes:
    """Timestamp-free, sorted-key, line-per-event byte form of a trace."""
    if isinstance(events, (str, Path)):
        events = read_trace(events)
    lines = [
        json.dumps(canonical_event(e), sort_keys=True, separators=(",", ":"), ensure_ascii=False)
        for e in events
    ]
    return ("\n".join(lines) + "\n").encode("utf-8") if lines else b""
