"""Versioned, hash-suffixed episode checkpoints.

File layout: one JSON document (sorted keys) on the first line, the
hex sha256 of that exact line on the second. Any byte of drift between
the two is CorruptCheckpoint; a checkpoint that cannot be trusted
whole is worth nothing.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

from ctfgate.agent.state import AgentState
from ctfgate.errors import CorruptCheckpoint

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class Checkpoint:
    state: AgentState
    reasoner_cursor: dict
    trace_next_seq: int
    session: str

    def to_dict(self) -> dict:
        return {
            "version": CHECKPOINT_VERSION,
            "state": self.state.to_dict(),
            "reasoner_cursor": self.reasoner_cursor,
            "trace_next_seq": self.trace_next_seq,
            "session": self.session,
        }


def save_checkpoint(cp: Checkpoint, path: str | Path) -> str:
    """Write the checkpoint; returns the content hash."""
    line = json.dumps(cp.to_dict(), sort_keys=True, separators=(",", ":"))
    digest = hashlib.sha256(line.encode("utf-8")).hexdigest()
    Path(path).write_text(line + "\n" + digest + "\n", encoding="utf-8")
    return digest


def load_checkpoint(path: str | Path) -> Checkpoint:
    """Read and verify; CorruptCheckpoint on any mismatch."""
    try:
        raw = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CorruptCheckpoint(f"cannot read checkpoint: {exc}") from exc
    lines = raw.splitlines()
    if len(lines) != 2:
        raise CorruptCheckpoint(f"expected document + hash lines, found {len(lines)}")
    document, recorded = lines
    actual = hashlib.sha256(document.encode("utf-8")).hexdigest()
    if actual != recorded:
        raise CorruptCheckpoint("checkpoint hash mismatch")
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise CorruptCheckpoint(f"checkpoint document is not JSON: {exc}") from exc
    if doc.get("version") != CHECKPOINT_VERSION:
        raise CorruptCheckpoint(f"unsupported checkpoint version {doc.get('version')!r}")
    try:
        return Checkpoint(
            state=AgentState.from_dict(doc["state"]),
            reasoner_cursor=dict(doc["reasoner_cursor"]),
            trace_next_seq=int(doc["trace_next_seq"]),
            session=str(doc["session"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptCheckpoint(f"checkpoint fields malformed: {exc}") from exc
