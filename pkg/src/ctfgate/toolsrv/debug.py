"""Debugger session wrapper and structured heap inspection.

GdbSession drives the system debugger in machine-interface mode as a
child process: commands go down stdin with numeric tokens, and a reader
thread turns every output line into a parsed MIRecord. Nothing here
exposes raw dump text to the agent; results come back as structured
values.

inspect_heap walks the main allocation arena of a stopped debuggee
using the allocator's chunk-header layout on this platform: 16-byte
headers, size in the second word with the low three bits as flags, a
chunk's in-use state readable from the NEXT chunk's low size bit.
Chunks sitting in thread caches or fastbins keep that bit set, so they
are reported in_use=true; the report reflects the arena's metadata, not
the program's logical liveness. Corrupt metadata ends the walk and the
chunks collected so far are returned (partial data beats a crash mid
exploit).
"""

from __future__ import annotations

import queue
import signal
import subprocess
import threading
import time
from dataclasses import dataclass

from ctfgate.errors import ArenaWalkFailure, EndpointDown, SessionNotStopped, SpawnFailure
from ctfgate.toolsrv.mi import MIRecord, parse_mi_record

GDB_BINARY = "/usr/bin/gdb"

# Allocator layout constants (64-bit system allocator).
CHUNK_HEADER = 16
MIN_CHUNK = 32
SIZE_FLAGS = 0x7
PREV_INUSE = 0x1


@dataclass(frozen=True)
class HeapChunk:
    address: str  # chunk base, hex string
    size: int
    in_use: bool
    preview: str  # first 16 bytes of user data, hex

    def to_dict(self) -> dict:
        return {"address": self.address, "size": self.size, "in_use": self.in_use, "preview": self.preview}


@dataclass(frozen=True)
class HeapReport:
    chunks: tuple[HeapChunk, ...]
    arena_size: int

    def __post_init__(self) -> None:
        addresses = [int(c.address, 16) for c in self.chunks]
        if any(b <= a for a, b in zip(addresses, addresses[1:])):
            raise ValueError("chunk addresses must strictly increase")
        if any(c.size <= 0 for c in self.chunks):
            raise ValueError("chunk sizes must be positive")

    def to_dict(self) -> dict:
        return {"chunks": [c.to_dict() for c in self.chunks], "arena_size": self.arena_size}


class GdbSession:
    """One debugger process wrapping one debuggee."""

    def __init__(self, binary: str, gdb_path: str = GDB_BINARY, args: list[str] | None = None):
        self.binary = binary
        try:
            self._proc = subprocess.Popen(
                [gdb_path, "--interpreter=mi2", "-q", "-nx", binary],
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
                start_new_session=True,
            )
        except OSError as exc:
            raise SpawnFailure(f"cannot start debugger: {exc}") from exc
        self._records: queue.Queue[MIRecord | None] = queue.Queue()
        self._reader = threading.Thread(target=self._drain, daemon=True)
        self._reader.start()
        self._token = 0
        self.stopped = False  # no inferior yet; becomes True on breakpoint stops
        self._running = False
        self._args = args or []
        # Swallow the banner records up to the first prompt.
        self._read_until_prompt(deadline_s=10.0)

    # -- plumbing --------------------------------------------------------------

    def _drain(self) -> None:
        assert self._proc.stdout is not None
        try:
            for raw in self._proc.stdout:
                line = raw.decode("utf-8", errors="replace")
                try:
                    self._records.put(parse_mi_record(line))
                except Exception:
                    continue  # stray non-protocol output is ignored
        finally:
            self._records.put(None)

    def _next_record(self, deadline_s: float) -> MIRecord:
        try:
            rec = self._records.get(timeout=deadline_s)
        except queue.Empty:
            raise EndpointDown("debugger produced no output before the deadline") from None
        if rec is None:
            raise EndpointDown("debugger exited")
        return rec

    def _read_until_prompt(self, deadline_s: float) -> list[MIRecord]:
        out = []
        deadline = time.monotonic() + deadline_s
        while True:
            rec = self._next_record(max(deadline - time.monotonic(), 0.05))
            if rec.record_class == "prompt":
                return out
            out.append(rec)

    def command(self, text: str, deadline_s: float = 20.0) -> MIRecord:
        """Send one MI command; return its result record.

        Async and stream records arriving before the result are tracked
        for run-state and otherwise dropped.
        """
        if self._proc.poll() is not None or self._proc.stdin is None:
            raise EndpointDown("debugger is not running")
        self._token += 1
        token = str(self._token)
        try:
            self._proc.stdin.write(f"{token}{text}\n".encode("utf-8"))
            self._proc.stdin.flush()
        except (OSError, ValueError) as exc:
            raise EndpointDown(f"debugger write failed: {exc}") from exc
        deadline = time.monotonic() + deadline_s
        while True:
            rec = self._next_record(max(deadline - time.monotonic(), 0.05))
            self._track_state(rec)
            if rec.record_class == "result" and rec.token == token:
                return rec

    def _track_state(self, rec: MIRecord) -> None:
        if rec.record_class == "exec-async":
            if rec.result_class == "stopped":
                self.stopped = True
                self._running = False
            elif rec.result_class == "running":
                self.stopped = False
                self._running = True

    def wait_stopped(self, deadline_s: float = 30.0) -> MIRecord:
        """Block until the debuggee reports a stop."""
        deadline = time.monotonic() + deadline_s
        while not self.stopped:
            rec = self._next_record(max(deadline - time.monotonic(), 0.05))
            self._track_state(rec)
            if rec.record_class == "exec-async" and rec.result_class == "stopped":
                return rec
        return MIRecord(record_class="exec-async", result_class="stopped")

    # -- operations --------------------------------------------------------------

    def break_insert(self, location: str) -> MIRecord:
        rec = self.command(f"-break-insert {location}")
        if rec.result_class != "done":
            raise EndpointDown(f"break-insert failed: {rec.fields.get('msg')}")
        return rec

    def run(self, wait_stop: bool = True) -> None:
        if self._args:
            joined = " ".join(self._args)
            self.command(f"-exec-arguments {joined}")
        rec = self.command("-exec-run")
        if rec.result_class not in ("running", "done"):
            raise EndpointDown(f"exec-run failed: {rec.fields.get('msg')}")
        if wait_stop:
            self.wait_stopped()

    def cont(self, wait_stop: bool = True) -> None:
        rec = self.command("-exec-continue")
        if rec.result_class not in ("running", "done"):
            raise EndpointDown(f"exec-continue failed: {rec.fields.get('msg')}")
        if wait_stop:
            self.wait_stopped()

    def inferior_pid(self) -> int:
        rec = self.command("-list-thread-groups")
        for item in rec.fields.get("groups", []):
            entry = item[1] if isinstance(item, tuple) else item
            if isinstance(entry, dict) and entry.get("pid"):
                return int(entry["pid"])
        raise SessionNotStopped("no live inferior process")

    def read_memory(self, addr: int, count: int) -> bytes:
        rec = self.command(f"-data-read-memory-bytes {hex(addr)} {count}")
        if rec.result_class != "done":
            raise ArenaWalkFailure(f"memory read at {hex(addr)} failed: {rec.fields.get('msg')}")
        blob = b""
        for item in rec.fields.get("memory", []):
            entry = item[1] if isinstance(item, tuple) else item
            if isinstance(entry, dict) and "contents" in entry:
                blob += bytes.fromhex(entry["contents"])
        if len(blob) < count:
            raise ArenaWalkFailure(f"short memory read at {hex(addr)}: {len(blob)}/{count}")
        return blob[:count]

    def evaluate(self, expression: str) -> str:
        rec = self.command(f'-data-evaluate-expression "{expression}"')
        if rec.result_class != "done":
            raise EndpointDown(f"evaluate failed: {rec.fields.get('msg')}")
        return str(rec.fields.get("value", ""))

    def heap_bounds(self) -> tuple[int, int]:
        """Locate the main arena's heap mapping via /proc."""
        pid = self.inferior_pid()
        try:
            with open(f"/proc/{pid}/maps", "r") as fp:
                for line in fp:
                    if line.rstrip().endswith("[heap]"):
                        span = line.split()[0]
                        start_s, end_s = span.split("-")
                        return int(start_s, 16), int(end_s, 16)
        except OSError as exc:
            raise ArenaWalkFailure(f"cannot read process maps: {exc}") from exc
        raise ArenaWalkFailure("debuggee has no heap mapping")

    def close(self) -> None:
        if self._proc.poll() is None:
            try:
                assert self._proc.stdin is not None
                self._proc.stdin.write(b"-gdb-exit\n")
                self._proc.stdin.flush()
            except (OSError, ValueError, AssertionError):
                pass
            try:
                self._proc.wait(timeout=3)
            except subprocess.TimeoutExpired:
                try:
                    self._proc.send_signal(signal.SIGKILL)
                    self._proc.wait(timeout=3)
                except (OSError, subprocess.TimeoutExpired):
                    pass

    def __enter__(self) -> "GdbSession":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


def inspect_heap(count: int, session: GdbSession) -> HeapReport:
    """Walk up to `count` chunks of the stopped debuggee's main arena.

    Raises SessionNotStopped when the debuggee is running and
    ArenaWalkFailure when the arena cannot be located at all. Corrupt
    chunk metadata mid-walk is NOT an error: the walk stops and the
    report carries what was collected.
    """
    if count < 0:
        raise ValueError("count must be nonnegative")
    if not session.stopped:
        raise SessionNotStopped("debuggee must be stopped for a heap walk")
    heap_start, heap_end = session.heap_bounds()
    arena_size = heap_end - heap_start
    if count == 0:
        return HeapReport(chunks=(), arena_size=arena_size)

    chunks: list[HeapChunk] = []
    addr = heap_start
    while len(chunks) < count and addr + CHUNK_HEADER <= heap_end:
        try:
            header = session.read_memory(addr, CHUNK_HEADER)
        except ArenaWalkFailure:
            break
        size_field = int.from_bytes(header[8:16], "little")
        size = size_field & ~SIZE_FLAGS
        if size < MIN_CHUNK or size % 16 != 0 or addr + size > heap_end:
            break  # corrupt metadata or end of arena: stop, report what we have
        if addr + size == heap_end:
            break  # the top chunk is the arena remainder, not a user chunk
        try:
            next_header = session.read_memory(addr + size, CHUNK_HEADER)
            preview = session.read_memory(addr + CHUNK_HEADER, min(16, size - CHUNK_HEADER))
        except ArenaWalkFailure:
            break
        next_size_field = int.from_bytes(next_header[8:16], "little")
        chunks.append(
            HeapChunk(
                address=hex(addr),
                size=size,
                in_use=bool(next_size_field & PREV_INUSE),
                preview=preview.hex(),
            )
        )
        addr += size
    return HeapReport(chunks=tuple(chunks), arena_size=arena_size)


def chunk_size_for_request(request: int) -> int:
    """The allocator's chunk size for a user request of `request` bytes.

    Size-class oracle used by tests: request + 8 bytes of overhead,
    rounded up to 16, floor of 32.
    """
    return max(MIN_CHUNK, (request + 8 + 15) & ~15)
