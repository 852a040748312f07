"""Allow-listed command execution with hard timeout supervision.

The gateway already refused out-of-scope binaries, but this server
re-checks (defense in depth): a compromised or misconfigured gateway
must not be enough to run an unapproved executable.

Children run in their own session so a timeout can kill the entire
process group; after any return, including Timeout, no descendant of
the spawned command survives.
"""

from __future__ import annotations

import os
import signal
import subprocess
import time
from dataclasses import dataclass

from ctfgate.errors import CommandTimeout, ScopeViolation, SpawnFailure
from ctfgate.gateway.policy import ScopePolicy

# Per-stream capture cap. Output beyond this is dropped and flagged,
# bounding what a chatty tool can shove into agent context.
STREAM_CAP_BYTES = 1024 * 1024

DEFAULT_TIMEOUT_S = 30.0


@dataclass(frozen=True)
class CommandSpec:
    """One command to run: absolute binary, args, optional stdin, timeout."""

    binary: str
    args: tuple[str, ...] = ()
    stdin: bytes | None = None
    timeout: float = DEFAULT_TIMEOUT_S

    def __post_init__(self) -> None:
        if not self.binary.startswith("/"):
            raise ValueError(f"binary must be an absolute path: {self.binary!r}")
        for a in self.args:
            if "\x00" in a:
                raise ValueError("args must not contain NUL octets")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")


@dataclass(frozen=True)
class CommandResult:
    exit_code: int
    stdout: bytes
    stderr: bytes
    duration: float
    truncated: bool

    def to_dict(self) -> dict:
        return {
            "exit_code": self.exit_code,
            "stdout": self.stdout.decode("utf-8", errors="replace"),
            "stderr": self.stderr.decode("utf-8", errors="replace"),
            "duration_s": self.duration,
            "truncated": self.truncated,
        }


def _kill_group(proc: subprocess.Popen) -> None:
    try:
        os.killpg(os.getpgid(proc.pid), signal.SIGKILL)
    except (ProcessLookupError, PermissionError):
        pass
    try:
        proc.wait(timeout=5)
    except subprocess.TimeoutExpired:
        pass


def run_command(spec: CommandSpec, policy: ScopePolicy, cwd: str | None = None) -> CommandResult:
    """Run one allow-listed command under timeout supervision.

    Raises:
        ScopeViolation: spec.binary is not on the policy allow-list.
        SpawnFailure: the process could not be started.
        CommandTimeout: deadline passed; the whole process group was killed.
    """
    if not policy.permits_binary(spec.binary):
        raise ScopeViolation(f"binary {spec.binary!r} is not on the engagement allow-list")
    started = time.monotonic()
    try:
        proc = subprocess.Popen(
            [spec.binary, *spec.args],
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            cwd=cwd,
            start_new_session=True,
        )
    except OSError as exc:
        raise SpawnFailure(f"cannot start {spec.binary}: {exc}") from exc
    try:
        stdout, stderr = proc.communicate(input=spec.stdin, timeout=spec.timeout)
    except subprocess.TimeoutExpired:
        _kill_group(proc)
        # Reap any remaining pipe content; the group is already dead.
        try:
            proc.communicate(timeout=5)
        except (subprocess.TimeoutExpired, ValueError):
            pass
        raise CommandTimeout(
            f"{spec.binary} exceeded {spec.timeout:.1f}s; process group killed"
        ) from None
    duration = time.monotonic() - started
    truncated = len(stdout) > STREAM_CAP_BYTES or len(stderr) > STREAM_CAP_BYTES
    return CommandResult(
        exit_code=proc.returncode,
        stdout=stdout[:STREAM_CAP_BYTES],
        stderr=stderr[:STREAM_CAP_BYTES],
        duration=duration,
        truncated=truncated,
    )


def descendant_pids(root_pid: int) -> list[int]:
    """Live descendants of root_pid, via /proc. Used by hygiene checks."""
    children: dict[int, list[int]] = {}
    for entry in os.listdir("/proc"):
        if not entry.isdigit():
            continue
        try:
            with open(f"/proc/{entry}/stat", "r") as fp:
                fields = fp.read().split()
            ppid = int(fields[3])
        except (OSError, IndexError, ValueError):
            continue
        children.setdefault(ppid, []).append(int(entry))
    out: list[int] = []
    stack = [root_pid]
    while stack:
        pid = stack.pop()
        for child in children.get(pid, []):
            out.append(child)
            stack.append(child)
    return out
