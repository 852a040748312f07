"""Shared exception hierarchy.

Every error the package raises deliberately derives from GateError so
callers can catch the package's failures without catching bugs.
Invalid tool calls are NOT errors: validation verdicts and rejections
are ordinary values (see protocol.schema).
"""

from __future__ import annotations


class GateError(Exception):
    """Base class for all deliberate failures in this package."""


# -- wire protocol -----------------------------------------------------------

class MalformedFrame(GateError):
    """Frame bytes are not one well-formed UTF-8 JSON object."""


class ProtocolViolation(GateError):
    """Frame parsed but the envelope breaks a protocol rule."""


# -- projection --------------------------------------------------------------

class EmptyValidSet(GateError):
    """No candidate survived validation, so the partition sum Z is zero."""


# -- gateway -----------------------------------------------------------------

class DuplicateTool(GateError):
    """A tool name was registered twice."""


class UnreachableEndpoint(GateError):
    """Endpoint probe failed at registration time."""


class ToolTimeout(GateError):
    """A dispatched call exceeded its wall-time budget; the tool process was killed."""


class EndpointDown(GateError):
    """The tool-server process died or could not be reached."""


class SinkUnavailable(GateError):
    """The trace sink cannot accept appends; dispatch fails closed."""


# -- tool servers ------------------------------------------------------------

class ScopeViolation(GateError):
    """A server-side re-check caught an out-of-scope execution request."""


class CommandTimeout(GateError):
    """run_command exceeded its timeout; the process tree was terminated."""


class SpawnFailure(GateError):
    """The child process could not be started."""


class ParseError(GateError):
    """Structured-text input could not be parsed.

    Attributes:
        offset: byte offset of the first unparseable position, when known.
    """

    def __init__(self, message: str, offset: int | None = None):
        super().__init__(message if offset is None else f"{message} (at byte {offset})")
        self.offset = offset


class SchemaMismatch(GateError):
    """Input parsed as structured text but is not in the expected dialect."""


class SessionNotStopped(GateError):
    """A debug operation requires the debuggee to be stopped."""


class ArenaWalkFailure(GateError):
    """The allocator arena could not be located for a heap walk."""


class UnreadableArtifact(GateError):
    """Triage target path missing, unreadable, or URL not syntactically valid."""


# -- reasoner ----------------------------------------------------------------

class ReasonerFailure(GateError):
    """The reasoner backend failed: transport error or unparseable reply."""

    def __init__(self, message: str, reply_digest: str | None = None):
        super().__init__(message)
        self.reply_digest = reply_digest


class RateLimited(ReasonerFailure):
    """Remote endpoint kept rate-limiting past the bounded retry budget."""


class ScriptExhausted(ReasonerFailure):
    """The scripted scenario has no remaining steps."""


class ScriptDesync(ReasonerFailure):
    """A scripted step's guard did not match the live request.

    Attributes:
        field: name of the divergent guard field.
    """

    def __init__(self, field: str, message: str):
        super().__init__(f"script desync on {field}: {message}")
        self.field = field


class MissingCondition(GateError):
    """Requested doc-pack condition directory does not exist."""


class OrderingViolation(GateError):
    """Doc-pack line counts break the Baseline > Templates > Lessons > Minimal order."""


# -- agent loop --------------------------------------------------------------

class EmptyPlan(GateError):
    """The reasoner returned no tasks for a plan request."""


class CorruptCheckpoint(GateError):
    """Checkpoint hash mismatch or structural damage."""


# -- harness -----------------------------------------------------------------

class EnvironmentSetupFailure(GateError):
    """A challenge setup command failed; the trial is invalid, not failed."""


class DomainError(GateError):
    """Statistics function called outside its mathematical domain."""


class IoFailure(GateError):
    """Report files could not be written."""
