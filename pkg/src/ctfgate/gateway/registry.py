"""Tool registry and tool-server endpoints.

Every tool is backed by a separate OS process reached over the wire
protocol; the gateway never imports tool code into its own process.
An endpoint is either a subprocess speaking newline-framed messages on
its stdio, or a TCP address speaking length-prefixed frames.

Registration probes the endpoint (argv executable present, or TCP
connectable). A failed probe does not drop the tool: the entry is
flagged degraded so tools/list can still describe it, and dispatching
to it raises EndpointDown.
"""

from __future__ import annotations

import os
import queue
import shutil
import signal
import socket
import subprocess
import threading
import time
import uuid
from dataclasses import dataclass, field
from typing import Any

from ctfgate.errors import DuplicateTool, EndpointDown, ToolTimeout
from ctfgate.protocol import wire
from ctfgate.protocol.schema import ToolSchema
from ctfgate.protocol.wire import WireMessage


@dataclass(frozen=True)
class EndpointDescriptor:
    """How to reach one tool server."""

    transport: str  # "subprocess-stdio" | "tcp"
    argv: tuple[str, ...] = ()
    host: str = ""
    port: int = 0
    cwd: str | None = None

    def __post_init__(self) -> None:
        if self.transport == "subprocess-stdio":
            if not self.argv:
                raise ValueError("subprocess endpoint needs argv")
        elif self.transport == "tcp":
            if not self.host or not self.port:
                raise ValueError("tcp endpoint needs host and port")
        else:
            raise ValueError(f"unknown transport {self.transport!r}")

    def probe(self) -> str | None:
        """Return None when reachable, else a human-readable reason."""
        if self.transport == "subprocess-stdio":
            exe = self.argv[0]
            if "/" in exe:
                ok = os.path.isfile(exe) and os.access(exe, os.X_OK)
            else:
                ok = shutil.which(exe) is not None
            return None if ok else f"executable not found: {exe}"
        try:
            with socket.create_connection((self.host, self.port), timeout=2.0):
                return None
        except OSError as exc:
            return f"tcp connect failed: {exc}"


@dataclass
class RegistryEntry:
    schema: ToolSchema
    endpoint: EndpointDescriptor
    server: str
    degraded: bool = False
    degraded_reason: str | None = None


@dataclass
class ToolRegistry:
    entries: dict[str, RegistryEntry] = field(default_factory=dict)

    def schema_lookup(self) -> dict[str, ToolSchema]:
        return {name: e.schema for name, e in self.entries.items()}

    def list_schemas(self) -> list[dict[str, Any]]:
        return [e.schema.to_dict() for e in self.entries.values()]

    def get(self, tool_name: str) -> RegistryEntry | None:
        return self.entries.get(tool_name)


def register_tool(
    schema: ToolSchema,
    endpoint: EndpointDescriptor,
    registry: ToolRegistry,
    server: str | None = None,
) -> ToolRegistry:
    """Add one tool; duplicate names are errors, unreachable endpoints degrade."""
    if schema.tool_name in registry.entries:
        raise DuplicateTool(f"tool {schema.tool_name!r} already registered")
    reason = endpoint.probe()
    registry.entries[schema.tool_name] = RegistryEntry(
        schema=schema,
        endpoint=endpoint,
        server=server or schema.tool_name,
        degraded=reason is not None,
        degraded_reason=reason,
    )
    return registry


def load_manifest(obj: dict[str, Any], substitutions: dict[str, str] | None = None) -> ToolRegistry:
    """Build a registry from a tools-manifest document.

    Manifest shape:
        {"servers": [{"name": ..., "endpoint": {...}, "tools": [schema...]}]}

    argv entries may carry {placeholder} tokens replaced from
    substitutions (e.g. {python}, {policy}, {cwd}).
    """
    subs = substitutions or {}

    def sub(text: str) -> str:
        for key, value in subs.items():
            text = text.replace("{" + key + "}", value)
        return text

    registry = ToolRegistry()
    for server in obj.get("servers", []):
        ep = server["endpoint"]
        if ep.get("transport", "subprocess-stdio") == "subprocess-stdio":
            endpoint = EndpointDescriptor(
                transport="subprocess-stdio",
                argv=tuple(sub(a) for a in ep["argv"]),
                cwd=sub(ep["cwd"]) if ep.get("cwd") else None,
            )
        else:
            endpoint = EndpointDescriptor(transport="tcp", host=ep["host"], port=int(ep["port"]))
        for tool in server.get("tools", []):
            register_tool(ToolSchema.from_dict(tool), endpoint, registry, server=server["name"])
    return registry


# -- live endpoint handles ----------------------------------------------------

class ServerHandle:
    """One live connection to a tool server, request/response over the wire.

    A background thread drains incoming frames into a queue so requests
    can wait with a deadline. On deadline the whole process group is
    killed: a stuck tool must not outlive its budget.
    """

    def __init__(self, name: str, endpoint: EndpointDescriptor):
        self.name = name
        self.endpoint = endpoint
        self._proc: subprocess.Popen | None = None
        self._sock: socket.socket | None = None
        self._rx: queue.Queue[WireMessage | None] = queue.Queue()
        self._reader: threading.Thread | None = None
        self._write_lock = threading.Lock()
        self._counter = 0
        self._started = False

    # -- lifecycle ------------------------------------------------------------

    def start(self) -> None:
        if self._started:
            return
        if self.endpoint.transport == "subprocess-stdio":
            try:
                self._proc = subprocess.Popen(
                    list(self.endpoint.argv),
                    stdin=subprocess.PIPE,
                    stdout=subprocess.PIPE,
                    stderr=subprocess.DEVNULL,
                    cwd=self.endpoint.cwd,
                    start_new_session=True,
                )
            except OSError as exc:
                raise EndpointDown(f"server {self.name}: spawn failed: {exc}") from exc
            self._reader = threading.Thread(target=self._drain_stdio, daemon=True)
        else:
            try:
                self._sock = socket.create_connection((self.endpoint.host, self.endpoint.port), timeout=10.0)
                self._sock.settimeout(None)
            except OSError as exc:
                raise EndpointDown(f"server {self.name}: connect failed: {exc}") from exc
            self._reader = threading.Thread(target=self._drain_tcp, daemon=True)
        self._reader.start()
        self._started = True

    def _drain_stdio(self) -> None:
        assert self._proc is not None and self._proc.stdout is not None
        try:
            while True:
                msg = wire.read_frame_stdio(self._proc.stdout)
                if msg is None:
                    break
                self._rx.put(msg)
        except Exception:
            pass
        self._rx.put(None)  # EOF marker

    def _drain_tcp(self) -> None:
        assert self._sock is not None
        fp = self._sock.makefile("rb")
        try:
            while True:
                msg = wire.read_frame_tcp(fp)
                if msg is None:
                    break
                self._rx.put(msg)
        except Exception:
            pass
        self._rx.put(None)

    def alive(self) -> bool:
        if not self._started:
            return False
        if self._proc is not None:
            return self._proc.poll() is None
        return self._sock is not None

    def kill(self) -> None:
        """Terminate the server and its whole process group."""
        if self._proc is not None:
            try:
                os.killpg(os.getpgid(self._proc.pid), signal.SIGKILL)
            except (ProcessLookupError, PermissionError):
                pass
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                pass
        if self._sock is not None:
            try:
                self._sock.close()
            except OSError:
                pass
            self._sock = None
        self._started = False

    def close(self) -> None:
        """Polite shutdown: close stdin so the server's read loop ends."""
        if self._proc is not None and self._proc.poll() is None:
            try:
                assert self._proc.stdin is not None
                self._proc.stdin.close()
            except (OSError, ValueError):
                pass
            try:
                self._proc.wait(timeout=2)
            except subprocess.TimeoutExpired:
                self.kill()
                return
        if self._sock is not None:
            try:
                self._sock.close()
            except OSError:
                pass
            self._sock = None
        self._started = False

    # -- request/response -----------------------------------------------------

    def _send(self, msg: WireMessage) -> None:
        with self._write_lock:
            if self.endpoint.transport == "subprocess-stdio":
                if self._proc is None or self._proc.stdin is None or self._proc.poll() is not None:
                    raise EndpointDown(f"server {self.name} is not running")
                try:
                    wire.write_frame_stdio(self._proc.stdin, msg)
                except (OSError, ValueError, BrokenPipeError) as exc:
                    raise EndpointDown(f"server {self.name}: write failed: {exc}") from exc
            else:
                if self._sock is None:
                    raise EndpointDown(f"server {self.name} is not connected")
                try:
                    wire.write_frame_tcp(self._sock.makefile("wb"), msg)
                except OSError as exc:
                    raise EndpointDown(f"server {self.name}: write failed: {exc}") from exc

    def request(self, method: str, payload: Any, deadline_s: float) -> WireMessage:
        """Send one request and wait for its response or error-response.

        Raises ToolTimeout after killing the server process group when
        the deadline expires; EndpointDown when the server dies first.
        """
        if not self._started:
            self.start()
        self._counter += 1
        req_id = f"q{self._counter:06d}"
        self._send(wire.request(req_id, method, payload))
        deadline = time.monotonic() + deadline_s
        while True:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                self.kill()
                raise ToolTimeout(f"server {self.name}: no response to {method} within {deadline_s:.1f}s")
            try:
                msg = self._rx.get(timeout=min(remaining, 0.5))
            except queue.Empty:
                continue
            if msg is None:
                raise EndpointDown(f"server {self.name} closed the connection")
            if msg.kind in (wire.KIND_RESPONSE, wire.KIND_ERROR_RESPONSE) and msg.id == req_id:
                return msg
            # Notifications and stale responses are drained silently.


class HandlePool:
    """Shared live handles, one per server name."""

    def __init__(self) -> None:
        self._handles: dict[str, ServerHandle] = {}

    def get(self, name: str, endpoint: EndpointDescriptor) -> ServerHandle:
        handle = self._handles.get(name)
        if handle is None or not handle.alive():
            if handle is not None:
                handle.kill()
            handle = ServerHandle(name, endpoint)
            self._handles[name] = handle
        return handle

    def close_all(self) -> None:
        for handle in self._handles.values():
            handle.close()
        self._handles.clear()

    def kill_all(self) -> None:
        for handle in self._handles.values():
            handle.kill()
        self._handles.clear()


def new_session_id() -> str:
    return uuid.uuid4().hex[:12]
