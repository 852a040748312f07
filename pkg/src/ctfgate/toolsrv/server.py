"""Tool-server process entry point.

    python -m ctfgate.toolsrv.server --server commands --policy policy.json

Speaks the wire protocol on stdio: tools/list describes this server's
tools, tools/call executes one. Success is a response whose payload is
{"call_id", "result"}; every refusal (scope re-check, bad session
state, capability stubs, tool-level failures) is an error-response
whose payload is a rejection document, so clients handle exactly two
shapes.

The server trusts nothing: the gateway validated types and scope, but
commands are re-checked against the policy here (defense in depth).
"""

from __future__ import annotations

import argparse
import sys
import traceback
from typing import Any

from ctfgate.errors import (
    ArenaWalkFailure,
    CommandTimeout,
    GateError,
    ScopeViolation,
    SessionNotStopped,
    SpawnFailure,
    UnreadableArtifact,
)
from ctfgate.gateway.policy import ScopePolicy, load_policy, make_policy
from ctfgate.protocol import wire
from ctfgate.protocol.schema import Rejection, Violation
from ctfgate.toolsrv import catalog, debug, mi, recon, runner, triage, xrefs


def _reject(call_id: str, param: str, constraint: str, offered: Any, hint: str) -> Rejection:
    return Rejection(
        call_id=call_id,
        violations=(Violation(param=param, constraint=constraint, offered=offered),),
        hint=hint,
    )


class ToolServer:
    """One server's handlers plus its mutable session state."""

    def __init__(self, name: str, policy: ScopePolicy, cwd: str | None = None):
        if name not in catalog.SERVER_SCHEMAS:
            raise ValueError(f"unknown server {name!r}")
        self.name = name
        self.policy = policy
        self.cwd = cwd
        self.gdb: debug.GdbSession | None = None
        self.schemas = {s.tool_name: s for s in catalog.schemas_for(name)}

    # -- dispatch ---------------------------------------------------------------

    def handle_call(self, call_id: str, tool: str, arguments: dict[str, Any]) -> Any | Rejection:
        if tool not in self.schemas:
            return _reject(call_id, "(call)", f"a tool hosted by the {self.name} server", tool,
                           f"this server hosts: {', '.join(self.schemas)}")
        handler = getattr(self, "_tool_" + tool, None)
        assert handler is not None, f"no handler for {tool}"
        try:
            return handler(call_id, arguments)
        except ScopeViolation as exc:
            return _reject(call_id, "binary", "binary on the engagement allow-list",
                           arguments.get("binary"), str(exc))
        except SessionNotStopped as exc:
            return _reject(call_id, "(session)", "a stopped debuggee", None, str(exc))
        except ArenaWalkFailure as exc:
            return _reject(call_id, "(session)", "a walkable allocation arena", None, str(exc))
        except UnreadableArtifact as exc:
            return _reject(call_id, "artifact", "a readable artifact path or URL",
                           arguments.get("artifact"), str(exc))
        except CommandTimeout as exc:
            return _reject(call_id, "timeout_s", "completion within the command timeout",
                           arguments.get("timeout_s"), str(exc))
        except SpawnFailure as exc:
            return _reject(call_id, "binary", "a startable executable",
                           arguments.get("binary"), str(exc))
        except GateError as exc:
            return _reject(call_id, "(call)", "tool execution to succeed", tool, str(exc))

    # -- commands server ----------------------------------------------------------

    def _tool_run_command(self, call_id: str, a: dict[str, Any]) -> dict:
        spec = runner.CommandSpec(
            binary=a["binary"],
            args=tuple(a.get("args", [])),
            stdin=a["stdin"].encode("utf-8") if a.get("stdin") is not None else None,
            timeout=float(a.get("timeout_s", runner.DEFAULT_TIMEOUT_S)),
        )
        return runner.run_command(spec, self.policy, cwd=self.cwd).to_dict()

    # -- debug server ---------------------------------------------------------------

    def _require_gdb(self, call_id: str) -> debug.GdbSession:
        if self.gdb is None:
            raise SessionNotStopped("no debug session; call debug_launch first")
        return self.gdb

    def _tool_debug_launch(self, call_id: str, a: dict[str, Any]) -> dict:
        if not self.policy.permits_binary(a["binary"]):
            raise ScopeViolation(f"binary {a['binary']!r} is not on the engagement allow-list")
        if self.gdb is not None:
            self.gdb.close()
        self.gdb = debug.GdbSession(a["binary"])
        return {"launched": a["binary"]}

    def _tool_debug_break(self, call_id: str, a: dict[str, Any]) -> dict:
        rec = self._require_gdb(call_id).break_insert(a["location"])
        simplified = mi.simplify_tree(rec.fields)
        return {"breakpoint": simplified.get("bkpt", simplified)}

    def _tool_debug_run(self, call_id: str, a: dict[str, Any]) -> dict:
        session = self._require_gdb(call_id)
        session.run(wait_stop=True)
        return {"stopped": session.stopped}

    def _tool_debug_continue(self, call_id: str, a: dict[str, Any]) -> dict:
        session = self._require_gdb(call_id)
        session.cont(wait_stop=True)
        return {"stopped": session.stopped}

    def _tool_debug_evaluate(self, call_id: str, a: dict[str, Any]) -> dict:
        return {"value": self._require_gdb(call_id).evaluate(a["expression"])}

    def _tool_read_memory(self, call_id: str, a: dict[str, Any]) -> dict:
        session = self._require_gdb(call_id)
        if not session.stopped:
            raise SessionNotStopped("debuggee must be stopped to read memory")
        data = session.read_memory(int(a["addr"], 16), a["count"])
        return {"addr": a["addr"], "hex": data.hex()}

    def _tool_inspect_heap(self, call_id: str, a: dict[str, Any]) -> dict:
        report = debug.inspect_heap(a["count"], self._require_gdb(call_id))
        return report.to_dict()

    def _tool_debug_quit(self, call_id: str, a: dict[str, Any]) -> dict:
        if self.gdb is not None:
            self.gdb.close()
            self.gdb = None
        return {"closed": True}

    # -- recon server -----------------------------------------------------------------

    def _tool_port_scan(self, call_id: str, a: dict[str, Any]) -> dict:
        return recon.port_scan(a["host"], a["ports"]).to_dict()

    def _tool_parse_scan_xml(self, call_id: str, a: dict[str, Any]) -> dict:
        return recon.parse_scan_report(a["xml"]).to_dict()

    def _tool_http_fetch(self, call_id: str, a: dict[str, Any]) -> dict:
        try:
            return recon.http_fetch(a["host"], a["port"], a["path"])
        except OSError as exc:
            raise GateError(f"http fetch failed: {exc}") from exc

    # -- triage server ------------------------------------------------------------------

    def _tool_triage_classify(self, call_id: str, a: dict[str, Any]) -> dict:
        return triage.triage_classify(a["artifact"], dynamic=a.get("dynamic", False)).to_dict()

    # -- analysis server -----------------------------------------------------------------

    def _tool_get_xrefs(self, call_id: str, a: dict[str, Any]) -> Rejection:
        return xrefs.get_xrefs(a["func_name"], call_id)

    def close(self) -> None:
        if self.gdb is not None:
            self.gdb.close()
            self.gdb = None


def serve_stdio(server: ToolServer, stdin=None, stdout=None) -> None:
    """Run the request loop until EOF on stdin."""
    fin = stdin if stdin is not None else sys.stdin.buffer
    fout = stdout if stdout is not None else sys.stdout.buffer
    while True:
        try:
            msg = wire.read_frame_stdio(fin)
        except GateError:
            continue  # unparseable frame: nothing to respond to
        if msg is None:
            break
        if msg.kind != wire.KIND_REQUEST:
            continue
        if msg.method == wire.METHOD_TOOLS_LIST:
            payload = {"tools": [s.to_dict() for s in server.schemas.values()]}
            wire.write_frame_stdio(fout, wire.response(msg.id, payload, method=wire.METHOD_TOOLS_RESULT))
            continue
        if msg.method == wire.METHOD_TOOLS_CALL and isinstance(msg.payload, dict):
            call_id = str(msg.payload.get("call_id", msg.id))
            tool = str(msg.payload.get("tool", ""))
            arguments = msg.payload.get("arguments") or {}
            try:
                outcome = server.handle_call(call_id, tool, arguments)
            except Exception:
                outcome = _reject(call_id, "(call)", "tool execution to succeed", tool,
                                  "internal error: " + traceback.format_exc(limit=1).strip())
            if isinstance(outcome, Rejection):
                wire.write_frame_stdio(
                    fout, wire.error_response(msg.id, outcome.to_dict(), method=wire.METHOD_TOOLS_REJECT))
            else:
                wire.write_frame_stdio(
                    fout,
                    wire.response(msg.id, {"call_id": call_id, "result": outcome},
                                  method=wire.METHOD_TOOLS_RESULT))
            continue
        # Unknown method: structured refusal keyed to the request id.
        refusal = _reject(msg.id, "(call)", "a supported method", msg.method,
                          "supported methods: tools/list, tools/call")
        wire.write_frame_stdio(fout, wire.error_response(msg.id, refusal.to_dict(),
                                                         method=wire.METHOD_TOOLS_REJECT))


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description="ctfgate native tool server")
    parser.add_argument("--server", required=True, choices=catalog.server_names())
    parser.add_argument("--policy", default=None, help="policy file (JSON)")
    parser.add_argument("--cwd", default=None, help="sandbox working directory for commands")
    args = parser.parse_args(argv)
    policy = load_policy(args.policy) if args.policy else make_policy()
    server = ToolServer(args.server, policy, cwd=args.cwd or None)
    try:
        serve_stdio(server)
    finally:
        server.close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
