"""Solver tool-server process entry point (console script: symexec-server).

    symexec-server --stdio --policy policy.json

Speaks the wire protocol on stdio: tools/list describes the two solve
tools, tools/call runs one. Success is a response whose payload is
{"call_id", "result"}; every refusal is an error-response carrying a
rejection document, so clients handle exactly two shapes.

The gateway validated parameter types and scope before forwarding, but
the binary is re-checked against the policy here (defense in depth).
Calls are handled one at a time and each builds a fresh engine, so no
solver state leaks between requests.
"""

from __future__ import annotations

import argparse
import json
import sys
import traceback
from typing import Any

from symexec import engine, wire
from symexec.engine import DEFAULT_STDIN_CAP, DEFAULT_TIME_BUDGET_S, AddressOutOfRange, SolveRequest
from symexec.elf import LoadFailure
from symexec.machine import EmulationError
from symexec.schemas import SERVER_NAME, tool_schemas

DEFAULT_TIME_BUDGET_MS = int(DEFAULT_TIME_BUDGET_S * 1000)


class Rejection(dict):
    """Marker type for refusal payloads shaped as rejection documents."""


def _reject(call_id: str, param: str, constraint: str, offered: Any, hint: str) -> Rejection:
    return Rejection(
        call_id=call_id,
        violations=[{"param": param, "constraint": constraint, "offered": offered}],
        hint=hint,
    )


def load_allowed_binaries(path: str | None) -> frozenset[str]:
    """Absolute binary paths the policy file allow-lists; empty set without one."""
    if path is None:
        return frozenset()
    with open(path, "r", encoding="utf-8") as fp:
        obj = json.load(fp)
    if not isinstance(obj, dict):
        raise ValueError(f"policy file {path} is not a JSON object")
    return frozenset(obj.get("allowed_binaries", []))


class SolveServer:
    """The two solve tools behind one policy."""

    def __init__(self, allowed_binaries: frozenset[str]):
        self.allowed_binaries = allowed_binaries
        self.schemas = {doc["tool_name"]: doc for doc in tool_schemas()}

    # -- dispatch ---------------------------------------------------------------

    def handle_call(self, call_id: str, tool: str, arguments: dict[str, Any]) -> Any | Rejection:
        if tool not in self.schemas:
            return _reject(call_id, "(call)", f"a tool hosted by the {SERVER_NAME} server", tool,
                           f"this server hosts: {', '.join(self.schemas)}")
        binary = arguments.get("binary")
        if binary not in self.allowed_binaries:
            return _reject(call_id, "binary", "binary on the engagement allow-list", binary,
                           f"binary {binary!r} is not on the engagement allow-list")
        try:
            if tool == "solve_path":
                request = self._parse_request(arguments, mode=engine.MODE_PATH)
            else:
                request = self._parse_request(arguments, mode=engine.MODE_OUTPUT)
            return _result_document(engine.solve(request))
        except LoadFailure as exc:
            return _reject(call_id, "binary", "a loadable ELF64 executable", binary, str(exc))
        except AddressOutOfRange as exc:
            return _reject(call_id, "target_addr", "an address inside the binary's mapped range",
                           arguments.get("target_addr"), str(exc))
        except (EmulationError, engine.VerificationFailed) as exc:
            return _reject(call_id, "(call)", "tool execution to succeed", tool, str(exc))

    def _parse_request(self, a: dict[str, Any], mode: str) -> SolveRequest:
        expected = None
        if mode == engine.MODE_OUTPUT:
            expected = bytes.fromhex(a["expected_output"])
        target = int(a["target_addr"], 16) if mode == engine.MODE_PATH else None
        return SolveRequest(
            binary=a["binary"],
            mode=mode,
            target_addr=target,
            avoid_addrs=tuple(int(addr, 16) for addr in a.get("avoid_addrs", [])),
            expected_output=expected,
            stdin_length_cap=a.get("stdin_length_cap", DEFAULT_STDIN_CAP),
            time_budget_s=a.get("time_budget_ms", DEFAULT_TIME_BUDGET_MS) / 1000.0,
        )


def _result_document(outcome: engine.SolveOutcome) -> dict[str, Any]:
    doc: dict[str, Any] = {
        "status": outcome.status,
        "constraints_summary": outcome.constraints_summary,
    }
    if outcome.stdin is not None:
        doc["stdin"] = outcome.stdin.hex()
        if all(32 <= byte < 127 for byte in outcome.stdin):
            doc["stdin_text"] = outcome.stdin.decode("ascii")
    return doc


def serve_stdio(server: SolveServer, stdin=None, stdout=None) -> None:
    """Run the request loop until EOF on stdin."""
    fin = stdin if stdin is not None else sys.stdin.buffer
    fout = stdout if stdout is not None else sys.stdout.buffer
    while True:
        try:
            msg = wire.read_frame(fin)
        except wire.WireError:
            continue  # unparseable frame: nothing to respond to
        if msg is None:
            break
        if msg.kind != wire.KIND_REQUEST:
            continue
        if msg.method == wire.METHOD_TOOLS_LIST:
            wire.write_frame(fout, wire.KIND_RESPONSE, id=msg.id,
                             method=wire.METHOD_TOOLS_RESULT,
                             payload={"tools": list(server.schemas.values())})
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
                wire.write_frame(fout, wire.KIND_ERROR_RESPONSE, id=msg.id,
                                 method=wire.METHOD_TOOLS_REJECT, payload=dict(outcome))
            else:
                wire.write_frame(fout, wire.KIND_RESPONSE, id=msg.id,
                                 method=wire.METHOD_TOOLS_RESULT,
                                 payload={"call_id": call_id, "result": outcome})
            continue
        # Unknown method: structured refusal keyed to the request id.
        refusal = _reject(msg.id or "", "(call)", "a supported method", msg.method,
                          "supported methods: tools/list, tools/call")
        wire.write_frame(fout, wire.KIND_ERROR_RESPONSE, id=msg.id,
                         method=wire.METHOD_TOOLS_REJECT, payload=dict(refusal))


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description="symbolic-execution solve server")
    parser.add_argument("--stdio", action="store_true",
                        help="serve the wire protocol on stdio (the only transport)")
    parser.add_argument("--policy", default=None,
                        help="policy file (JSON); without one no binary is allow-listed")
    args = parser.parse_args(argv)
    if not args.stdio:
        parser.error("pass --stdio: this server only speaks the stdio transport")
    server = SolveServer(load_allowed_binaries(args.policy))
    serve_stdio(server)
    return 0


if __name__ == "__main__":
    sys.exit(main())
