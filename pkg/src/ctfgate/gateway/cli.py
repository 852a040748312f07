"""Gateway process entry point (console script: ctf-gateway).

Serves the wire protocol to one client over stdio or TCP, gating every
tools/call through schema validation and scope enforcement before any
tool server is contacted. Valid calls come back as responses carrying
the tool's structured result; invalid ones as error-responses carrying
a rejection document.

    ctf-gateway --policy policy.json --trace trace.jsonl \
                --listen stdio --tools tools.json
"""

from __future__ import annotations

import argparse
import json
import socket
import sys
from pathlib import Path

from ctfgate.errors import EndpointDown, GateError, ToolTimeout
from ctfgate.gateway.dispatch import Gateway, ToolResult
from ctfgate.gateway.policy import load_policy
from ctfgate.gateway.registry import load_manifest, new_session_id
from ctfgate.gateway.trace import TraceWriter
from ctfgate.protocol import wire
from ctfgate.protocol.schema import ToolCall
from ctfgate.toolsrv import catalog


def default_substitutions(policy_path: str, cwd: str | None = None) -> dict[str, str]:
    return {"python": sys.executable, "policy": policy_path, "cwd": cwd or ""}


def load_tools_manifest(path: str | Path, policy_path: str, cwd: str | None = None):
    with open(path, "r", encoding="utf-8") as fp:
        doc = json.load(fp)
    return load_manifest(doc, default_substitutions(policy_path, cwd))


def _serve(gateway: Gateway, read_frame, write_frame) -> None:
    while True:
        try:
            msg = read_frame()
        except GateError:
            continue
        if msg is None:
            break
        if msg.kind != wire.KIND_REQUEST:
            continue
        if msg.method == wire.METHOD_TOOLS_LIST:
            write_frame(wire.response(msg.id, {"tools": gateway.tools_list()},
                                      method=wire.METHOD_TOOLS_RESULT))
            continue
        if msg.method == wire.METHOD_TOOLS_CALL and isinstance(msg.payload, dict):
            call = ToolCall(
                call_id=str(msg.payload.get("call_id", msg.id)),
                tool_name=str(msg.payload.get("tool", "")),
                arguments=msg.payload.get("arguments") or {},
            )
            try:
                outcome = gateway.dispatch(call)
            except (ToolTimeout, EndpointDown) as exc:
                payload = {
                    "call_id": call.call_id,
                    "violations": [],
                    "hint": f"execution failed: {exc}",
                }
                write_frame(wire.error_response(msg.id, payload, method=wire.METHOD_TOOLS_REJECT))
                continue
            if isinstance(outcome, ToolResult):
                write_frame(wire.response(
                    msg.id, {"call_id": call.call_id, "result": outcome.payload},
                    method=wire.METHOD_TOOLS_RESULT))
            else:
                write_frame(wire.error_response(msg.id, outcome.to_dict(),
                                                method=wire.METHOD_TOOLS_REJECT))
            continue
        write_frame(wire.error_response(
            msg.id,
            {"call_id": msg.id, "violations": [], "hint": "supported: tools/list, tools/call"},
            method=wire.METHOD_TOOLS_REJECT))


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description="validation-gated tool gateway")
    parser.add_argument("--policy", required=True, help="scope policy file (JSON)")
    parser.add_argument("--trace", required=True, help="append-only trace file (JSONL)")
    parser.add_argument("--listen", default="stdio", help="stdio or tcp:HOST:PORT")
    parser.add_argument("--tools", default=None,
                        help="tools manifest (JSON); default: the native catalog")
    parser.add_argument("--cwd", default=None, help="sandbox working directory for tools")
    args = parser.parse_args(argv)

    policy = load_policy(args.policy)
    if args.tools:
        registry = load_tools_manifest(args.tools, args.policy, args.cwd)
    else:
        registry = load_manifest(catalog.build_manifest(),
                                 default_substitutions(args.policy, args.cwd))

    with TraceWriter(args.trace, session=new_session_id()) as trace:
        gateway = Gateway(registry, policy, trace)
        try:
            if args.listen == "stdio":
                fin, fout = sys.stdin.buffer, sys.stdout.buffer
                _serve(gateway,
                       lambda: wire.read_frame_stdio(fin),
                       lambda m: wire.write_frame_stdio(fout, m))
            elif args.listen.startswith("tcp:"):
                _, host, port = args.listen.split(":", 2)
                with socket.create_server((host, int(port))) as server_sock:
                    conn, _addr = server_sock.accept()
                    with conn:
                        fp_in = conn.makefile("rb")
                        fp_out = conn.makefile("wb")
                        _serve(gateway,
                               lambda: wire.read_frame_tcp(fp_in),
                               lambda m: wire.write_frame_tcp(fp_out, m))
            else:
                parser.error(f"bad --listen value: {args.listen}")
        finally:
            gateway.close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
