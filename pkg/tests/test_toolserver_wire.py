"""End-to-end wire conversation with a real tool-server process."""

import json
import subprocess
import sys

import pytest

from ctfgate.protocol import wire


@pytest.fixture()
def commands_server(tmp_path):
    policy_file = tmp_path / "policy.json"
    policy_file.write_text(json.dumps({
        "allowed_cidrs": ["10.0.0.0/24"],
        "allowed_binaries": ["/bin/echo"],
        "max_wall_time_seconds": 10,
    }))
    proc = subprocess.Popen(
        [sys.executable, "-m", "ctfgate.toolsrv.server",
         "--server", "commands", "--policy", str(policy_file)],
        stdin=subprocess.PIPE,
        stdout=subprocess.PIPE,
        stderr=subprocess.DEVNULL,
    )
    yield proc
    proc.stdin.close()
    proc.wait(timeout=5)


def roundtrip(proc, msg):
    wire.write_frame_stdio(proc.stdin, msg)
    reply = wire.read_frame_stdio(proc.stdout)
    assert reply is not None, "server closed the stream"
    return reply


def test_tools_list_describes_the_catalog(commands_server):
    reply = roundtrip(commands_server, wire.request("r1", wire.METHOD_TOOLS_LIST, {}))
    assert reply.kind == wire.KIND_RESPONSE
    assert reply.id == "r1"
    tools = {t["tool_name"] for t in reply.payload["tools"]}
    assert tools == {"run_command"}
    spec = reply.payload["tools"][0]
    assert any(p["name"] == "binary" for p in spec["params"])


def test_tools_call_success_shape(commands_server):
    reply = roundtrip(commands_server, wire.request("r2", wire.METHOD_TOOLS_CALL, {
        "call_id": "c1",
        "tool": "run_command",
        "arguments": {"binary": "/bin/echo", "args": ["wire", "ok"]},
    }))
    assert reply.kind == wire.KIND_RESPONSE
    assert reply.payload["call_id"] == "c1"
    assert reply.payload["result"]["stdout"] == "wire ok\n"
    assert reply.payload["result"]["exit_code"] == 0


def test_scope_recheck_inside_server(commands_server):
    reply = roundtrip(commands_server, wire.request("r3", wire.METHOD_TOOLS_CALL, {
        "call_id": "c2",
        "tool": "run_command",
        "arguments": {"binary": "/bin/cat"},
    }))
    assert reply.kind == wire.KIND_ERROR_RESPONSE
    assert reply.payload["call_id"] == "c2"
    assert reply.payload["violations"][0]["param"] == "binary"


def test_unknown_tool_is_rejected(commands_server):
    reply = roundtrip(commands_server, wire.request("r4", wire.METHOD_TOOLS_CALL, {
        "call_id": "c3", "tool": "mystery", "arguments": {},
    }))
    assert reply.kind == wire.KIND_ERROR_RESPONSE
    assert reply.payload["violations"][0]["param"] == "(call)"
    assert "run_command" in reply.payload["hint"]


def test_unknown_method_is_rejected(commands_server):
    reply = roundtrip(commands_server, wire.request("r5", "tools/forget", {}))
    assert reply.kind == wire.KIND_ERROR_RESPONSE
    assert "tools/list" in reply.payload["hint"]


def test_garbage_frame_is_skipped_not_fatal(commands_server):
    commands_server.stdin.write(b"this is not json\n")
    commands_server.stdin.flush()
    reply = roundtrip(commands_server, wire.request("r6", wire.METHOD_TOOLS_LIST, {}))
    assert reply.id == "r6"  # the server survived the garbage


def test_analysis_server_xrefs_pivot(tmp_path):
    proc = subprocess.Popen(
        [sys.executable, "-m", "ctfgate.toolsrv.server", "--server", "analysis"],
        stdin=subprocess.PIPE,
        stdout=subprocess.PIPE,
        stderr=subprocess.DEVNULL,
    )
    try:
        reply = roundtrip(proc, wire.request("r1", wire.METHOD_TOOLS_CALL, {
            "call_id": "c1", "tool": "get_xrefs", "arguments": {"func_name": "main"},
        }))
        assert reply.kind == wire.KIND_ERROR_RESPONSE
        assert reply.payload["violations"][0]["param"] == "(capability)"
    finally:
        proc.stdin.close()
        proc.wait(timeout=5)
