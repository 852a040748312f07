"""The solver mounted behind the real gateway, end to end.

Only published surfaces are touched: the tools-manifest file format,
the gateway console script, and the wire protocol over stdio. Every
reply line is decoded by the strict envelope codec, and every solved
stdin is re-verified by actually running the target binary.
"""

import json
import shutil
import subprocess
import sys
import time

import pytest

from symexec.schemas import tool_schemas
from symexec.wire import Frame, decode_line

GOOD = b"Good Job.\n"

pytestmark = pytest.mark.skipif(shutil.which("ctf-gateway") is None,
                                reason="gateway console script not installed")


@pytest.fixture(scope="session")
def mount_files(binaries, tmp_path_factory):
    """policy.json allow-listing the fixtures, plus the generated manifest."""
    root = tmp_path_factory.mktemp("mount")
    policy = root / "policy.json"
    policy.write_text(json.dumps({
        "allowed_cidrs": [],
        "allowed_binaries": [str(p) for p in binaries.values()],
        "max_wall_time_seconds": 120,
    }))
    generated = subprocess.run([sys.executable, "-m", "symexec.manifest"],
                               stdout=subprocess.PIPE, check=True)
    tools = root / "tools.json"
    tools.write_bytes(generated.stdout)
    return policy, tools


def _frame_bytes(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode() + b"\n"


def _call(rid, tool, arguments):
    return {"v": "1", "kind": "request", "id": rid, "method": "tools/call",
            "payload": {"call_id": rid, "tool": tool, "arguments": arguments}}


def run_gateway(messages, mount_files, trace_dir, timeout=150) -> list[Frame]:
    policy, tools = mount_files
    argv = ["ctf-gateway", "--policy", str(policy), "--tools", str(tools),
            "--trace", str(trace_dir / "trace.jsonl"), "--listen", "stdio"]
    stdin = b"".join(_frame_bytes(m) for m in messages)
    proc = subprocess.run(argv, input=stdin, stdout=subprocess.PIPE, timeout=timeout)
    # decode_line enforces the envelope contract on every reply
    return [decode_line(line) for line in proc.stdout.splitlines()]


def test_both_tools_listed_through_gateway(mount_files, tmp_path):
    replies = run_gateway([
        {"v": "1", "kind": "request", "id": "r1", "method": "tools/list", "payload": None},
    ], mount_files, tmp_path)
    assert len(replies) == 1
    frame = replies[0]
    assert frame.kind == "response" and frame.method == "tools/result"
    by_name = {t["tool_name"]: t for t in frame.payload["tools"]}
    expected = {t["tool_name"]: t for t in tool_schemas()}
    assert by_name == expected


def test_crackme_solved_and_reverified_within_budget(crackme, mount_files, tmp_path):
    started = time.monotonic()
    replies = run_gateway([
        _call("r1", "solve_by_output",
              {"binary": str(crackme), "expected_output": GOOD.hex()}),
    ], mount_files, tmp_path)
    elapsed = time.monotonic() - started
    assert elapsed < 120

    frame = replies[0]
    assert frame.kind == "response" and frame.method == "tools/result"
    assert frame.id == "r1" and frame.payload["call_id"] == "r1"
    result = frame.payload["result"]
    assert result["status"] == "sat"

    stdin = bytes.fromhex(result["stdin"])
    run = subprocess.run([str(crackme)], input=stdin,
                         stdout=subprocess.PIPE, timeout=10)
    assert run.stdout == GOOD
    assert run.returncode == 0
    assert result["stdin_text"] == stdin.decode("ascii")


def test_dead_branch_reports_unsat(deadbranch, deadbranch_program, mount_files, tmp_path):
    reward = deadbranch_program.symbol_addr("unreachable_reward")
    replies = run_gateway([
        _call("r1", "solve_path",
              {"binary": str(deadbranch), "target_addr": f"{reward:#x}"}),
    ], mount_files, tmp_path)
    frame = replies[0]
    assert frame.kind == "response" and frame.method == "tools/result"
    result = frame.payload["result"]
    assert result["status"] == "unsat"
    assert "stdin" not in result


def test_malformed_address_stops_at_the_gateway(crackme, mount_files, tmp_path):
    replies = run_gateway([
        _call("r1", "solve_path", {"binary": str(crackme), "target_addr": "0xZZ"}),
    ], mount_files, tmp_path)
    frame = replies[0]
    assert frame.kind == "error-response" and frame.method == "tools/reject"
    assert frame.payload["violations"] == [{
        "param": "target_addr",
        "constraint": "string matching 0x[0-9a-fA-F]+",
        "offered": "0xZZ",
    }]
    assert frame.payload["hint"] == (
        "target_addr: expected string matching 0x[0-9a-fA-F]+, got '0xZZ'")


def test_off_list_binary_rejected_before_dispatch(mount_files, tmp_path):
    replies = run_gateway([
        _call("r1", "solve_by_output",
              {"binary": "/bin/ls", "expected_output": "41"}),
    ], mount_files, tmp_path)
    frame = replies[0]
    assert frame.kind == "error-response"
    violation = frame.payload["violations"][0]
    assert violation["param"] == "binary"
    assert violation["constraint"] == "binary on the engagement allow-list"


def test_unknown_tool_rejected_at_the_registry(mount_files, tmp_path):
    replies = run_gateway([
        _call("r1", "patch_binary", {"binary": "/bin/ls"}),
    ], mount_files, tmp_path)
    frame = replies[0]
    assert frame.kind == "error-response"
    assert frame.payload["violations"][0]["constraint"] == "a registered tool name"


def test_mixed_batch_round_trips_in_order(crackme, deadbranch, deadbranch_program,
                                          mount_files, tmp_path):
    reward = deadbranch_program.symbol_addr("unreachable_reward")
    replies = run_gateway([
        _call("r1", "solve_by_output",
              {"binary": str(crackme), "expected_output": GOOD.hex()}),
        _call("r2", "solve_path",
              {"binary": str(deadbranch), "target_addr": f"{reward:#x}"}),
        _call("r3", "solve_path", {"binary": str(crackme), "target_addr": "0xZZ"}),
    ], mount_files, tmp_path)
    assert [f.id for f in replies] == ["r1", "r2", "r3"]
    assert [f.kind for f in replies] == ["response", "response", "error-response"]
    assert replies[0].payload["result"]["status"] == "sat"
    assert replies[1].payload["result"]["status"] == "unsat"
