"""Reasoner boundary: scripted replay, remote client, isolation."""

import builtins
import json
import os
import socket
import subprocess
import threading

import pytest

from ctfgate.errors import RateLimited, ReasonerFailure, ScriptDesync, ScriptExhausted
from ctfgate.protocol.schema import ToolCall
from ctfgate.reasoner import remote as remote_mod
from ctfgate.reasoner.base import CandidateSet, ReasonerRequest
from ctfgate.reasoner.remote import RemoteReasoner, render_request
from ctfgate.reasoner.scripted import ScriptedReasoner, load_scenario
from ctfgate.toolsrv.catalog import all_schemas

CATALOG = tuple(s.to_dict() for s in all_schemas().values())


def make_request(**kwargs):
    defaults = dict(objective="Find the flag", tool_catalog=CATALOG)
    defaults.update(kwargs)
    return ReasonerRequest(**defaults)


# -- request/candidate invariants -------------------------------------------------

def test_request_requires_objective_and_catalog():
    with pytest.raises(ValueError):
        ReasonerRequest(objective="", tool_catalog=CATALOG)
    with pytest.raises(ValueError):
        ReasonerRequest(objective="x", tool_catalog=())


def test_request_size_budget_enforced():
    huge = tuple({"blob": "y" * 1000} for _ in range(300))
    with pytest.raises(ValueError):
        make_request(history=huge)


def test_candidate_set_invariants():
    call = ToolCall("c1", "port_scan", {})
    with pytest.raises(ValueError):
        CandidateSet(candidates=())
    with pytest.raises(ValueError):
        CandidateSet(candidates=((call, -0.5),))
    with pytest.raises(ValueError):
        CandidateSet(candidates=((call, 0.0), (call, 0.0)))
    ok = CandidateSet(candidates=((call, 0.0), (call, 1.0)))
    assert len(ok.calls()) == 2


# -- scripted replay ---------------------------------------------------------------

SCENARIO = {
    "version": 1,
    "name": "two-step fixture",
    "plans": [["scan the host", "probe the service"], ["read the banner"]],
    "steps": [
        {
            "candidates": [
                {"tool": "port_scan", "arguments": {"host": "10.0.0.5", "ports": [22, 80]}},
                {"tool": "http_fetch", "arguments": {"host": "10.0.0.5", "port": 80, "path": "/"}},
            ],
            "rationale": "map the surface first",
        },
        {
            "guards": {"has_rejection": True, "rejection_param": "port"},
            "candidates": [
                {"tool": "port_scan", "arguments": {"host": "10.0.0.5", "ports": [80]}, "weight": 2.0},
            ],
        },
    ],
}


def test_scripted_replays_verbatim_in_order():
    reasoner = ScriptedReasoner(SCENARIO)
    first = reasoner.next_candidates(make_request())
    assert [c.tool_name for c in first.calls()] == ["port_scan", "http_fetch"]
    assert first.rationale == "map the surface first"
    # rank weights: no explicit weight -> 1/rank
    assert [w for _, w in first.candidates] == [1.0, 0.5]
    # deterministic call ids derived from the step position
    assert [c.call_id for c in first.calls()] == ["step-0000-c01", "step-0000-c02"]


def test_scripted_is_deterministic_across_instances():
    take = lambda: [
        (c.call_id, c.tool_name, w)
        for c, w in ScriptedReasoner(SCENARIO).next_candidates(make_request()).candidates
    ]
    assert take() == take()


def test_guard_mismatch_is_desync_naming_the_field():
    reasoner = ScriptedReasoner(SCENARIO)
    reasoner.next_candidates(make_request())
    with pytest.raises(ScriptDesync) as exc_info:
        reasoner.next_candidates(make_request())  # no rejection present
    assert exc_info.value.field == "last_rejection"


def test_guard_match_consumes_the_step():
    reasoner = ScriptedReasoner(SCENARIO)
    reasoner.next_candidates(make_request())
    rejection = {"call_id": "x", "violations": [{"param": "port", "constraint": "", "offered": 0}],
                 "hint": ""}
    out = reasoner.next_candidates(make_request(last_rejection=rejection))
    assert [w for _, w in out.candidates] == [2.0]


def test_exhaustion_is_an_error():
    reasoner = ScriptedReasoner({"version": 1, "steps": [SCENARIO["steps"][0]]})
    reasoner.next_candidates(make_request())
    with pytest.raises(ScriptExhausted):
        reasoner.next_candidates(make_request())


def test_plans_consumed_in_order_then_empty():
    reasoner = ScriptedReasoner(SCENARIO)
    assert reasoner.propose_plan(make_request()).tasks == ["scan the host", "probe the service"]
    assert reasoner.propose_plan(make_request()).tasks == ["read the banner"]
    assert reasoner.propose_plan(make_request()).tasks == []  # exhausted, not an error


def test_cursor_round_trip():
    reasoner = ScriptedReasoner(SCENARIO)
    reasoner.propose_plan(make_request())
    reasoner.next_candidates(make_request())
    cursor = reasoner.cursor()
    fresh = ScriptedReasoner(SCENARIO)
    fresh.seek(cursor)
    assert fresh.cursor() == cursor
    assert fresh.steps_remaining == reasoner.steps_remaining


def test_load_scenario_rejects_malformed(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"version": 1, "steps": [{"candidates": []}]}))
    with pytest.raises(ValueError):
        load_scenario(bad)
    bad.write_text(json.dumps({"version": 7, "steps": []}))
    with pytest.raises(ValueError):
        load_scenario(bad)


def test_scripted_reasoner_has_no_side_effects(monkeypatch):
    """Emission only: no sockets, no processes, no file writes."""

    def forbidden(*args, **kwargs):
        raise AssertionError("reasoner touched the sandbox")

    real_open = builtins.open

    def guarded_open(file, mode="r", *args, **kwargs):
        if any(flag in mode for flag in "wax+"):
            raise AssertionError("reasoner opened a file for writing")
        return real_open(file, mode, *args, **kwargs)

    monkeypatch.setattr(socket, "socket", forbidden)
    monkeypatch.setattr(subprocess, "Popen", forbidden)
    monkeypatch.setattr(os, "fork", forbidden, raising=False)
    monkeypatch.setattr(builtins, "open", guarded_open)

    reasoner = ScriptedReasoner(SCENARIO)
    reasoner.propose_plan(make_request())
    out = reasoner.next_candidates(make_request())
    assert len(out.calls()) == 2


# -- remote client -----------------------------------------------------------------

class _MockEndpoint:
    """One-thread HTTP endpoint with a scripted list of replies."""

    def __init__(self, replies):
        import http.server

        self.replies = list(replies)
        self.requests = []
        outer = self

        class Handler(http.server.BaseHTTPRequestHandler):
            def do_POST(self):
                length = int(self.headers.get("Content-Length", 0))
                outer.requests.append(json.loads(self.rfile.read(length)))
                status, body = outer.replies.pop(0) if outer.replies else (500, b"")
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            def log_message(self, *args):
                pass

        import http.server as hs

        self.server = hs.HTTPServer(("127.0.0.1", 0), Handler)
        self.url = f"http://127.0.0.1:{self.server.server_address[1]}/reason"
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)
        self.thread.start()

    def close(self):
        self.server.shutdown()
        self.thread.join(timeout=2)


@pytest.fixture()
def fast_backoff(monkeypatch):
    monkeypatch.setattr(remote_mod, "BACKOFF_START_S", 0.01)


def _with_endpoint(replies, action):
    endpoint = _MockEndpoint(replies)
    try:
        return action(RemoteReasoner(endpoint.url, timeout_s=5)), endpoint
    finally:
        endpoint.close()


def test_remote_round_trip_single_candidate(fast_backoff):
    body = json.dumps({
        "candidates": [{"tool": "port_scan", "arguments": {"host": "10.0.0.5", "ports": [80]}}],
        "rationale": "scan first",
    }).encode()
    out, endpoint = _with_endpoint(
        [(200, body)], lambda r: r.next_candidates(make_request())
    )
    assert isinstance(out, CandidateSet)
    assert len(out.calls()) == 1
    assert out.calls()[0].tool_name == "port_scan"
    assert out.rationale == "scan first"
    sent = endpoint.requests[0]
    assert sent["render"] == 1
    assert sent["tools"] == list(CATALOG)


def test_remote_parses_chat_wrapped_reply(fast_backoff):
    inner = json.dumps({"candidates": [{"tool": "http_fetch", "arguments": {}}]})
    body = json.dumps({"content": f"Here is my move:\n{inner}\nGood luck."}).encode()
    out, _ = _with_endpoint([(200, body)], lambda r: r.next_candidates(make_request()))
    assert out.calls()[0].tool_name == "http_fetch"


def test_remote_free_text_is_failure_with_digest(fast_backoff):
    body = json.dumps({"content": "I would try scanning the host for open ports."}).encode()
    endpoint = _MockEndpoint([(200, body)])
    try:
        with pytest.raises(ReasonerFailure) as exc_info:
            RemoteReasoner(endpoint.url, timeout_s=5).next_candidates(make_request())
        assert exc_info.value.reply_digest is not None
        assert len(exc_info.value.reply_digest) == 64
    finally:
        endpoint.close()


def test_remote_accepts_out_of_range_values(fast_backoff):
    # the reasoner is not the validator; bad values pass through here
    body = json.dumps({
        "candidates": [{"tool": "port_scan", "arguments": {"host": "10.0.0.5", "ports": [70000]}}]
    }).encode()
    out, _ = _with_endpoint([(200, body)], lambda r: r.next_candidates(make_request()))
    assert out.calls()[0].arguments["ports"] == [70000]


def test_remote_retries_5xx_then_succeeds(fast_backoff):
    good = json.dumps({"candidates": [{"tool": "debug_run", "arguments": {}}]}).encode()
    out, endpoint = _with_endpoint(
        [(503, b""), (200, good)], lambda r: r.next_candidates(make_request())
    )
    assert out.calls()[0].tool_name == "debug_run"
    assert len(endpoint.requests) == 2


def test_remote_persistent_429_is_rate_limited(fast_backoff):
    endpoint = _MockEndpoint([(429, b"")] * 3)
    try:
        with pytest.raises(RateLimited):
            RemoteReasoner(endpoint.url, timeout_s=5).next_candidates(make_request())
        assert len(endpoint.requests) == 3  # bounded
    finally:
        endpoint.close()


def test_remote_transport_down_is_failure(fast_backoff):
    sock = socket.socket()
    sock.bind(("127.0.0.1", 0))
    port = sock.getsockname()[1]
    sock.close()  # nothing listening here now
    with pytest.raises(ReasonerFailure):
        RemoteReasoner(f"http://127.0.0.1:{port}/", timeout_s=0.5).next_candidates(make_request())


def test_remote_plan_round_trip(fast_backoff):
    body = json.dumps({"plan": ["scan", "probe"], "rationale": "standard opener"}).encode()
    out, _ = _with_endpoint([(200, body)], lambda r: r.propose_plan(make_request()))
    assert out.tasks == ["scan", "probe"]


def test_render_includes_rejection_feedback():
    rejection = {"call_id": "c1", "violations": [{"param": "port"}], "hint": "fix the port"}
    body = render_request(make_request(last_rejection=rejection))
    assert "fix the port" in body["messages"][0]["content"]
    assert body["system"].startswith("Objective: Find the flag")
