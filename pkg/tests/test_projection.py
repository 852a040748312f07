"""Projection properties: normalization, support, argmax invariance, Z=0.

The hand oracle is the two-line renormalization 0.6/0.9 and 0.3/0.9
from a three-candidate set with one invalid member.
"""

import math
import random

import pytest

from ctfgate.errors import EmptyValidSet
from ctfgate.protocol.projection import ActionDistribution, argmax_candidate, project_distribution
from ctfgate.protocol.schema import ParamSpec, ToolCall, ToolSchema

SCHEMAS = {
    "port_scan": ToolSchema(
        tool_name="port_scan",
        description="",
        params=(
            ParamSpec(name="host", kind="ipv4-target"),
            ParamSpec(name="port", kind="integer", lo=1, hi=65535),
        ),
    ),
    "read_file": ToolSchema(
        tool_name="read_file",
        description="",
        params=(ParamSpec(name="path", kind="string"),),
    ),
}


def scan(call_id, port):
    return ToolCall(call_id, "port_scan", {"host": "10.0.0.5", "port": port})


def read(call_id, path="/etc/hostname"):
    return ToolCall(call_id, "read_file", {"path": path})


def test_identity_when_all_valid():
    dist = ActionDistribution(entries=((scan("a", 80), 0.5), (read("b"), 0.5)))
    out = project_distribution(dist, SCHEMAS)
    assert out.normalizer == pytest.approx(1.0)
    assert [(c.call_id, w) for c, w in out.entries] == [("a", 0.5), ("b", 0.5)]


def test_hand_renormalization_oracle():
    dist = ActionDistribution(
        entries=(
            (scan("a", 80), 0.6),
            (read("b"), 0.3),
            (scan("c", 70000), 0.1),  # invalid: out of range
        )
    )
    out = project_distribution(dist, SCHEMAS)
    assert len(out.entries) == 2
    weights = {c.call_id: w for c, w in out.entries}
    assert weights["a"] == pytest.approx(0.6 / 0.9, abs=1e-12)
    assert weights["b"] == pytest.approx(0.3 / 0.9, abs=1e-12)
    assert out.normalizer == pytest.approx(0.9, abs=1e-12)


def test_all_invalid_raises_empty_valid_set():
    dist = ActionDistribution(entries=((scan("a", 0), 0.7), (scan("b", 70000), 0.3)))
    with pytest.raises(EmptyValidSet):
        project_distribution(dist, SCHEMAS)


def test_unknown_tool_counts_as_invalid():
    dist = ActionDistribution(entries=((ToolCall("a", "nuke", {}), 1.0),))
    with pytest.raises(EmptyValidSet):
        project_distribution(dist, SCHEMAS)


def test_zero_weight_valid_set_raises():
    # A valid candidate with zero weight carries no renormalizable mass.
    dist = ActionDistribution(entries=((scan("a", 80), 0.0), (scan("b", 70000), 1.0)))
    with pytest.raises(EmptyValidSet):
        project_distribution(dist, SCHEMAS)


def test_empty_candidate_list_is_precondition_error():
    with pytest.raises(ValueError):
        project_distribution(ActionDistribution(entries=()), SCHEMAS)


def test_negative_weight_is_precondition_error():
    dist = ActionDistribution(entries=((scan("a", 80), -0.1),))
    with pytest.raises(ValueError):
        project_distribution(dist, SCHEMAS)


def test_argmax_tie_breaks_lexicographically():
    dist = ActionDistribution(
        entries=((read("b2"), 0.25), (scan("b1", 80), 0.25), (read("a9"), 0.5))
    )
    out = project_distribution(dist, SCHEMAS)
    top = argmax_candidate(out)
    assert top.call_id == "a9"
    tied = ActionDistribution(entries=((read("z"), 0.5), (scan("z", 80), 0.5)))
    # equal weight, port_scan < read_file lexicographically
    assert argmax_candidate(project_distribution(tied, SCHEMAS)).tool_name == "port_scan"


def _random_candidate_set(rng):
    n = rng.randint(1, 8)
    entries = []
    for i in range(n):
        kind = rng.random()
        if kind < 0.45:
            entries.append((scan(f"c{i}", rng.randint(1, 65535)), rng.random()))
        elif kind < 0.65:
            entries.append((read(f"c{i}"), rng.random()))
        elif kind < 0.85:
            entries.append((scan(f"c{i}", rng.choice([0, 70000, -4, 10**6])), rng.random()))
        else:
            entries.append((ToolCall(f"c{i}", "ghost_tool", {}), rng.random()))
    return ActionDistribution(entries=tuple(entries))


def test_thousand_random_candidate_sets():
    """Normalization within 1e-9, support restriction, argmax invariance."""
    rng = random.Random(20260814)
    projected = 0
    empty = 0
    for _ in range(1000):
        dist = _random_candidate_set(rng)
        valid_ids = set()
        for c, _w in dist.entries:
            schema = SCHEMAS.get(c.tool_name)
            if schema is not None:
                port = c.arguments.get("port")
                if c.tool_name == "read_file" or (isinstance(port, int) and 1 <= port <= 65535):
                    valid_ids.add(c.call_id)
        pre_valid = [(c, w) for c, w in dist.entries if c.call_id in valid_ids]
        try:
            out = project_distribution(dist, SCHEMAS)
        except EmptyValidSet:
            empty += 1
            assert not pre_valid or math.fsum(w for _, w in pre_valid) == 0.0
            continue
        projected += 1
        # normalization
        assert abs(math.fsum(w for _, w in out.entries) - 1.0) <= 1e-9
        # support restricted to valid candidates
        assert {c.call_id for c, _ in out.entries} == valid_ids
        # argmax invariance, same tie-break on both sides
        pre_top = min(pre_valid, key=lambda e: (-e[1], e[0].tool_name, e[0].call_id))[0]
        assert argmax_candidate(out) == pre_top
    assert projected + empty == 1000
    assert projected > 0 and empty > 0
