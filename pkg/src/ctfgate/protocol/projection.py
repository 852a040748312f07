"""Projection of a candidate-action distribution onto the valid subset.

The reasoner emits a finite weighted candidate list. Projection drops
every candidate that fails schema validation and renormalizes the
surviving weights by Z, the sum of valid candidates' original weights.
When Z is zero (nothing valid, or only zero-weight candidates valid)
there is no distribution to renormalize and EmptyValidSet is raised;
the agent loop answers that with a re-plan rather than ever letting an
unvalidated action through.

Ties in the post-projection argmax break lexicographically by
(tool_name, call_id) so replays are deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

from ctfgate.errors import EmptyValidSet
from ctfgate.protocol.schema import ToolCall, ToolSchema, validate_call


@dataclass(frozen=True)
class ActionDistribution:
    """Weighted candidate calls plus the normalizer that produced them.

    Before projection, normalizer is 0.0 (unnormalized emission). After
    projection, normalizer holds Z and the weights sum to 1 within 1e-9.
    """

    entries: tuple[tuple[ToolCall, float], ...]
    normalizer: float = 0.0


def project_distribution(
    candidates: ActionDistribution,
    schema_lookup: Mapping[str, ToolSchema],
) -> ActionDistribution:
    """Keep exactly the valid candidates, each reweighted by 1/Z.

    Raises:
        ValueError: empty candidate list, or a negative/non-finite weight.
        EmptyValidSet: Z == 0.
    """
    if not candidates.entries:
        raise ValueError("candidate set is empty")
    for call, weight in candidates.entries:
        if not math.isfinite(weight) or weight < 0.0:
            raise ValueError(f"candidate {call.call_id} has bad weight {weight!r}")

    valid_entries: list[tuple[ToolCall, float]] = []
    for call, weight in candidates.entries:
        schema = schema_lookup.get(call.tool_name)
        if schema is None:
            continue
        if validate_call(call, schema).valid:
            valid_entries.append((call, weight))

    z = math.fsum(weight for _, weight in valid_entries)
    if not valid_entries or z <= 0.0:
        raise EmptyValidSet(
            f"no renormalizable mass: {len(valid_entries)} valid of "
            f"{len(candidates.entries)} candidates, Z={z}"
        )
    projected = tuple((call, weight / z) for call, weight in valid_entries)
    return ActionDistribution(entries=projected, normalizer=z)


def argmax_candidate(dist: ActionDistribution) -> ToolCall:
    """Highest-weight candidate; ties break by (tool_name, call_id)."""
    if not dist.entries:
        raise ValueError("empty distribution")
    best_call, _ = min(dist.entries, key=lambda e: (-e[1], e[0].tool_name, e[0].call_id))
    return best_call
