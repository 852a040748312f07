"""Cross-reference lookup: a deliberate structured stub.

There is no decompiler backend in this deployment. The tool still
exists so the agent exercises its pivot-on-failure path against a
well-formed refusal instead of a crash: the result is shaped exactly
like a rejection payload (call_id, violations, hint) and names the
missing backend.
"""

from __future__ import annotations

from ctfgate.protocol.schema import Rejection, Violation

MISSING_BACKEND = "decompiler"


def get_xrefs(func_name: str, call_id: str) -> Rejection:
    """Always a CapabilityUnavailable result, never a lookup."""
    violation = Violation(
        param="(capability)",
        constraint=f"a configured {MISSING_BACKEND} backend",
        offered=f"get_xrefs({func_name!r})",
    )
    return Rejection(
        call_id=call_id,
        violations=(violation,),
        hint=(
            f"capability unavailable: get_xrefs needs a {MISSING_BACKEND} backend and none is "
            "configured; pivot to strings extraction, symbol listings, or the debugger"
        ),
    )
