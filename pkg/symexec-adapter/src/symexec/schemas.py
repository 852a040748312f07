"""Tool schemas this server publishes, in the gateway's schema dialect.

The gateway validates every call against these documents before the
server sees it, so each parameter pins its kind and constraints the
same way the native catalog does: addresses are hex-address-strings,
octet-valued parameters travel hex-encoded (JSON strings cannot carry
arbitrary bytes), and durations are integer milliseconds because the
dialect has no fractional kind.
"""

from __future__ import annotations

from typing import Any

SERVER_NAME = "symexec"

# Octets as a hex string: one or more byte pairs, either letter case.
OCTETS_PATTERN = r"(?:[0-9a-fA-F]{2})+"

STDIN_CAP_LO = 1
STDIN_CAP_HI = 4096
TIME_BUDGET_MS_LO = 1
TIME_BUDGET_MS_HI = 600_000


def _binary_param() -> dict[str, Any]:
    return {
        "name": "binary",
        "kind": "string",
        "required": True,
        "scope_role": "binary",
        "description": "absolute path of an allow-listed executable",
    }


def _avoid_param() -> dict[str, Any]:
    return {
        "name": "avoid_addrs",
        "kind": "list-of",
        "required": False,
        "item": {"name": "addr", "kind": "hex-address-string", "required": True},
        "description": "addresses the discovered path must never touch",
    }


def _cap_param() -> dict[str, Any]:
    return {
        "name": "stdin_length_cap",
        "kind": "integer",
        "required": False,
        "lo": STDIN_CAP_LO,
        "hi": STDIN_CAP_HI,
        "description": "symbolic stdin bytes; reads past the cap hand out zero bytes",
    }


def _budget_param() -> dict[str, Any]:
    return {
        "name": "time_budget_ms",
        "kind": "integer",
        "required": False,
        "lo": TIME_BUDGET_MS_LO,
        "hi": TIME_BUDGET_MS_HI,
        "description": "solve budget in milliseconds; past it the status is timeout",
    }


def solve_path_schema() -> dict[str, Any]:
    return {
        "tool_name": "solve_path",
        "description": "Search for stdin bytes that steer execution onto a target address "
                       "while avoiding every avoid address; sat answers carry hex-encoded "
                       "stdin and are re-verified by concrete replay before returning.",
        "params": [
            _binary_param(),
            {
                "name": "target_addr",
                "kind": "hex-address-string",
                "required": True,
                "description": "address control flow must reach",
            },
            _avoid_param(),
            _cap_param(),
            _budget_param(),
        ],
    }


def solve_by_output_schema() -> dict[str, Any]:
    return {
        "tool_name": "solve_by_output",
        "description": "Search for stdin bytes that make the program's entire stdout equal "
                       "the expected octets; sat answers carry hex-encoded stdin and are "
                       "re-verified by running the real binary before returning.",
        "params": [
            _binary_param(),
            {
                "name": "expected_output",
                "kind": "string",
                "required": True,
                "pattern": OCTETS_PATTERN,
                "description": "exact stdout to produce, hex-encoded octets",
            },
            _avoid_param(),
            _cap_param(),
            _budget_param(),
        ],
    }


def tool_schemas() -> list[dict[str, Any]]:
    return [solve_path_schema(), solve_by_output_schema()]
