"""Structured ingestion: tool results in, compact observations out.

Tool results can be arbitrarily large (a megabyte of stdout costs the
same to produce as one line); context is the scarce resource. This
module extracts the fields that drive decisions and throws the rest
away, keeping only a digest of the full result for audit.

Cost accounting approximates tokens as whitespace-delimited words; the
budget is a contract about bounded ingestion, not a tokenizer.

When an observation exceeds its budget, fields are dropped in a fixed
order: the raw excerpt first, then list fields trimmed, then whole
fields in reverse priority. The flag field is never dropped.
"""

from __future__ import annotations

import hashlib
import json
import re
from typing import Any

from ctfgate.agent.state import Observation
from ctfgate.gateway.dispatch import ToolResult

DEFAULT_BUDGET_WORDS = 800
# Permissive fallback; challenge manifests normally override with a
# tighter pattern (the greedy body can span adjacent braces).
DEFAULT_FLAG_PATTERN = r"flag\{[ -~]+\}"

HEX_ADDRESS_RE = re.compile(r"0x[0-9a-fA-F]{4,16}")
OFFSET_RE = re.compile(r"(?:offset|at byte|\+)\s*[=:]?\s*(\d{1,10})", re.IGNORECASE)
LINK_RE = re.compile(r'href=["\']([^"\']+)["\']', re.IGNORECASE)

LIST_CAP = 16
EXCERPT_LINES = 12

# Drop order when over budget (last dropped first). flag stays.
FIELD_PRIORITY = (
    "flag",
    "open_ports",
    "host",
    "exit_code",
    "status",
    "category",
    "confidence",
    "value",
    "chunks",
    "addresses",
    "offsets",
    "links",
    "matched",
    "error",
    "truncated",
    "excerpt",
)


def _word_count(value: Any) -> int:
    return len(json.dumps(value).split())


def _digest(payload: Any) -> str:
    return hashlib.sha256(
        json.dumps(payload, sort_keys=True, default=str).encode("utf-8")
    ).hexdigest()


def _text_of(payload: Any) -> str:
    if isinstance(payload, str):
        return payload
    return json.dumps(payload)


def _scan_text_fields(text: str, salient: dict, flag_re: re.Pattern) -> None:
    flags = flag_re.findall(text)
    if flags:
        salient["flag"] = flags[0]
    addresses = HEX_ADDRESS_RE.findall(text)
    if addresses:
        salient["addresses"] = list(dict.fromkeys(addresses))[:LIST_CAP]
    offsets = OFFSET_RE.findall(text)
    if offsets:
        salient["offsets"] = [int(o) for o in dict.fromkeys(offsets)][:LIST_CAP]


def _extract(tool: str, payload: Any, flag_re: re.Pattern) -> dict[str, Any]:
    salient: dict[str, Any] = {}
    if not isinstance(payload, dict):
        _scan_text_fields(_text_of(payload), salient, flag_re)
        return salient

    if tool in ("port_scan", "parse_scan_xml"):
        salient["host"] = payload.get("host")
        salient["open_ports"] = [
            p["port"] for p in payload.get("ports", []) if p.get("state") == "open"
        ]
        return salient

    if tool == "run_command":
        text = payload.get("stdout", "") + "\n" + payload.get("stderr", "")
        salient["exit_code"] = payload.get("exit_code")
        _scan_text_fields(text, salient, flag_re)
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if lines:
            salient["excerpt"] = lines[:EXCERPT_LINES]
        if payload.get("truncated"):
            salient["truncated"] = True
        return salient

    if tool == "http_fetch":
        body = payload.get("body", "")
        salient["status"] = payload.get("status")
        _scan_text_fields(body, salient, flag_re)
        links = LINK_RE.findall(body)
        if links:
            salient["links"] = list(dict.fromkeys(links))[:LIST_CAP]
        lines = [ln for ln in body.splitlines() if ln.strip()]
        if lines:
            salient["excerpt"] = lines[:EXCERPT_LINES]
        if payload.get("truncated"):
            salient["truncated"] = True
        return salient

    if tool == "inspect_heap":
        chunks = payload.get("chunks", [])
        salient["chunks"] = [
            {"address": c.get("address"), "size": c.get("size"), "in_use": c.get("in_use")}
            for c in chunks[:LIST_CAP]
        ]
        return salient

    if tool == "triage_classify":
        salient["category"] = payload.get("predicted_category")
        salient["confidence"] = payload.get("confidence")
        return salient

    if tool in ("debug_evaluate", "read_memory"):
        value = payload.get("value", payload.get("hex", ""))
        salient["value"] = str(value)[:256]
        text = str(value)
        if tool == "read_memory":
            try:
                text = bytes.fromhex(payload.get("hex", "")).decode("ascii", errors="replace")
            except ValueError:
                pass
        _scan_text_fields(text, salient, flag_re)
        return salient

    # generic fallback: scan the whole structured result as text
    _scan_text_fields(_text_of(payload), salient, flag_re)
    return salient


def _fit_budget(salient: dict[str, Any], budget: int) -> tuple[dict[str, Any], bool]:
    if _word_count(salient) <= budget:
        return salient, False
    out = dict(salient)
    out["truncated"] = True
    # 1. raw excerpt goes first
    out.pop("excerpt", None)
    # 2. halve list fields until they are gone or we fit
    shrinking = True
    while _word_count(out) > budget and shrinking:
        shrinking = False
        for key in ("links", "offsets", "addresses", "chunks"):
            value = out.get(key)
            if isinstance(value, list) and value:
                out[key] = value[: max(len(value) // 2, 0)] or None
                if not out[key]:
                    out.pop(key)
                shrinking = True
    # 3. whole fields in reverse priority; the flag is never dropped
    for key in reversed(FIELD_PRIORITY):
        if _word_count(out) <= budget:
            break
        if key in ("flag", "truncated"):
            continue
        out.pop(key, None)
    return out, True


def parse_observation(
    result: ToolResult,
    budget: int = DEFAULT_BUDGET_WORDS,
    flag_pattern: str = DEFAULT_FLAG_PATTERN,
) -> Observation:
    """Compact one gateway result into an Observation within budget."""
    flag_re = re.compile(flag_pattern)
    salient = _extract(result.tool_name, result.payload, flag_re)
    salient = {k: v for k, v in salient.items() if v is not None}
    salient, truncated = _fit_budget(salient, budget)
    if truncated:
        salient["truncated"] = True
    return Observation(
        source=result.tool_name,
        salient=salient,
        raw_digest=_digest(result.payload),
        token_cost=_word_count(salient),
    )


def error_observation(tool_name: str, status: str, detail: str) -> Observation:
    """Observation for a dispatch that raised instead of returning;
    gateway failures are data for the reasoner, not loop crashes."""
    salient = {"error": status, "detail": detail[:200]}
    return Observation(
        source=tool_name,
        salient=salient,
        raw_digest=_digest({"error": status, "detail": detail}),
        token_cost=_word_count(salient),
    )
