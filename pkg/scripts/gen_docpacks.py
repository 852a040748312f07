#!/usr/bin/env python3
"""Regenerate the shipped guidance doc packs.

    python3 scripts/gen_docpacks.py [--root src/ctfgate/reasoner/docpacks]

Deterministic: same catalog, same output. The four packs form the
information ladder the loader enforces:

    baseline (4147) > templates (1976) > lessons (1478) > minimal (55)

minimal is the rendered tool catalog and nothing else; every other pack
includes it. Sizes are exact by construction; the script refuses to
write packs that miss their targets.
"""

from __future__ import annotations

import argparse
import itertools
from pathlib import Path

from ctfgate.toolsrv import catalog

TARGETS = {"baseline": 4147, "templates": 1976, "lessons": 1478, "minimal": 55}

SCHEMAS_LINES = 55
LESSONS_LINES = TARGETS["lessons"] - SCHEMAS_LINES
TEMPLATES_LINES = TARGETS["templates"] - SCHEMAS_LINES
GUIDE_LINES = (TARGETS["baseline"] - SCHEMAS_LINES - LESSONS_LINES - TEMPLATES_LINES) // 2


# -- minimal: the tool catalog, rendered ------------------------------------------

def render_schemas() -> str:
    servers = catalog.server_names()
    tool_count = sum(len(catalog.schemas_for(s)) for s in servers)
    lines = [
        "# Tool catalog",
        f"{len(servers)} servers, {tool_count} tools.",
        "Calls outside these schemas are rejected before execution.",
    ]
    for server in servers:
        lines.append("")
        lines.append(f"## {server}")
        for i, schema in enumerate(catalog.schemas_for(server)):
            if i:
                lines.append("")
            lines.append(f"{schema.tool_name}: {schema.description}")
            for p in schema.params:
                suffix = "" if p.required else " [optional]"
                lines.append(f"  {p.name}: {p.constraint_text()}{suffix}")
    return "\n".join(lines) + "\n"


# -- content banks ------------------------------------------------------------------

CATEGORIES = (
    ("memory corruption", "stack overflow in an input copy"),
    ("memory corruption", "heap metadata tampering after a double free"),
    ("memory corruption", "format-string write to a saved return address"),
    ("web exploitation", "hidden endpoint found by path enumeration"),
    ("web exploitation", "injection through an unescaped query parameter"),
    ("web exploitation", "session token predictable from the response headers"),
    ("cryptography", "single-byte xor keystream recovered by frequency"),
    ("cryptography", "reused nonce collapsing a stream cipher"),
    ("cryptography", "textbook modulus shared across two services"),
    ("reverse engineering", "comparison chain revealing the expected input"),
    ("reverse engineering", "flag assembled at runtime from scattered constants"),
    ("reverse engineering", "anti-debug check bypassed by patching one branch"),
    ("forensics", "deleted file content still present in slack space"),
    ("forensics", "credentials visible in a captured plaintext session"),
)

TOOLS = (
    "run_command", "port_scan", "http_fetch", "debug_launch", "debug_break",
    "read_memory", "inspect_heap", "triage_classify", "parse_scan_xml",
)

MISTAKES = (
    "trusting a cached scan instead of re-probing after the service restarted",
    "spending the budget on one hypothesis without scheduling a fallback task",
    "pasting raw tool output into context until the salient fields drowned",
    "retrying a rejected call unchanged instead of reading the violation hint",
    "assuming the binary matched the source listing instead of checking imports",
    "skipping the scope check locally and burning a call on a rejection",
    "treating a filtered port as closed and dropping the service from the plan",
    "letting a debugger session die and reasoning over stale memory values",
)

CHECKS = (
    "confirm the target address is inside the engagement scope before planning",
    "re-run the schema rendering of a call locally before emitting it",
    "record every offset in the task notes the moment it is computed",
    "verify the flag format against the challenge manifest before submitting",
    "keep one pending task per open port until each is explained",
    "diff the new observation against the previous one before re-planning",
    "prefer one structured tool result over three pages of raw text",
    "close debugger sessions before the episode checkpoint",
)


def _exact(lines: list[str], target: int, filler: str) -> list[str]:
    """Pad with a numbered quick-reference list to exactly target lines."""
    room = target - len(lines)
    assert room >= 0, f"content overshot target by {-room} lines"
    if room:
        bank = itertools.cycle(CHECKS)
        lines = lines + [filler, ""]
        for n in range(room - 2):
            lines.append(f"{n + 1}. {next(bank)}")
    assert len(lines) == target, (len(lines), target)
    return lines


def render_lessons() -> str:
    lines = [
        "# Lessons learned",
        "",
        "Operational notes from prior engagements, one lesson per block.",
        "Read the takeaway lines first; the context is there for disputes.",
    ]
    n = 0
    for (category, situation), mistake in itertools.product(CATEGORIES, MISTAKES):
        n += 1
        lines += [
            "",
            f"## Lesson {n}: {category}",
            f"Situation: {situation}.",
            f"What went wrong: {mistake}.",
            f"Takeaway: make it a queue task, not a mental note (see lesson {max(1, n - 7)}).",
        ]
        if len(lines) >= LESSONS_LINES - len(CHECKS) * 2 - 16:
            break
    lines = _exact(lines, LESSONS_LINES, "## Quick reference")
    return "\n".join(lines) + "\n"


def render_templates() -> str:
    lines = [
        "# Attack templates",
        "",
        "Parameterized step sequences. Fill the placeholders from the",
        "current observation set; never replay literal values between targets.",
    ]
    n = 0
    for (category, situation), tool in itertools.product(CATEGORIES, TOOLS):
        n += 1
        lines += [
            "",
            f"## Template {n}: {category}",
            f"Applies when: {situation}.",
            f"1. Establish reachability with {tool} and record the result.",
            "2. Form a single falsifiable hypothesis about the weakness.",
            "3. Build the minimal input that tests it; predict the output first.",
            "4. Run it through the gateway; a rejection hint is data, not noise.",
            "5. On success, capture evidence; on failure, update the queue.",
            "Verification: the flag pattern or a state change you predicted.",
        ]
        if len(lines) >= TEMPLATES_LINES - len(CHECKS) * 2 - 20:
            break
    lines = _exact(lines, TEMPLATES_LINES, "## Payload quick reference")
    return "\n".join(lines) + "\n"


def render_triage_guide() -> str:
    lines = [
        "# Triage guidance",
        "",
        "Decide the category before spending budget on an attack chain.",
        "Signals are cheap; wrong-category exploitation attempts are not.",
    ]
    n = 0
    for (category, situation), check in itertools.product(CATEGORIES, CHECKS[:4]):
        n += 1
        lines += [
            "",
            f"## Signal {n}: {category}",
            f"Indicator: {situation}.",
            f"Before acting: {check}.",
        ]
        if len(lines) >= GUIDE_LINES - len(CHECKS) * 2 - 12:
            break
    lines = _exact(lines, GUIDE_LINES, "## Signal checklist")
    return "\n".join(lines) + "\n"


def render_workflow() -> str:
    lines = [
        "# Engagement workflow",
        "",
        "The loop is plan, execute, parse, iterate. Tasks live in the",
        "queue, not in prose; every loop turn updates exactly one task.",
    ]
    n = 0
    for mistake, check in itertools.product(MISTAKES, CHECKS):
        n += 1
        lines += [
            "",
            f"## Rule {n}",
            f"Avoid: {mistake}.",
            f"Instead: {check}.",
        ]
        if len(lines) >= GUIDE_LINES - len(CHECKS) * 2 - 12:
            break
    lines = _exact(lines, GUIDE_LINES, "## Rule checklist")
    return "\n".join(lines) + "\n"


# -- assembly --------------------------------------------------------------------------

def build_packs() -> dict[str, dict[str, str]]:
    schemas = render_schemas()
    lessons = render_lessons()
    templates = render_templates()
    triage_guide = render_triage_guide()
    workflow = render_workflow()
    return {
        "minimal": {"schemas.md": schemas},
        "lessons": {"schemas.md": schemas, "lessons.md": lessons},
        "templates": {"schemas.md": schemas, "attack_templates.md": templates},
        "baseline": {
            "schemas.md": schemas,
            "attack_templates.md": templates,
            "lessons.md": lessons,
            "triage_guide.md": triage_guide,
            "workflow.md": workflow,
        },
    }


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument(
        "--root",
        default=str(Path(__file__).parent.parent / "src/ctfgate/reasoner/docpacks"),
    )
    args = parser.parse_args()
    root = Path(args.root)
    packs = build_packs()
    for condition, docs in packs.items():
        total = sum(len(text.splitlines()) for text in docs.values())
        if total != TARGETS[condition]:
            raise SystemExit(f"{condition}: built {total} lines, target {TARGETS[condition]}")
        pack_dir = root / condition
        pack_dir.mkdir(parents=True, exist_ok=True)
        for name, text in sorted(docs.items()):
            (pack_dir / name).write_text(text, encoding="utf-8")
        print(f"{condition}: {total} lines across {len(docs)} documents")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
