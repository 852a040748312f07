"""Guidance doc packs for the four context-ablation conditions.

A pack is a directory of text documents. The four shipped conditions
form a strict information ladder:

    baseline  > templates > lessons > minimal     (by total line count)

minimal is the floor: nothing but the rendered tool schemas, which
every condition includes. The shipped packs are generated by
scripts/gen_docpacks.py and committed; the loader works on any
directory with the same layout.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from ctfgate.errors import MissingCondition, OrderingViolation

CONDITIONS = ("baseline", "templates", "lessons", "minimal")

# Default pack root: the data shipped inside this package.
SHIPPED_ROOT = Path(__file__).parent / "docpacks"


@dataclass(frozen=True)
class DocPack:
    condition: str
    documents: tuple[tuple[str, str], ...]  # (name, text), name-sorted
    total_lines: int

    def __post_init__(self) -> None:
        if self.condition not in CONDITIONS:
            raise ValueError(f"unknown condition {self.condition!r}")
        counted = sum(_line_count(text) for _, text in self.documents)
        if counted != self.total_lines:
            raise ValueError(f"total_lines {self.total_lines} != counted {counted}")

    def document(self, name: str) -> str:
        for doc_name, text in self.documents:
            if doc_name == name:
                return text
        raise KeyError(name)

    def names(self) -> list[str]:
        return [name for name, _ in self.documents]


def _line_count(text: str) -> int:
    return len(text.splitlines())


def _load_one(condition: str, root: Path) -> DocPack:
    pack_dir = root / condition
    if not pack_dir.is_dir():
        raise MissingCondition(f"no pack directory for condition {condition!r} under {root}")
    docs = []
    for path in sorted(pack_dir.iterdir()):
        if path.suffix in (".md", ".txt") and path.is_file():
            docs.append((path.name, path.read_text(encoding="utf-8")))
    if not docs:
        raise MissingCondition(f"condition {condition!r} has no documents")
    total = sum(_line_count(text) for _, text in docs)
    return DocPack(condition=condition, documents=tuple(docs), total_lines=total)


def load_doc_pack(condition: str, root: str | Path | None = None) -> DocPack:
    """Load one condition's pack and police the ladder.

    When all four condition directories exist under root, their line
    counts must strictly decrease baseline -> minimal; a tie or
    inversion is an OrderingViolation. A missing sibling is only an
    error when it is the condition actually requested.
    """
    root_path = Path(root) if root is not None else SHIPPED_ROOT
    condition = condition.lower()
    if condition not in CONDITIONS:
        raise MissingCondition(
            f"unknown condition {condition!r}; valid: {', '.join(CONDITIONS)}"
        )
    pack = _load_one(condition, root_path)
    if all((root_path / c).is_dir() for c in CONDITIONS):
        counts = {c: _load_one(c, root_path).total_lines for c in CONDITIONS}
        ladder = [counts[c] for c in CONDITIONS]
        if any(a <= b for a, b in zip(ladder, ladder[1:])):
            raise OrderingViolation(
                "pack sizes must strictly decrease baseline>templates>lessons>minimal, got "
                + ", ".join(f"{c}={counts[c]}" for c in CONDITIONS)
            )
    return pack
