#!/usr/bin/env python3
"""Record a machine-interface output corpus from a live debugger session.

Compiles a small C program, drives the system debugger in MI mode
through a representative command sequence (breakpoints, running,
stepping, variables, memory, stack), and writes every output line the
debugger produced to tests/fixtures/mi_corpus.txt.

Run from the repository root:

    python3 scripts/record_mi_corpus.py

The corpus is committed; this script exists so the fixture can be
regenerated on a new platform. Lines the corpus parser deliberately
refuses (none expected) would be reported here at generation time.
"""

from __future__ import annotations

import subprocess
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
OUT = REPO / "tests" / "fixtures" / "mi_corpus.txt"

C_SOURCE = r"""
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

struct point { int x; int y; };

int add(int a, int b) { return a + b; }

int main(void) {
    struct point p = {3, 4};
    char *name = malloc(32);
    strcpy(name, "corpus fixture");
    int total = 0;
    for (int i = 0; i < 5; i++) {
        total = add(total, i);
    }
    printf("%s: %d (%d,%d)\n", name, total, p.x, p.y);
    free(name);
    return 0;
}
"""

MI_COMMANDS = [
    "-list-features",
    "-break-insert main",
    "-break-insert add",
    "-break-list",
    "-exec-run",
    "-thread-info",
    "-stack-list-frames",
    "-stack-list-variables --all-values",
    "-data-evaluate-expression p",
    "-data-evaluate-expression total",
    "-exec-next",
    "-exec-next",
    "-exec-continue",
    "-stack-list-frames",
    "-stack-list-arguments 1",
    "-data-list-register-names",
    "-data-evaluate-expression $pc",
    "-break-delete 2",
    "-break-list",
    "-exec-continue",
    "-list-thread-groups",
    "-gdb-exit",
]


def main() -> int:
    with tempfile.TemporaryDirectory() as tmp:
        src = Path(tmp) / "fixture.c"
        exe = Path(tmp) / "fixture"
        src.write_text(C_SOURCE)
        subprocess.run(["gcc", "-g", "-O0", "-o", str(exe), str(src)], check=True)
        gdb = subprocess.Popen(
            ["gdb", "--interpreter=mi2", "-q", "-nx", str(exe)],
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.DEVNULL,
            text=True,
        )
        script = "".join(f"{i + 1}{cmd}\n" for i, cmd in enumerate(MI_COMMANDS))
        out, _ = gdb.communicate(script, timeout=60)

    # Keep machine-interface record lines only: the debuggee's own stdout
    # shares the pipe but is not part of the MI grammar.
    import re
    mi_line = re.compile(r"(\d+)?[\^*+=~@&]|\(gdb\)")
    lines = [line for line in out.splitlines() if line.strip() and mi_line.match(line)]
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text("\n".join(lines) + "\n")
    print(f"wrote {len(lines)} lines to {OUT}")

    # Sanity: the freshly written corpus must parse cleanly.
    sys.path.insert(0, str(REPO / "src"))
    from ctfgate.toolsrv.mi import parse_mi_record, serialize_mi_record

    failures = 0
    for i, line in enumerate(lines, 1):
        try:
            rec = parse_mi_record(line)
            reparsed = parse_mi_record(serialize_mi_record(rec))
            assert reparsed == rec, f"round-trip mismatch at line {i}"
        except Exception as exc:
            failures += 1
            print(f"line {i}: {exc}\n  {line[:120]}")
    if failures:
        print(f"{failures} corpus lines failed")
        return 1
    print("corpus parses cleanly and round-trips")
    return 0


if __name__ == "__main__":
    sys.exit(main())
