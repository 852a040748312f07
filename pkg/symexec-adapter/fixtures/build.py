"""Build the C fixtures with pinned flags.

The engine's decoder covers the instruction subset gcc emits for these
files at -O0; the flags below pin that surface. Freestanding (-nostdlib)
keeps libc startup code out of the binary so execution begins straight
at _start and the only kernel interaction is the three inline-asm
syscalls.

Usage: python build.py OUTDIR  (writes OUTDIR/crackme, OUTDIR/deadbranch)
"""

from __future__ import annotations

import subprocess
import sys
from pathlib import Path

FIXTURE_DIR = Path(__file__).resolve().parent
SOURCES = ("crackme", "deadbranch")

CFLAGS = (
    "-O0",
    "-static",
    "-nostdlib",
    "-fno-pic",
    "-no-pie",
    "-fno-stack-protector",
    "-fno-asynchronous-unwind-tables",
    "-fcf-protection=none",
    "-fno-jump-tables",
)


def build(out_dir: str | Path, cc: str = "gcc") -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    built: dict[str, Path] = {}
    for name in SOURCES:
        src = FIXTURE_DIR / f"{name}.c"
        dst = out / name
        subprocess.run(
            [cc, *CFLAGS, "-o", str(dst), str(src)],
            check=True,
            capture_output=True,
        )
        built[name] = dst
    return built


if __name__ == "__main__":
    if len(sys.argv) != 2:
        sys.exit(f"usage: {sys.argv[0]} OUTDIR")
    for name, path in build(sys.argv[1]).items():
        print(f"{name}: {path}")
