#!/usr/bin/env python3
"""Deterministic fixture generator: writes the intercepted ciphertext
and the analyst notes into the sandbox."""

import sys
from pathlib import Path

FLAG = b"flag{x0r_k3y_r3cov3r3d}"
KEY = 0x2A

NOTES = """intercepted transmission, 2024-11-02 03:14 UTC
source: beacon on the staging network
encoding: single-byte xor, operator reused the key from last quarter (0x2a)
payload: cipher.bin
"""


def main() -> None:
    out = Path(sys.argv[1] if len(sys.argv) > 1 else ".")
    (out / "cipher.bin").write_bytes(bytes(b ^ KEY for b in FLAG))
    (out / "notes.txt").write_text(NOTES, encoding="utf-8")


if __name__ == "__main__":
    main()
