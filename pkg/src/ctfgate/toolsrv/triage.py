"""Challenge triage: ordered heuristics over static and dynamic signals.

The table below is the whole algorithm. Heuristics are evaluated top to
bottom; the first match fixes the category, but every match lands in
the evidence list so a reviewer can see what else fired. Confidence is
1 - 0.5^matches: one firing heuristic gives 0.5, independent extra
evidence pushes it toward 1. Zero matches is Unknown with confidence 0.

Static signals: URL shape, file magic, imported dynamic symbols read
with a minimal ELF parser (no external toolchain), embedded strings.
The dynamic signal is one sandboxed execution of the artifact with a
long stdin line, checking for a crash signal; it runs only when
explicitly enabled, because running unknown binaries is a choice the
caller must make.
"""

from __future__ import annotations

import os
import re
import signal
import struct
import subprocess
from dataclasses import dataclass

from ctfgate.errors import UnreadableArtifact

CATEGORIES = (
    "Memory Corruption",
    "Reverse Engineering",
    "Web Exploitation",
    "Cryptography",
    "Unknown",
)

CONFIDENCE_THRESHOLD = 0.25

DANGEROUS_IMPORTS = frozenset({
    "gets", "strcpy", "strcat", "sprintf", "vsprintf", "scanf", "__isoc99_scanf", "system",
})

CRYPTO_MARKERS = (
    "cipher", "encrypt", "decrypt", "xor", "base64", "rot13", "aes", "rsa", "secret key",
)

WEB_MARKERS = ("<html", "<!doctype html", "http/1.", "set-cookie", "<?php")

_URL_RE = re.compile(r"https?://[^\s]+$", re.IGNORECASE)

ELF_MAGIC = b"\x7fELF"

_LONG_STDIN = b"A" * 3000 + b"\n"


@dataclass(frozen=True)
class TriageReport:
    predicted_category: str
    confidence: float
    evidence: tuple[str, ...]

    def __post_init__(self) -> None:
        if self.predicted_category not in CATEGORIES:
            raise ValueError(f"unknown category {self.predicted_category!r}")
        below = self.confidence < CONFIDENCE_THRESHOLD
        if (self.predicted_category == "Unknown") != below:
            raise ValueError("Unknown iff confidence below threshold")

    def to_dict(self) -> dict:
        return {
            "predicted_category": self.predicted_category,
            "confidence": self.confidence,
            "evidence": list(self.evidence),
        }


# -- minimal ELF import reader --------------------------------------------------

def elf_imported_symbols(path: str) -> list[str]:
    """Names of undefined dynamic symbols (the binary's imports).

    Reads the 64-bit ELF section table directly: .dynsym entries whose
    section index is SHN_UNDEF. Returns [] for static binaries. Raises
    ValueError when the file is not a 64-bit ELF.
    """
    with open(path, "rb") as fp:
        data = fp.read()
    if data[:4] != ELF_MAGIC:
        raise ValueError("not an ELF file")
    if data[4] != 2:
        raise ValueError("not a 64-bit ELF")
    little = data[5] == 1
    end = "<" if little else ">"
    e_shoff, = struct.unpack_from(end + "Q", data, 0x28)
    e_shentsize, e_shnum = struct.unpack_from(end + "HH", data, 0x3A)

    sections = []
    for i in range(e_shnum):
        off = e_shoff + i * e_shentsize
        sh_type, = struct.unpack_from(end + "I", data, off + 4)
        sh_offset, sh_size = struct.unpack_from(end + "QQ", data, off + 24)
        sh_link, = struct.unpack_from(end + "I", data, off + 40)
        sh_entsize, = struct.unpack_from(end + "Q", data, off + 56)
        sections.append((sh_type, sh_offset, sh_size, sh_link, sh_entsize))

    imports: list[str] = []
    SHT_DYNSYM = 11
    SHN_UNDEF = 0
    for sh_type, sh_offset, sh_size, sh_link, sh_entsize in sections:
        if sh_type != SHT_DYNSYM or sh_entsize == 0:
            continue
        _, str_off, str_size, _, _ = sections[sh_link]
        for off in range(sh_offset, sh_offset + sh_size, sh_entsize):
            st_name, = struct.unpack_from(end + "I", data, off)
            st_shndx, = struct.unpack_from(end + "H", data, off + 6)
            if st_shndx != SHN_UNDEF or st_name == 0:
                continue
            name_start = str_off + st_name
            name_end = data.index(b"\x00", name_start, str_off + str_size)
            imports.append(data[name_start:name_end].decode("ascii", errors="replace"))
    return imports


def _printable_strings(data: bytes, min_len: int = 4) -> list[str]:
    out = []
    run = bytearray()
    for byte in data:
        if 0x20 <= byte <= 0x7E:
            run.append(byte)
        else:
            if len(run) >= min_len:
                out.append(run.decode("ascii"))
            run = bytearray()
    if len(run) >= min_len:
        out.append(run.decode("ascii"))
    return out


def _crashes_on_long_stdin(path: str) -> bool:
    """Dynamic probe: one sandboxed run; true when the process dies on a
    memory-fault signal."""
    try:
        proc = subprocess.run(
            [path],
            input=_LONG_STDIN,
            stdout=subprocess.DEVNULL,
            stderr=subprocess.DEVNULL,
            timeout=5,
            start_new_session=True,
        )
    except (OSError, subprocess.TimeoutExpired):
        return False
    return proc.returncode in (-signal.SIGSEGV, -signal.SIGABRT, -signal.SIGBUS)


# -- the ordered heuristic table -------------------------------------------------

def triage_classify(artifact: str, dynamic: bool = False) -> TriageReport:
    """Classify one artifact (filesystem path or http(s) URL).

    Heuristic order (first match wins the category; all matches are
    evidence):

        1. http-url          the artifact is a URL           -> Web Exploitation
        2. dangerous-imports ELF imports an unsafe libc call -> Memory Corruption
        3. stdin-crash       long stdin crashes the binary   -> Memory Corruption
        4. web-content       file contains web markers       -> Web Exploitation
        5. crypto-markers    file strings mention crypto     -> Cryptography
        6. elf-artifact      file is an ELF                  -> Reverse Engineering

    Raises UnreadableArtifact for a missing/unreadable path.
    """
    matches: list[tuple[str, str]] = []  # (heuristic, category)

    if _URL_RE.fullmatch(artifact.strip()):
        matches.append(("http-url", "Web Exploitation"))
        data = b""
        is_elf = False
    else:
        if not os.path.isfile(artifact):
            raise UnreadableArtifact(f"no such artifact: {artifact}")
        try:
            with open(artifact, "rb") as fp:
                data = fp.read()
        except OSError as exc:
            raise UnreadableArtifact(f"cannot read artifact: {exc}") from exc
        is_elf = data[:4] == ELF_MAGIC

        if is_elf:
            try:
                imports = set(elf_imported_symbols(artifact))
            except ValueError:
                imports = set()
            dangerous = sorted(imports & DANGEROUS_IMPORTS)
            if dangerous:
                matches.append(("dangerous-imports:" + ",".join(dangerous), "Memory Corruption"))
            if dynamic and os.access(artifact, os.X_OK) and _crashes_on_long_stdin(artifact):
                matches.append(("stdin-crash", "Memory Corruption"))

        text_strings = _printable_strings(data)
        lowered = "\n".join(text_strings).lower()
        if any(marker in lowered for marker in WEB_MARKERS):
            matches.append(("web-content", "Web Exploitation"))
        if any(marker in lowered for marker in CRYPTO_MARKERS):
            matches.append(("crypto-markers", "Cryptography"))
        if is_elf:
            matches.append(("elf-artifact", "Reverse Engineering"))

    if not matches:
        return TriageReport(predicted_category="Unknown", confidence=0.0, evidence=())
    category = matches[0][1]
    confidence = 1.0 - 0.5 ** len(matches)
    return TriageReport(
        predicted_category=category,
        confidence=confidence,
        evidence=tuple(name for name, _ in matches),
    )
