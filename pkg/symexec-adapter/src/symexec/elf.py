"""Minimal ELF64 loader for static x86-64 executables.

Parses just enough of the format to run the pinned fixtures: the file
header, PT_LOAD program headers (what to map where), the section
headers (to locate .text for linear disassembly), and .symtab (so
callers can turn function names into addresses). Dynamic linking,
relocations and other architectures are out of scope; anything outside
the supported shape raises LoadFailure rather than limping on.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

__all__ = ["LoadFailure", "Segment", "Section", "Symbol", "Program", "load"]

_EHDR = struct.Struct("<16sHHIQQQIHHHHHH")
_PHDR = struct.Struct("<IIQQQQQQ")
_SHDR = struct.Struct("<IIQQQQIIQQ")
_SYM = struct.Struct("<IBBHQQ")

_ELF_MAGIC = b"\x7fELF"
_CLASS64 = 2
_DATA_LSB = 1
_ET_EXEC = 2
_EM_X86_64 = 62
_PT_LOAD = 1
_SHT_SYMTAB = 2
_STT_FUNC = 2


class LoadFailure(Exception):
    """The file is not a static ELF64 x86-64 executable we can map."""


@dataclass(frozen=True)
class Segment:
    vaddr: int
    data: bytes
    memsz: int
    flags: int  # PF_X=1, PF_W=2, PF_R=4

    @property
    def executable(self) -> bool:
        return bool(self.flags & 1)

    def contains(self, addr: int) -> bool:
        return self.vaddr <= addr < self.vaddr + self.memsz


@dataclass(frozen=True)
class Section:
    name: str
    addr: int
    size: int
    offset: int


@dataclass(frozen=True)
class Symbol:
    name: str
    addr: int
    size: int
    is_func: bool


@dataclass(frozen=True)
class Program:
    path: str
    entry: int
    segments: tuple[Segment, ...]
    sections: tuple[Section, ...]
    symbols: dict[str, Symbol]

    def address_mapped(self, addr: int) -> bool:
        return any(seg.contains(addr) for seg in self.segments)

    def section(self, name: str) -> Section | None:
        for sec in self.sections:
            if sec.name == name:
                return sec
        return None

    def symbol_addr(self, name: str) -> int:
        try:
            return self.symbols[name].addr
        except KeyError:
            raise LoadFailure(f"no symbol {name!r} in {self.path}") from None


def load(path: str | Path) -> Program:
    """Map an executable. Raises LoadFailure for anything unsupported."""
    path = str(path)
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise LoadFailure(f"cannot read {path}: {exc}") from exc
    if len(raw) < _EHDR.size:
        raise LoadFailure(f"{path}: too short to hold an ELF header")
    (ident, e_type, e_machine, _version, e_entry, e_phoff, e_shoff, _flags,
     _ehsize, e_phentsize, e_phnum, e_shentsize, e_shnum, e_shstrndx) = _EHDR.unpack_from(raw, 0)

    if ident[:4] != _ELF_MAGIC:
        raise LoadFailure(f"{path}: not an ELF file")
    if ident[4] != _CLASS64:
        raise LoadFailure(f"{path}: not 64-bit")
    if ident[5] != _DATA_LSB:
        raise LoadFailure(f"{path}: not little-endian")
    if e_machine != _EM_X86_64:
        raise LoadFailure(f"{path}: not x86-64 (machine {e_machine})")
    if e_type != _ET_EXEC:
        raise LoadFailure(f"{path}: not a static executable (type {e_type}); "
                          "build fixtures with the pinned -no-pie flags")

    segments = []
    for i in range(e_phnum):
        off = e_phoff + i * e_phentsize
        if off + _PHDR.size > len(raw):
            raise LoadFailure(f"{path}: program header {i} out of file bounds")
        p_type, p_flags, p_offset, p_vaddr, _paddr, p_filesz, p_memsz, _align = _PHDR.unpack_from(raw, off)
        if p_type != _PT_LOAD:
            continue
        if p_offset + p_filesz > len(raw):
            raise LoadFailure(f"{path}: segment {i} data out of file bounds")
        segments.append(Segment(
            vaddr=p_vaddr,
            data=raw[p_offset:p_offset + p_filesz],
            memsz=p_memsz,
            flags=p_flags,
        ))
    if not segments:
        raise LoadFailure(f"{path}: no loadable segments")

    sections, symbols = _parse_sections(path, raw, e_shoff, e_shentsize, e_shnum, e_shstrndx)

    program = Program(
        path=path,
        entry=e_entry,
        segments=tuple(segments),
        sections=tuple(sections),
        symbols=symbols,
    )
    if not program.address_mapped(e_entry):
        raise LoadFailure(f"{path}: entry point {e_entry:#x} outside mapped segments")
    return program


def _parse_sections(path: str, raw: bytes, shoff: int, shentsize: int, shnum: int,
                    shstrndx: int) -> tuple[list[Section], dict[str, Symbol]]:
    headers = []
    for i in range(shnum):
        off = shoff + i * shentsize
        if off + _SHDR.size > len(raw):
            raise LoadFailure(f"{path}: section header {i} out of file bounds")
        headers.append(_SHDR.unpack_from(raw, off))

    def strtab(index: int) -> bytes:
        if not 0 <= index < len(headers):
            raise LoadFailure(f"{path}: string table index {index} out of range")
        _name, _type, _flags, _addr, offset, size, _link, _info, _align, _entsize = headers[index]
        return raw[offset:offset + size]

    def cstr(table: bytes, offset: int) -> str:
        end = table.find(b"\x00", offset)
        return table[offset:end if end >= 0 else len(table)].decode("utf-8", "replace")

    shstr = strtab(shstrndx) if shnum else b""
    sections: list[Section] = []
    symbols: dict[str, Symbol] = {}
    for header in headers:
        sh_name, sh_type, _flags, sh_addr, sh_offset, sh_size, sh_link, _info, _align, sh_entsize = header
        name = cstr(shstr, sh_name)
        sections.append(Section(name=name, addr=sh_addr, size=sh_size, offset=sh_offset))
        if sh_type != _SHT_SYMTAB or sh_entsize == 0:
            continue
        names = strtab(sh_link)
        for off in range(sh_offset, sh_offset + sh_size, sh_entsize):
            st_name, st_info, _other, _shndx, st_value, st_size = _SYM.unpack_from(raw, off)
            sym_name = cstr(names, st_name)
            if not sym_name:
                continue
            symbols[sym_name] = Symbol(
                name=sym_name,
                addr=st_value,
                size=st_size,
                is_func=(st_info & 0xF) == _STT_FUNC,
            )
    return sections, symbols
