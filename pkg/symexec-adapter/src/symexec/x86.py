"""x86-64 decoder for the instruction subset the pinned fixtures use.

gcc at -O0 with the fixture flags emits a compact, predictable subset:
mov/movzx/movsx family, lea, the classic ALU group, compare/test,
short and near jumps, call/ret/leave, setcc, push/pop, syscall, and
nop padding. This decoder covers that subset plus a safety margin; any
byte sequence outside it raises DecodeError with the offending address
instead of guessing, because a misdecoded instruction would silently
corrupt every constraint derived after it.

High-byte registers (ah..bh), 16-bit operand paths beyond nop padding,
and indirect branches are deliberately out of scope.
"""

from __future__ import annotations

from dataclasses import dataclass

__all__ = ["DecodeError", "RegOp", "ImmOp", "MemOp", "Insn", "decode", "linear_sweep", "REGS64"]

REGS64 = (
    "rax", "rcx", "rdx", "rbx", "rsp", "rbp", "rsi", "rdi",
    "r8", "r9", "r10", "r11", "r12", "r13", "r14", "r15",
)

_SEGMENT_PREFIXES = frozenset({0x26, 0x2E, 0x36, 0x3E, 0x64, 0x65})

# Condition-code suffixes indexed by the opcode low nibble (jcc/setcc).
_CC_NAMES = ("o", "no", "b", "ae", "e", "ne", "be", "a",
             "s", "ns", "p", "np", "l", "ge", "le", "g")

# Group-1 ALU operations indexed by the ModRM reg field.
_GROUP1 = ("add", "or", "adc", "sbb", "and", "sub", "xor", "cmp")

# ALU opcodes 0x00..0x3B share one layout: base+0/1 store, base+2/3 load.
_ALU_BY_BASE = {0x00: "add", 0x08: "or", 0x10: "adc", 0x18: "sbb",
                0x20: "and", 0x28: "sub", 0x30: "xor", 0x38: "cmp"}

_SHIFT_GROUP = {4: "shl", 5: "shr", 7: "sar"}


class DecodeError(Exception):
    def __init__(self, addr: int, reason: str):
        super().__init__(f"cannot decode at {addr:#x}: {reason}")
        self.addr = addr
        self.reason = reason


@dataclass(frozen=True)
class RegOp:
    """A register operand. reg is the canonical 64-bit name; size says
    which low slice (8/16/32/64 bits) the instruction touches."""

    reg: str
    size: int


@dataclass(frozen=True)
class ImmOp:
    value: int
    size: int


@dataclass(frozen=True)
class MemOp:
    size: int
    base: str | None = None
    index: str | None = None
    scale: int = 1
    disp: int = 0


@dataclass(frozen=True)
class Insn:
    addr: int
    length: int
    mnem: str
    ops: tuple[RegOp | ImmOp | MemOp, ...] = ()

    @property
    def end(self) -> int:
        return self.addr + self.length


class _Reader:
    def __init__(self, code: bytes, pos: int, addr: int):
        self.code = code
        self.pos = pos
        self.start = pos
        self.addr = addr

    def u8(self) -> int:
        if self.pos >= len(self.code):
            raise DecodeError(self.addr, "ran past end of code")
        value = self.code[self.pos]
        self.pos += 1
        return value

    def peek(self) -> int:
        if self.pos >= len(self.code):
            raise DecodeError(self.addr, "ran past end of code")
        return self.code[self.pos]

    def bytes(self, n: int) -> bytes:
        if self.pos + n > len(self.code):
            raise DecodeError(self.addr, "ran past end of code")
        chunk = self.code[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def s8(self) -> int:
        return int.from_bytes(self.bytes(1), "little", signed=True)

    def s32(self) -> int:
        return int.from_bytes(self.bytes(4), "little", signed=True)

    def u32(self) -> int:
        return int.from_bytes(self.bytes(4), "little")

    def u64(self) -> int:
        return int.from_bytes(self.bytes(8), "little")

    def length(self) -> int:
        return self.pos - self.start


@dataclass
class _Rex:
    w: bool = False
    r: bool = False
    x: bool = False
    b: bool = False
    present: bool = False


def _reg_name(index: int) -> str:
    return REGS64[index]


def _reg_op(index: int, size: int, rex_present: bool, addr: int) -> RegOp:
    if size == 8 and not rex_present and 4 <= index <= 7:
        raise DecodeError(addr, f"high-byte register encoding {index} unsupported")
    return RegOp(_reg_name(index), size)


def _decode_modrm(r: _Reader, rex: _Rex, opsize: int, rm_size: int | None = None):
    """Returns (reg_index, rm_operand). rm_size overrides the r/m width
    (movzx/movsx read a narrower source than they write)."""
    modrm = r.u8()
    mod = modrm >> 6
    reg = ((modrm >> 3) & 7) | (8 if rex.r else 0)
    rm = modrm & 7
    size = rm_size if rm_size is not None else opsize

    if mod == 3:
        return reg, _reg_op(rm | (8 if rex.b else 0), size, rex.present, r.addr)

    base: str | None = None
    index: str | None = None
    scale = 1
    disp = 0
    rip_rel = False

    if rm == 4:
        sib = r.u8()
        scale = 1 << (sib >> 6)
        index_bits = ((sib >> 3) & 7) | (8 if rex.x else 0)
        base_bits = (sib & 7) | (8 if rex.b else 0)
        if index_bits != 4:  # rsp can never be an index
            index = _reg_name(index_bits)
        if (sib & 7) == 5 and mod == 0:
            disp = r.s32()
        else:
            base = _reg_name(base_bits)
    elif rm == 5 and mod == 0:
        rip_rel = True
        disp = r.s32()
    else:
        base = _reg_name(rm | (8 if rex.b else 0))

    if mod == 1:
        disp += r.s8()
    elif mod == 2:
        disp += r.s32()

    if rip_rel:
        # Displacement is from the end of the instruction; the caller
        # patches it once the total length is known.
        return reg, MemOp(size=size, base="rip", disp=disp)
    return reg, MemOp(size=size, base=base, index=index, scale=scale, disp=disp)


def _fix_rip(op, insn_end: int):
    if isinstance(op, MemOp) and op.base == "rip":
        return MemOp(size=op.size, base=None, index=None, scale=1, disp=op.disp + insn_end)
    return op


def decode(code: bytes, pos: int, addr: int) -> Insn:
    """Decode one instruction from code[pos:] located at addr."""
    r = _Reader(code, pos, addr)

    opsize_override = False
    rex = _Rex()
    while True:
        b = r.peek()
        if b == 0x66:
            opsize_override = True
            r.u8()
        elif b in _SEGMENT_PREFIXES:
            r.u8()
        elif b == 0xF3:
            # Only the endbr64 marker and rep-nop carry F3 in this subset.
            r.u8()
            if code[r.pos:r.pos + 3] == b"\x0f\x1e\xfa":
                r.bytes(3)
                return Insn(addr, r.length(), "endbr64")
            if r.peek() == 0x90:
                r.u8()
                return Insn(addr, r.length(), "nop")
            raise DecodeError(addr, "F3 prefix outside endbr64/pause")
        elif 0x40 <= b <= 0x4F:
            v = r.u8()
            rex = _Rex(w=bool(v & 8), r=bool(v & 4), x=bool(v & 2), b=bool(v & 1), present=True)
            break
        else:
            break

    opsize = 64 if rex.w else (16 if opsize_override else 32)
    op = r.u8()

    def finish(mnem: str, *ops) -> Insn:
        length = r.length()
        fixed = tuple(_fix_rip(o, addr + length) for o in ops)
        return Insn(addr, length, mnem, fixed)

    # -- one-byte opcodes ------------------------------------------------------

    if 0x50 <= op <= 0x57:
        return finish("push", _reg_op((op - 0x50) | (8 if rex.b else 0), 64, True, addr))
    if 0x58 <= op <= 0x5F:
        return finish("pop", _reg_op((op - 0x58) | (8 if rex.b else 0), 64, True, addr))

    base = op & 0xF8
    if base in _ALU_BY_BASE and (op & 7) <= 3:
        mnem = _ALU_BY_BASE[base]
        if mnem in ("adc", "sbb"):  # no carry-in semantics downstream
            raise DecodeError(addr, f"{mnem} unsupported")
        form = op & 7
        width = 8 if form in (0, 2) else opsize
        reg_idx, rm_op = _decode_modrm(r, rex, width)
        reg_op = _reg_op(reg_idx, width, rex.present, addr)
        if form in (0, 1):  # r/m <- reg
            return finish(mnem, rm_op, reg_op)
        return finish(mnem, reg_op, rm_op)  # reg <- r/m
    if base in _ALU_BY_BASE and (op & 7) in (4, 5):
        mnem = _ALU_BY_BASE[base]
        if mnem in ("adc", "sbb"):
            raise DecodeError(addr, f"{mnem} unsupported")
        if (op & 7) == 4:  # al, imm8
            return finish(mnem, RegOp("rax", 8), ImmOp(r.s8(), 8))
        return finish(mnem, RegOp("rax", opsize), ImmOp(r.s32(), opsize))

    if op in (0x80, 0x81, 0x83):
        width = 8 if op == 0x80 else opsize
        reg_idx, rm_op = _decode_modrm(r, rex, width)
        mnem = _GROUP1[reg_idx & 7]
        if mnem in ("adc", "sbb"):
            raise DecodeError(addr, f"{mnem} unsupported")
        imm = r.s8() if op in (0x80, 0x83) else r.s32()
        return finish(mnem, rm_op, ImmOp(imm, width))

    if op in (0x84, 0x85):
        width = 8 if op == 0x84 else opsize
        reg_idx, rm_op = _decode_modrm(r, rex, width)
        return finish("test", rm_op, _reg_op(reg_idx, width, rex.present, addr))
    if op in (0xA8, 0xA9):
        width = 8 if op == 0xA8 else opsize
        imm = r.s8() if op == 0xA8 else r.s32()
        return finish("test", RegOp("rax", width), ImmOp(imm, width))

    if op in (0x88, 0x89, 0x8A, 0x8B):
        width = 8 if op in (0x88, 0x8A) else opsize
        reg_idx, rm_op = _decode_modrm(r, rex, width)
        reg_op = _reg_op(reg_idx, width, rex.present, addr)
        if op in (0x88, 0x89):
            return finish("mov", rm_op, reg_op)
        return finish("mov", reg_op, rm_op)

    if op == 0x8D:
        reg_idx, rm_op = _decode_modrm(r, rex, opsize)
        if not isinstance(rm_op, MemOp):
            raise DecodeError(addr, "lea needs a memory operand")
        return finish("lea", _reg_op(reg_idx, opsize, rex.present, addr), rm_op)

    if op == 0x63:
        reg_idx, rm_op = _decode_modrm(r, rex, 64, rm_size=32)
        return finish("movsxd", _reg_op(reg_idx, 64, rex.present, addr), rm_op)

    if op == 0x98:
        return finish("cdqe" if rex.w else "cwde")

    if 0xB8 <= op <= 0xBF:
        reg_op = _reg_op((op - 0xB8) | (8 if rex.b else 0), opsize, rex.present, addr)
        if rex.w:
            return finish("mov", reg_op, ImmOp(r.u64(), 64))
        return finish("mov", reg_op, ImmOp(r.u32(), 32))
    if 0xB0 <= op <= 0xB7:
        reg_op = _reg_op((op - 0xB0) | (8 if rex.b else 0), 8, rex.present, addr)
        return finish("mov", reg_op, ImmOp(r.u8(), 8))

    if op in (0xC6, 0xC7):
        width = 8 if op == 0xC6 else opsize
        reg_idx, rm_op = _decode_modrm(r, rex, width)
        if reg_idx & 7:
            raise DecodeError(addr, f"group-11 /{reg_idx & 7} unsupported")
        imm = r.s8() if op == 0xC6 else r.s32()
        return finish("mov", rm_op, ImmOp(imm, width))

    if op in (0xC0, 0xC1, 0xD0, 0xD1):
        width = 8 if op in (0xC0, 0xD0) else opsize
        reg_idx, rm_op = _decode_modrm(r, rex, width)
        mnem = _SHIFT_GROUP.get(reg_idx & 7)
        if mnem is None:
            raise DecodeError(addr, f"shift group /{reg_idx & 7} unsupported")
        count = r.u8() if op in (0xC0, 0xC1) else 1
        return finish(mnem, rm_op, ImmOp(count, 8))

    if op in (0xF6, 0xF7):
        width = 8 if op == 0xF6 else opsize
        reg_idx, rm_op = _decode_modrm(r, rex, width)
        sub = reg_idx & 7
        if sub == 0:
            imm = r.s8() if op == 0xF6 else r.s32()
            return finish("test", rm_op, ImmOp(imm, width))
        if sub == 2:
            return finish("not", rm_op)
        if sub == 3:
            return finish("neg", rm_op)
        raise DecodeError(addr, f"group-3 /{sub} unsupported")

    if 0x70 <= op <= 0x7F:
        rel = r.s8()
        return finish("j" + _CC_NAMES[op & 0xF], ImmOp(addr + r.length() + rel, 64))
    if op == 0xEB:
        rel = r.s8()
        return finish("jmp", ImmOp(addr + r.length() + rel, 64))
    if op == 0xE9:
        rel = r.s32()
        return finish("jmp", ImmOp(addr + r.length() + rel, 64))
    if op == 0xE8:
        rel = r.s32()
        return finish("call", ImmOp(addr + r.length() + rel, 64))

    if op == 0xC3:
        return finish("ret")
    if op == 0xC9:
        return finish("leave")
    if op == 0x90:
        return finish("nop")
    if op == 0xF4:
        return finish("hlt")
    if op == 0xCC:
        return finish("int3")

    # -- two-byte opcodes ------------------------------------------------------

    if op == 0x0F:
        op2 = r.u8()
        if op2 == 0x05:
            return finish("syscall")
        if op2 == 0x1E and r.peek() == 0xFA:
            r.u8()
            return finish("endbr64")
        if op2 == 0x1F:
            _reg_idx, _rm = _decode_modrm(r, rex, opsize)
            return finish("nop")
        if op2 in (0xB6, 0xB7, 0xBE, 0xBF):
            src_size = 8 if op2 in (0xB6, 0xBE) else 16
            mnem = "movzx" if op2 in (0xB6, 0xB7) else "movsx"
            reg_idx, rm_op = _decode_modrm(r, rex, opsize, rm_size=src_size)
            return finish(mnem, _reg_op(reg_idx, opsize, rex.present, addr), rm_op)
        if op2 == 0xAF:
            reg_idx, rm_op = _decode_modrm(r, rex, opsize)
            return finish("imul", _reg_op(reg_idx, opsize, rex.present, addr), rm_op)
        if 0x80 <= op2 <= 0x8F:
            rel = r.s32()
            return finish("j" + _CC_NAMES[op2 & 0xF], ImmOp(addr + r.length() + rel, 64))
        if 0x90 <= op2 <= 0x9F:
            _reg_idx, rm_op = _decode_modrm(r, rex, 8)
            return finish("set" + _CC_NAMES[op2 & 0xF], rm_op)
        raise DecodeError(addr, f"two-byte opcode 0f {op2:02x} unsupported")

    raise DecodeError(addr, f"opcode {op:02x} unsupported")


def linear_sweep(code: bytes, addr: int) -> list[Insn]:
    """Decode a byte range front to back (for tests and diagnostics)."""
    out: list[Insn] = []
    pos = 0
    while pos < len(code):
        insn = decode(code, pos, addr + pos)
        out.append(insn)
        pos += insn.length
    return out
