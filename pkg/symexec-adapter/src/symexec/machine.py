"""Symbolic machine: state, instruction semantics, syscall model.

A MachineState holds registers and memory as bitvector expressions
plus the path constraints collected at branches. step() executes one
instruction and returns the successor states: one normally, two when a
conditional branch genuinely depends on symbolic input (feasibility is
the caller's concern; the machine only does semantics).

The environment model is deliberately small. Code is fetched from the
loaded segments (self-modifying code is out of scope), addresses must
be concrete, and the only kernel surface is read(2) from stdin,
write(2) to stdout/stderr, and exit(2)/exit_group(2). stdin bytes
materialize as fresh 8-bit variables up to the configured cap and as
zero bytes past it. Anything outside the model raises EmulationError
instead of producing wrong constraints.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from symexec import x86
from symexec.elf import Program
from symexec.expr import (
    FALSE,
    TRUE,
    BoolConst,
    BoolExpr,
    Const,
    Expr,
    Var,
    mk_binop,
    mk_cmp,
    mk_concat,
    mk_const,
    mk_extract,
    mk_ite,
    mk_not,
    mk_or,
    mk_sext,
    mk_unop,
    mk_zext,
)

__all__ = ["EmulationError", "MachineState", "Machine", "STACK_TOP", "STDIN_VAR_PREFIX"]

STACK_TOP = 0x7FFF_FFE0_0000
STDIN_VAR_PREFIX = "stdin_"

_SYS_READ = 0
_SYS_WRITE = 1
_SYS_EXIT = 60
_SYS_EXIT_GROUP = 231


class EmulationError(Exception):
    """The program stepped outside what the machine models."""


@dataclass
class _Flags:
    """Last flag-setting operation, kept symbolic until a jcc asks.

    kind selects which condition codes can be derived: 'sub' and 'add'
    carry full compare semantics, 'logic' has CF=OF=0 by definition,
    'result' (shifts, imul) only supports ZF/SF conditions.
    """

    kind: str
    a: Expr
    b: Expr
    result: Expr


@dataclass
class MachineState:
    regs: dict[str, Expr]
    rip: int
    mem: dict[int, Expr]
    constraints: list[BoolExpr] = field(default_factory=list)
    flags: _Flags | None = None
    stdin_taken: list[Expr] = field(default_factory=list)
    stdout: list[Expr] = field(default_factory=list)
    exited: bool = False
    exit_code: int | None = None
    steps: int = 0

    def clone(self) -> "MachineState":
        return MachineState(
            regs=dict(self.regs),
            rip=self.rip,
            mem=dict(self.mem),
            constraints=list(self.constraints),
            flags=self.flags,
            stdin_taken=list(self.stdin_taken),
            stdout=list(self.stdout),
            exited=self.exited,
            exit_code=self.exit_code,
            steps=self.steps,
        )


class Machine:
    """Shared execution context: the program, a decode cache, stdin policy.

    concrete_stdin switches the machine into replay mode: reads hand
    out those exact bytes as constants, so every branch folds and the
    run is an ordinary emulation. That is what concrete re-verification
    of solver answers uses.
    """

    def __init__(self, program: Program, stdin_cap: int = 64,
                 concrete_stdin: bytes | None = None):
        if stdin_cap < 1:
            raise ValueError("stdin_cap must be at least 1")
        self.program = program
        self.stdin_cap = stdin_cap
        self.concrete_stdin = concrete_stdin
        self._insn_cache: dict[int, x86.Insn] = {}

    # -- state construction ------------------------------------------------------

    def initial_state(self) -> MachineState:
        regs: dict[str, Expr] = {name: mk_const(0, 64) for name in x86.REGS64}
        regs["rsp"] = mk_const(STACK_TOP, 64)
        return MachineState(regs=regs, rip=self.program.entry, mem={})

    # -- memory ------------------------------------------------------------------

    def _backing_byte(self, addr: int) -> Expr:
        for seg in self.program.segments:
            if seg.contains(addr):
                offset = addr - seg.vaddr
                if offset < len(seg.data):
                    return mk_const(seg.data[offset], 8)
                return mk_const(0, 8)  # .bss tail
        return mk_const(0, 8)  # untouched stack/heap reads as zero

    def read_mem(self, state: MachineState, addr: int, nbytes: int) -> Expr:
        parts = []
        for i in range(nbytes):
            a = (addr + i) & 0xFFFF_FFFF_FFFF_FFFF
            parts.append(state.mem.get(a) or self._backing_byte(a))
        return mk_concat(parts)

    def write_mem(self, state: MachineState, addr: int, value: Expr) -> None:
        if value.bits % 8:
            raise EmulationError(f"store of {value.bits} bits is not byte-sized")
        for i in range(value.bits // 8):
            a = (addr + i) & 0xFFFF_FFFF_FFFF_FFFF
            state.mem[a] = mk_extract(value, i * 8, 8)

    def _fetch(self, addr: int) -> x86.Insn:
        insn = self._insn_cache.get(addr)
        if insn is not None:
            return insn
        for seg in self.program.segments:
            if seg.executable and seg.contains(addr):
                insn = x86.decode(seg.data, addr - seg.vaddr, addr)
                self._insn_cache[addr] = insn
                return insn
        raise EmulationError(f"instruction fetch outside executable segments: {addr:#x}")

    # -- operand plumbing ----------------------------------------------------------

    def _concrete(self, expr: Expr, what: str) -> int:
        if isinstance(expr, Const):
            return expr.value
        raise EmulationError(f"{what} is symbolic; the machine only models concrete {what}s")

    def _effective_addr(self, state: MachineState, op: x86.MemOp) -> int:
        addr = op.disp
        if op.base is not None:
            addr += self._concrete(state.regs[op.base], "address")
        if op.index is not None:
            addr += self._concrete(state.regs[op.index], "address") * op.scale
        return addr & 0xFFFF_FFFF_FFFF_FFFF

    def read_operand(self, state: MachineState, op) -> Expr:
        if isinstance(op, x86.RegOp):
            return mk_extract(state.regs[op.reg], 0, op.size)
        if isinstance(op, x86.ImmOp):
            return mk_const(op.value, op.size)
        assert isinstance(op, x86.MemOp)
        return self.read_mem(state, self._effective_addr(state, op), op.size // 8)

    def write_operand(self, state: MachineState, op, value: Expr) -> None:
        if isinstance(op, x86.MemOp):
            self.write_mem(state, self._effective_addr(state, op), value)
            return
        assert isinstance(op, x86.RegOp)
        old = state.regs[op.reg]
        if op.size == 64:
            state.regs[op.reg] = value
        elif op.size == 32:
            # Writes to 32-bit registers zero the upper half.
            state.regs[op.reg] = mk_zext(value, 64)
        else:
            state.regs[op.reg] = mk_concat((value, mk_extract(old, op.size, 64 - op.size)))

    # -- flags -> branch conditions --------------------------------------------------

    def _condition(self, cc: str, flags: _Flags | None) -> BoolExpr:
        if flags is None:
            raise EmulationError(f"j{cc}/set{cc} with no preceding flag-setting instruction")
        a, b, result = flags.a, flags.b, flags.result
        zero = mk_const(0, result.bits)
        if flags.kind == "sub":
            table = {
                "e": mk_cmp("eq", a, b), "ne": mk_cmp("ne", a, b),
                "b": mk_cmp("ult", a, b), "ae": mk_cmp("uge", a, b),
                "be": mk_cmp("ule", a, b), "a": mk_cmp("ugt", a, b),
                "l": mk_cmp("slt", a, b), "ge": mk_cmp("sge", a, b),
                "le": mk_cmp("sle", a, b), "g": mk_cmp("sgt", a, b),
                "s": mk_cmp("slt", result, zero), "ns": mk_cmp("sge", result, zero),
            }
        elif flags.kind == "logic":
            # CF and OF are cleared by and/or/xor/test.
            table = {
                "e": mk_cmp("eq", result, zero), "ne": mk_cmp("ne", result, zero),
                "s": mk_cmp("slt", result, zero), "ns": mk_cmp("sge", result, zero),
                "b": FALSE, "ae": TRUE,
                "be": mk_cmp("eq", result, zero), "a": mk_cmp("ne", result, zero),
                "l": mk_cmp("slt", result, zero), "ge": mk_cmp("sge", result, zero),
                "le": mk_or([mk_cmp("eq", result, zero), mk_cmp("slt", result, zero)]),
                "g": mk_cmp("sgt", result, zero),
            }
        elif flags.kind == "add":
            full = mk_binop("add", mk_zext(a, result.bits + 1), mk_zext(b, result.bits + 1))
            table = {
                "e": mk_cmp("eq", result, zero), "ne": mk_cmp("ne", result, zero),
                "s": mk_cmp("slt", result, zero), "ns": mk_cmp("sge", result, zero),
                "b": mk_cmp("ugt", full, mk_zext(mk_const((1 << result.bits) - 1, result.bits), result.bits + 1)),
                "ae": mk_cmp("ule", full, mk_zext(mk_const((1 << result.bits) - 1, result.bits), result.bits + 1)),
            }
        else:  # 'result': shifts and imul expose only ZF/SF soundly
            table = {
                "e": mk_cmp("eq", result, zero), "ne": mk_cmp("ne", result, zero),
                "s": mk_cmp("slt", result, zero), "ns": mk_cmp("sge", result, zero),
            }
        cond = table.get(cc)
        if cond is None:
            raise EmulationError(f"condition {cc!r} unsupported after a {flags.kind} operation")
        return cond

    # -- stepping -----------------------------------------------------------------

    def step(self, state: MachineState) -> list[MachineState]:
        """Execute one instruction; returns successor states."""
        if state.exited:
            return [state]
        insn = self._fetch(state.rip)
        state.steps += 1
        state.rip = insn.end  # fall-through default; control flow overrides
        m = insn.mnem

        if m in ("nop", "endbr64"):
            return [state]

        if m == "mov":
            self.write_operand(state, insn.ops[0], self.read_operand(state, insn.ops[1]))
            return [state]
        if m == "movzx":
            value = mk_zext(self.read_operand(state, insn.ops[1]), insn.ops[0].size)
            self.write_operand(state, insn.ops[0], value)
            return [state]
        if m == "movsx":
            value = mk_sext(self.read_operand(state, insn.ops[1]), insn.ops[0].size)
            self.write_operand(state, insn.ops[0], value)
            return [state]
        if m == "movsxd":
            value = mk_sext(self.read_operand(state, insn.ops[1]), 64)
            self.write_operand(state, insn.ops[0], value)
            return [state]
        if m == "cdqe":
            state.regs["rax"] = mk_sext(mk_extract(state.regs["rax"], 0, 32), 64)
            return [state]
        if m == "cwde":
            value = mk_sext(mk_extract(state.regs["rax"], 0, 16), 32)
            state.regs["rax"] = mk_zext(value, 64)
            return [state]
        if m == "lea":
            addr = self._effective_addr(state, insn.ops[1])
            self.write_operand(state, insn.ops[0], mk_const(addr, insn.ops[0].size))
            return [state]

        if m in ("add", "sub", "and", "or", "xor"):
            a = self.read_operand(state, insn.ops[0])
            b = self.read_operand(state, insn.ops[1])
            result = mk_binop(m, a, b)
            self.write_operand(state, insn.ops[0], result)
            kind = {"add": "add", "sub": "sub"}.get(m, "logic")
            state.flags = _Flags(kind, a, b, result)
            return [state]
        if m == "cmp":
            a = self.read_operand(state, insn.ops[0])
            b = self.read_operand(state, insn.ops[1])
            state.flags = _Flags("sub", a, b, mk_binop("sub", a, b))
            return [state]
        if m == "test":
            a = self.read_operand(state, insn.ops[0])
            b = self.read_operand(state, insn.ops[1])
            state.flags = _Flags("logic", a, b, mk_binop("and", a, b))
            return [state]
        if m == "not":
            self.write_operand(state, insn.ops[0], mk_unop("not", self.read_operand(state, insn.ops[0])))
            return [state]  # not leaves flags alone
        if m == "neg":
            a = self.read_operand(state, insn.ops[0])
            zero = mk_const(0, a.bits)
            result = mk_binop("sub", zero, a)
            self.write_operand(state, insn.ops[0], result)
            state.flags = _Flags("sub", zero, a, result)
            return [state]
        if m == "imul":
            a = self.read_operand(state, insn.ops[0])
            b = self.read_operand(state, insn.ops[1])
            result = mk_binop("mul", a, b)
            self.write_operand(state, insn.ops[0], result)
            state.flags = _Flags("result", a, b, result)
            return [state]
        if m in ("shl", "shr", "sar"):
            a = self.read_operand(state, insn.ops[0])
            count = insn.ops[1].value & (63 if a.bits == 64 else 31)
            op_name = {"shl": "shl", "shr": "lshr", "sar": "ashr"}[m]
            result = mk_binop(op_name, a, mk_const(count, a.bits))
            self.write_operand(state, insn.ops[0], result)
            state.flags = _Flags("result", a, mk_const(count, a.bits), result)
            return [state]

        if m == "push":
            rsp = self._concrete(state.regs["rsp"], "stack pointer") - 8
            state.regs["rsp"] = mk_const(rsp, 64)
            self.write_mem(state, rsp, self.read_operand(state, insn.ops[0]))
            return [state]
        if m == "pop":
            rsp = self._concrete(state.regs["rsp"], "stack pointer")
            self.write_operand(state, insn.ops[0], self.read_mem(state, rsp, 8))
            state.regs["rsp"] = mk_const(rsp + 8, 64)
            return [state]
        if m == "call":
            rsp = self._concrete(state.regs["rsp"], "stack pointer") - 8
            state.regs["rsp"] = mk_const(rsp, 64)
            self.write_mem(state, rsp, mk_const(insn.end, 64))
            state.rip = insn.ops[0].value
            return [state]
        if m == "ret":
            rsp = self._concrete(state.regs["rsp"], "stack pointer")
            state.rip = self._concrete(self.read_mem(state, rsp, 8), "return address")
            state.regs["rsp"] = mk_const(rsp + 8, 64)
            return [state]
        if m == "leave":
            rbp = self._concrete(state.regs["rbp"], "frame pointer")
            state.regs["rbp"] = self.read_mem(state, rbp, 8)
            state.regs["rsp"] = mk_const(rbp + 8, 64)
            return [state]

        if m == "jmp":
            state.rip = insn.ops[0].value
            return [state]
        if m.startswith("j"):
            cond = self._condition(m[1:], state.flags)
            return self._branch(state, cond, insn.ops[0].value, insn.end)
        if m.startswith("set"):
            cond = self._condition(m[3:], state.flags)
            self.write_operand(state, insn.ops[0], mk_ite(cond, mk_const(1, 8), mk_const(0, 8)))
            return [state]

        if m == "syscall":
            return [self._syscall(state)]

        raise EmulationError(f"no semantics for {m} at {insn.addr:#x}")

    def _branch(self, state: MachineState, cond: BoolExpr, taken: int,
                fallthrough: int) -> list[MachineState]:
        if isinstance(cond, BoolConst):
            state.rip = taken if cond.value else fallthrough
            return [state]
        taken_state = state.clone()
        taken_state.rip = taken
        taken_state.constraints.append(cond)
        state.rip = fallthrough
        state.constraints.append(mk_not(cond))
        # Fall-through first keeps exploration order stable and favors
        # straight-line progress.
        return [state, taken_state]

    # -- syscalls ----------------------------------------------------------------

    def _syscall(self, state: MachineState) -> MachineState:
        number = self._concrete(state.regs["rax"], "syscall number")
        if number == _SYS_READ:
            fd = self._concrete(state.regs["rdi"], "file descriptor")
            buf = self._concrete(state.regs["rsi"], "buffer address")
            count = self._concrete(state.regs["rdx"], "read length")
            if fd == 0:
                for i in range(count):
                    self.write_mem(state, buf + i, self._next_stdin_byte(state))
                state.regs["rax"] = mk_const(count, 64)
            else:
                state.regs["rax"] = mk_const(0, 64)
            return state
        if number == _SYS_WRITE:
            fd = self._concrete(state.regs["rdi"], "file descriptor")
            buf = self._concrete(state.regs["rsi"], "buffer address")
            count = self._concrete(state.regs["rdx"], "write length")
            if fd == 1:
                for i in range(count):
                    state.stdout.append(self.read_mem(state, buf + i, 1))
            state.regs["rax"] = mk_const(count, 64)
            return state
        if number in (_SYS_EXIT, _SYS_EXIT_GROUP):
            state.exited = True
            state.exit_code = self._concrete(
                mk_extract(state.regs["rdi"], 0, 8), "exit code")
            return state
        raise EmulationError(f"syscall {number} is outside the machine's model")

    def _next_stdin_byte(self, state: MachineState) -> Expr:
        index = len(state.stdin_taken)
        if self.concrete_stdin is not None:
            value = self.concrete_stdin[index] if index < len(self.concrete_stdin) else 0
            byte: Expr = mk_const(value, 8)
        elif index < self.stdin_cap:
            byte = Var(f"{STDIN_VAR_PREFIX}{index}", 8)
        else:
            # Past the cap stdin is pinned to zero so models stay finite.
            byte = mk_const(0, 8)
        state.stdin_taken.append(byte)
        return byte


def run_concrete(program: Program, stdin: bytes, max_steps: int = 1_000_000,
                 watch: frozenset[int] = frozenset()) -> tuple[MachineState, set[int]]:
    """Replay the program with fixed stdin; returns (final state, watched
    addresses that were hit). Used for in-engine verification of models."""
    machine = Machine(program, stdin_cap=max(1, len(stdin)), concrete_stdin=stdin)
    state = machine.initial_state()
    hit: set[int] = set()
    # An exited state's rip is just the address after the exit syscall
    # (often the next function), so only live states count as hits.
    while not state.exited and state.steps < max_steps:
        if state.rip in watch:
            hit.add(state.rip)
        successors = machine.step(state)
        if len(successors) != 1:
            raise EmulationError("concrete replay forked; stdin was not fully concrete")
        state = successors[0]
    if not state.exited and state.rip in watch:
        hit.add(state.rip)
    return state, hit
