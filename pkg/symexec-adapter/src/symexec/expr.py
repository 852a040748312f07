"""Bitvector expressions over symbolic stdin bytes.

Every value the machine computes is an Expr of explicit bit width;
branch conditions are BoolExprs. Nodes are immutable and compare
structurally, so two loads of unchanged memory yield equal
expressions, which is what lets (x != x) collapse without a solver.

The mk_* constructors fold constants on the spot and perform the
handful of structural simplifications that keep expressions small
through the mov/extend/store chains -O0 code produces (extract of
extend, extract of concat, extend of nothing). They are the only way
expressions should be built.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Union

__all__ = [
    "Expr", "Const", "Var", "BinOp", "UnOp", "ZExt", "SExt", "Extract", "Concat", "Ite",
    "BoolExpr", "BoolConst", "Cmp", "BoolNot", "BoolAnd", "BoolOr",
    "mk_const", "mk_binop", "mk_unop", "mk_zext", "mk_sext", "mk_extract", "mk_concat",
    "mk_ite", "mk_cmp", "mk_not", "mk_and", "mk_or",
    "TRUE", "FALSE", "evaluate", "evaluate_bool", "variables", "bool_variables", "render",
]

_BIN_OPS = frozenset({"add", "sub", "mul", "and", "or", "xor", "shl", "lshr", "ashr"})
_UN_OPS = frozenset({"not", "neg"})
_CMP_OPS = frozenset({"eq", "ne", "ult", "ule", "ugt", "uge", "slt", "sle", "sgt", "sge"})

# Comparisons that hold between any value and itself.
_REFLEXIVE_TRUE = frozenset({"eq", "ule", "uge", "sle", "sge"})
_REFLEXIVE_FALSE = frozenset({"ne", "ult", "ugt", "slt", "sgt"})


def _mask(bits: int) -> int:
    return (1 << bits) - 1


def _to_signed(value: int, bits: int) -> int:
    if value >= 1 << (bits - 1):
        return value - (1 << bits)
    return value


@dataclass(frozen=True)
class Const:
    value: int
    bits: int

    def __post_init__(self) -> None:
        if not 0 <= self.value <= _mask(self.bits):
            raise ValueError(f"constant {self.value:#x} does not fit in {self.bits} bits")


@dataclass(frozen=True)
class Var:
    name: str
    bits: int


@dataclass(frozen=True)
class BinOp:
    op: str
    a: "Expr"
    b: "Expr"
    bits: int


@dataclass(frozen=True)
class UnOp:
    op: str
    a: "Expr"
    bits: int


@dataclass(frozen=True)
class ZExt:
    a: "Expr"
    bits: int


@dataclass(frozen=True)
class SExt:
    a: "Expr"
    bits: int


@dataclass(frozen=True)
class Extract:
    """Bits [lo, lo+bits) of a, shifted down to position 0."""

    a: "Expr"
    lo: int
    bits: int


@dataclass(frozen=True)
class Concat:
    """Little-endian byte concatenation: parts[0] is the lowest byte."""

    parts: tuple["Expr", ...]
    bits: int


@dataclass(frozen=True)
class Ite:
    cond: "BoolExpr"
    then: "Expr"
    orelse: "Expr"
    bits: int


Expr = Union[Const, Var, BinOp, UnOp, ZExt, SExt, Extract, Concat, Ite]


@dataclass(frozen=True)
class BoolConst:
    value: bool


@dataclass(frozen=True)
class Cmp:
    op: str
    a: Expr
    b: Expr


@dataclass(frozen=True)
class BoolNot:
    a: "BoolExpr"


@dataclass(frozen=True)
class BoolAnd:
    parts: tuple["BoolExpr", ...]


@dataclass(frozen=True)
class BoolOr:
    parts: tuple["BoolExpr", ...]


BoolExpr = Union[BoolConst, Cmp, BoolNot, BoolAnd, BoolOr]

TRUE = BoolConst(True)
FALSE = BoolConst(False)


# -- constructors --------------------------------------------------------------

def mk_const(value: int, bits: int) -> Const:
    return Const(value & _mask(bits), bits)


def mk_binop(op: str, a: Expr, b: Expr) -> Expr:
    if op not in _BIN_OPS:
        raise ValueError(f"unknown binary op {op!r}")
    if a.bits != b.bits:
        raise ValueError(f"width mismatch in {op}: {a.bits} vs {b.bits}")
    bits = a.bits
    if isinstance(a, Const) and isinstance(b, Const):
        return mk_const(_apply_binop(op, a.value, b.value, bits), bits)
    # Identity elements keep -O0 register shuffles from snowballing.
    if isinstance(b, Const) and b.value == 0 and op in ("add", "sub", "or", "xor", "shl", "lshr", "ashr"):
        return a
    if isinstance(a, Const) and a.value == 0 and op in ("add", "or", "xor"):
        return b
    if op == "xor" and a == b:
        return mk_const(0, bits)
    if op == "sub" and a == b:
        return mk_const(0, bits)
    if op == "and" and a == b:
        return a
    if op == "or" and a == b:
        return a
    return BinOp(op, a, b, bits)


def _apply_binop(op: str, x: int, y: int, bits: int) -> int:
    if op == "add":
        return x + y
    if op == "sub":
        return x - y
    if op == "mul":
        return x * y
    if op == "and":
        return x & y
    if op == "or":
        return x | y
    if op == "xor":
        return x ^ y
    if op == "shl":
        return x << y if y < bits else 0
    if op == "lshr":
        return x >> y if y < bits else 0
    assert op == "ashr"
    shift = min(y, bits - 1)
    return _to_signed(x, bits) >> shift


def mk_unop(op: str, a: Expr) -> Expr:
    if op not in _UN_OPS:
        raise ValueError(f"unknown unary op {op!r}")
    if isinstance(a, Const):
        value = ~a.value if op == "not" else -a.value
        return mk_const(value, a.bits)
    return UnOp(op, a, a.bits)


def mk_zext(a: Expr, bits: int) -> Expr:
    if bits < a.bits:
        raise ValueError(f"zext narrows {a.bits} -> {bits}")
    if bits == a.bits:
        return a
    if isinstance(a, Const):
        return Const(a.value, bits)
    if isinstance(a, ZExt):
        return ZExt(a.a, bits)
    return ZExt(a, bits)


def mk_sext(a: Expr, bits: int) -> Expr:
    if bits < a.bits:
        raise ValueError(f"sext narrows {a.bits} -> {bits}")
    if bits == a.bits:
        return a
    if isinstance(a, Const):
        return mk_const(_to_signed(a.value, a.bits), bits)
    if isinstance(a, SExt):
        return SExt(a.a, bits)
    # Sign extension of a zero-extended value never sets the new bits.
    if isinstance(a, ZExt) and a.bits > a.a.bits:
        return ZExt(a.a, bits)
    return SExt(a, bits)


def mk_extract(a: Expr, lo: int, bits: int) -> Expr:
    if lo < 0 or lo + bits > a.bits:
        raise ValueError(f"extract [{lo}, {lo + bits}) out of {a.bits}-bit value")
    if lo == 0 and bits == a.bits:
        return a
    if isinstance(a, Const):
        return mk_const(a.value >> lo, bits)
    if isinstance(a, (ZExt, SExt)):
        inner = a.a
        if lo + bits <= inner.bits:
            return mk_extract(inner, lo, bits)
        if isinstance(a, ZExt) and lo >= inner.bits:
            return mk_const(0, bits)
    if isinstance(a, Concat) and lo % 8 == 0 and bits % 8 == 0:
        first = lo // 8
        count = bits // 8
        parts = a.parts[first:first + count]
        if all(p.bits == 8 for p in parts) and len(parts) == count:
            return mk_concat(parts)
    if isinstance(a, Extract):
        return mk_extract(a.a, a.lo + lo, bits)
    return Extract(a, lo, bits)


def mk_concat(parts: tuple[Expr, ...] | list[Expr]) -> Expr:
    parts = tuple(parts)
    if not parts:
        raise ValueError("empty concat")
    if len(parts) == 1:
        return parts[0]
    bits = sum(p.bits for p in parts)
    if all(isinstance(p, Const) for p in parts):
        value = 0
        shift = 0
        for p in parts:
            value |= p.value << shift  # type: ignore[union-attr]
            shift += p.bits
        return Const(value, bits)
    return Concat(parts, bits)


def mk_ite(cond: BoolExpr, then: Expr, orelse: Expr) -> Expr:
    if then.bits != orelse.bits:
        raise ValueError(f"ite arm widths differ: {then.bits} vs {orelse.bits}")
    if isinstance(cond, BoolConst):
        return then if cond.value else orelse
    if then == orelse:
        return then
    return Ite(cond, then, orelse, then.bits)


def mk_cmp(op: str, a: Expr, b: Expr) -> BoolExpr:
    if op not in _CMP_OPS:
        raise ValueError(f"unknown comparison {op!r}")
    if a.bits != b.bits:
        raise ValueError(f"width mismatch in {op}: {a.bits} vs {b.bits}")
    if isinstance(a, Const) and isinstance(b, Const):
        return BoolConst(_apply_cmp(op, a.value, b.value, a.bits))
    if a == b:
        if op in _REFLEXIVE_TRUE:
            return TRUE
        if op in _REFLEXIVE_FALSE:
            return FALSE
    return Cmp(op, a, b)


def _apply_cmp(op: str, x: int, y: int, bits: int) -> bool:
    if op in ("slt", "sle", "sgt", "sge"):
        x, y = _to_signed(x, bits), _to_signed(y, bits)
    if op == "eq":
        return x == y
    if op == "ne":
        return x != y
    if op in ("ult", "slt"):
        return x < y
    if op in ("ule", "sle"):
        return x <= y
    if op in ("ugt", "sgt"):
        return x > y
    assert op in ("uge", "sge")
    return x >= y


def mk_not(a: BoolExpr) -> BoolExpr:
    if isinstance(a, BoolConst):
        return BoolConst(not a.value)
    if isinstance(a, BoolNot):
        return a.a
    if isinstance(a, Cmp):
        flipped = {"eq": "ne", "ne": "eq", "ult": "uge", "uge": "ult", "ule": "ugt",
                   "ugt": "ule", "slt": "sge", "sge": "slt", "sle": "sgt", "sgt": "sle"}
        return Cmp(flipped[a.op], a.a, a.b)
    return BoolNot(a)


def mk_and(parts: list[BoolExpr] | tuple[BoolExpr, ...]) -> BoolExpr:
    kept: list[BoolExpr] = []
    for p in parts:
        if isinstance(p, BoolConst):
            if not p.value:
                return FALSE
            continue
        kept.append(p)
    if not kept:
        return TRUE
    if len(kept) == 1:
        return kept[0]
    return BoolAnd(tuple(kept))


def mk_or(parts: list[BoolExpr] | tuple[BoolExpr, ...]) -> BoolExpr:
    kept: list[BoolExpr] = []
    for p in parts:
        if isinstance(p, BoolConst):
            if p.value:
                return TRUE
            continue
        kept.append(p)
    if not kept:
        return FALSE
    if len(kept) == 1:
        return kept[0]
    return BoolOr(tuple(kept))


# -- evaluation ----------------------------------------------------------------

def evaluate(expr: Expr, env: dict[str, int]) -> int:
    """Concrete value of expr under a complete variable assignment."""
    if isinstance(expr, Const):
        return expr.value
    if isinstance(expr, Var):
        try:
            return env[expr.name] & _mask(expr.bits)
        except KeyError:
            raise KeyError(f"no binding for variable {expr.name!r}") from None
    if isinstance(expr, BinOp):
        return _apply_binop(expr.op, evaluate(expr.a, env), evaluate(expr.b, env), expr.bits) & _mask(expr.bits)
    if isinstance(expr, UnOp):
        inner = evaluate(expr.a, env)
        return (~inner if expr.op == "not" else -inner) & _mask(expr.bits)
    if isinstance(expr, ZExt):
        return evaluate(expr.a, env)
    if isinstance(expr, SExt):
        return _to_signed(evaluate(expr.a, env), expr.a.bits) & _mask(expr.bits)
    if isinstance(expr, Extract):
        return (evaluate(expr.a, env) >> expr.lo) & _mask(expr.bits)
    if isinstance(expr, Concat):
        value = 0
        shift = 0
        for part in expr.parts:
            value |= evaluate(part, env) << shift
            shift += part.bits
        return value
    assert isinstance(expr, Ite)
    return evaluate(expr.then if evaluate_bool(expr.cond, env) else expr.orelse, env)


def evaluate_bool(expr: BoolExpr, env: dict[str, int]) -> bool:
    if isinstance(expr, BoolConst):
        return expr.value
    if isinstance(expr, Cmp):
        return _apply_cmp(expr.op, evaluate(expr.a, env), evaluate(expr.b, env), expr.a.bits)
    if isinstance(expr, BoolNot):
        return not evaluate_bool(expr.a, env)
    if isinstance(expr, BoolAnd):
        return all(evaluate_bool(p, env) for p in expr.parts)
    assert isinstance(expr, BoolOr)
    return any(evaluate_bool(p, env) for p in expr.parts)


# -- inspection ----------------------------------------------------------------

def _walk(expr: Expr) -> Iterator[Expr]:
    yield expr
    if isinstance(expr, BinOp):
        yield from _walk(expr.a)
        yield from _walk(expr.b)
    elif isinstance(expr, (UnOp, ZExt, SExt, Extract)):
        yield from _walk(expr.a)
    elif isinstance(expr, Concat):
        for part in expr.parts:
            yield from _walk(part)
    elif isinstance(expr, Ite):
        # The guard's variables are collected by `variables` directly.
        yield from _walk(expr.then)
        yield from _walk(expr.orelse)


def variables(expr: Expr) -> set[str]:
    """Names of every Var reachable inside expr (including Ite guards)."""
    out: set[str] = set()
    for node in _walk(expr):
        if isinstance(node, Var):
            out.add(node.name)
        elif isinstance(node, Ite):
            out |= bool_variables(node.cond)
    return out


def bool_variables(expr: BoolExpr) -> set[str]:
    if isinstance(expr, BoolConst):
        return set()
    if isinstance(expr, Cmp):
        return variables(expr.a) | variables(expr.b)
    if isinstance(expr, BoolNot):
        return bool_variables(expr.a)
    assert isinstance(expr, (BoolAnd, BoolOr))
    out: set[str] = set()
    for part in expr.parts:
        out |= bool_variables(part)
    return out


def render(expr: Expr | BoolExpr) -> str:
    """Compact human-readable form, used in constraint summaries."""
    if isinstance(expr, Const):
        return f"{expr.value:#x}" if expr.value > 9 else str(expr.value)
    if isinstance(expr, Var):
        return expr.name
    if isinstance(expr, BinOp):
        return f"({render(expr.a)} {expr.op} {render(expr.b)})"
    if isinstance(expr, UnOp):
        return f"{expr.op}({render(expr.a)})"
    if isinstance(expr, ZExt):
        return render(expr.a)
    if isinstance(expr, SExt):
        return f"sext{expr.bits}({render(expr.a)})"
    if isinstance(expr, Extract):
        return f"{render(expr.a)}[{expr.lo}:{expr.lo + expr.bits}]"
    if isinstance(expr, Concat):
        return "cat(" + ", ".join(render(p) for p in expr.parts) + ")"
    if isinstance(expr, Ite):
        return f"ite({render(expr.cond)}, {render(expr.then)}, {render(expr.orelse)})"
    if isinstance(expr, BoolConst):
        return "true" if expr.value else "false"
    if isinstance(expr, Cmp):
        return f"({render(expr.a)} {expr.op} {render(expr.b)})"
    if isinstance(expr, BoolNot):
        return f"!({render(expr.a)})"
    if isinstance(expr, BoolAnd):
        return " & ".join(render(p) for p in expr.parts)
    assert isinstance(expr, BoolOr)
    return " | ".join(render(p) for p in expr.parts)
