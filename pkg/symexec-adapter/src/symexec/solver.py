"""Finite-domain solver over 8-bit stdin variables.

Constraints arriving from path exploration are boolean expressions
over byte variables. Domains start at 0..255; constraints touching a
single variable prune by direct evaluation, the remainder is settled
by backtracking search with a smallest-domain-first ordering. Within
these domains the procedure is complete: it answers sat with a model
or unsat, never "don't know". It can only be cut short by the
deadline, which raises instead of guessing.

Models are deterministic: candidate values are tried in ascending
order and unconstrained variables settle at the smallest value left in
their domain, so equal constraint sets always produce equal models.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

from symexec.expr import BoolConst, BoolExpr, bool_variables, evaluate_bool

__all__ = ["Model", "SolverTimeout", "solve", "BYTE_DOMAIN"]

BYTE_DOMAIN = range(256)

# Deadline polls happen per candidate-value probe; this bounds the
# overshoot past the deadline to one evaluation.
_CHECK_EVERY = 64


class SolverTimeout(Exception):
    """The deadline expired before the search finished."""


@dataclass(frozen=True)
class Model:
    """A satisfying assignment, or the proof there is none."""

    sat: bool
    assignment: dict[str, int] | None = None

    def __post_init__(self) -> None:
        if self.sat != (self.assignment is not None):
            raise ValueError("sat iff an assignment is present")


UNSAT = Model(sat=False)


def solve(constraints: list[BoolExpr], deadline: float | None = None) -> Model:
    """Find a byte assignment satisfying every constraint.

    Raises SolverTimeout when time.monotonic() passes deadline. With no
    deadline the search always terminates: domains are finite.
    """
    pending: list[BoolExpr] = []
    for c in constraints:
        if isinstance(c, BoolConst):
            if not c.value:
                return UNSAT
            continue
        pending.append(c)

    by_var: dict[str, list[BoolExpr]] = {}
    multi: list[tuple[frozenset[str], BoolExpr]] = []
    for c in pending:
        names = bool_variables(c)
        if not names:
            # No variables and not folded to a constant: evaluate outright.
            if not evaluate_bool(c, {}):
                return UNSAT
            continue
        if len(names) == 1:
            by_var.setdefault(next(iter(names)), []).append(c)
        else:
            multi.append((frozenset(names), c))

    domains: dict[str, list[int]] = {}
    all_names: set[str] = set(by_var)
    for names, _ in multi:
        all_names |= names
    for name in all_names:
        domains[name] = list(BYTE_DOMAIN)

    # Unary constraints prune by brute evaluation; 256 probes per
    # variable per constraint is nothing at this scale.
    probes = 0
    for name, cs in by_var.items():
        kept = []
        for value in domains[name]:
            probes += 1
            if deadline is not None and probes % _CHECK_EVERY == 0 and time.monotonic() > deadline:
                raise SolverTimeout("deadline expired during domain pruning")
            if all(evaluate_bool(c, {name: value}) for c in cs):
                kept.append(value)
        if not kept:
            return UNSAT
        domains[name] = kept

    if not multi:
        return Model(sat=True, assignment={name: values[0] for name, values in domains.items()})

    # Backtracking over the variables the multi-var constraints touch.
    search_names = sorted({n for names, _ in multi for n in names},
                          key=lambda n: (len(domains[n]), n))
    assignment: dict[str, int] = {}

    def consistent() -> bool:
        for names, c in multi:
            if names <= assignment.keys():
                if not evaluate_bool(c, assignment):
                    return False
        return True

    def backtrack(index: int) -> bool:
        nonlocal probes
        if index == len(search_names):
            return True
        name = search_names[index]
        for value in domains[name]:
            probes += 1
            if deadline is not None and probes % _CHECK_EVERY == 0 and time.monotonic() > deadline:
                raise SolverTimeout("deadline expired during search")
            assignment[name] = value
            if consistent() and backtrack(index + 1):
                return True
            del assignment[name]
        return False

    if not backtrack(0):
        return UNSAT
    for name, values in domains.items():
        assignment.setdefault(name, values[0])
    return Model(sat=True, assignment=dict(assignment))
