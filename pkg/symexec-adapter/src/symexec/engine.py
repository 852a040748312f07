"""Solve orchestration: symbolic exploration driven toward one goal.

Two goal flavors. A path goal asks for stdin bytes that steer
execution onto a target address without ever touching an avoid
address; an output goal asks for stdin bytes that make the program's
entire stdout equal an expected byte string. Both answer with a
tri-state outcome: sat carrying concrete stdin, unsat only when every
symbolic path has been enumerated and none can meet the goal, timeout
when the budget ran out first.

No sat leaves this module unverified. Path answers are replayed
through the concrete emulator and must actually step onto the target
(and onto no avoid address); output answers re-execute the real binary
and its stdout must match byte for byte. A model that fails its check
raises VerificationFailed instead of returning a wrong answer.

Exploration is deterministic: depth first, fall-through successor
first, and the solver enumerates candidate bytes in ascending order,
so equal requests produce byte-equal outcomes.
"""

from __future__ import annotations

import subprocess
import time
from dataclasses import dataclass

from symexec import elf
from symexec.expr import BoolConst, Var, mk_cmp, mk_const
from symexec.machine import Machine, MachineState, run_concrete
from symexec.solver import Model, SolverTimeout
from symexec.solver import solve as solve_constraints

__all__ = [
    "AddressOutOfRange",
    "VerificationFailed",
    "SolveRequest",
    "SolveOutcome",
    "MODE_PATH",
    "MODE_OUTPUT",
    "STATUS_SAT",
    "STATUS_UNSAT",
    "STATUS_TIMEOUT",
    "DEFAULT_STDIN_CAP",
    "DEFAULT_TIME_BUDGET_S",
    "solve",
]

MODE_PATH = "path"
MODE_OUTPUT = "output"

STATUS_SAT = "sat"
STATUS_UNSAT = "unsat"
STATUS_TIMEOUT = "timeout"

DEFAULT_STDIN_CAP = 64
DEFAULT_TIME_BUDGET_S = 30.0


class AddressOutOfRange(Exception):
    """The requested target address is not mapped by the binary."""


class VerificationFailed(Exception):
    """A sat model failed its concrete re-check; an engine defect."""


@dataclass(frozen=True)
class SolveRequest:
    """One solve job, already parsed into engine terms."""

    binary: str
    mode: str
    target_addr: int | None = None
    avoid_addrs: tuple[int, ...] = ()
    expected_output: bytes | None = None
    stdin_length_cap: int = DEFAULT_STDIN_CAP
    time_budget_s: float = DEFAULT_TIME_BUDGET_S

    def __post_init__(self) -> None:
        if self.mode not in (MODE_PATH, MODE_OUTPUT):
            raise ValueError(f"unknown solve mode {self.mode!r}")
        if self.mode == MODE_PATH and self.target_addr is None:
            raise ValueError("path mode needs a target address")
        if self.mode == MODE_OUTPUT and not self.expected_output:
            raise ValueError("output mode needs nonempty expected output")
        if self.stdin_length_cap < 1:
            raise ValueError("stdin_length_cap must be at least 1")
        if self.time_budget_s <= 0:
            raise ValueError("time budget must be positive")


@dataclass(frozen=True)
class SolveOutcome:
    """Tri-state answer; stdin is present exactly on sat."""

    status: str
    stdin: bytes | None
    constraints_summary: str

    def __post_init__(self) -> None:
        if (self.status == STATUS_SAT) != (self.stdin is not None):
            raise ValueError("sat iff stdin is present")


@dataclass
class _SearchStats:
    paths_finished: int = 0
    paths_pruned: int = 0
    solver_calls: int = 0

    def render(self) -> str:
        return (f"{self.paths_finished} paths finished, "
                f"{self.paths_pruned} pruned, {self.solver_calls} solver calls")


def solve(request: SolveRequest) -> SolveOutcome:
    """Run one solve job start to finish on a fresh machine.

    Raises LoadFailure when the binary is not a loadable executable and
    AddressOutOfRange when a path goal names an unmapped target.
    EmulationError and VerificationFailed propagate: both mean the
    answer would be untrustworthy, never that the goal is unsat.
    """
    deadline = time.monotonic() + request.time_budget_s
    program = elf.load(request.binary)
    if request.mode == MODE_PATH:
        assert request.target_addr is not None
        if not program.address_mapped(request.target_addr):
            raise AddressOutOfRange(
                f"target {request.target_addr:#x} is outside the mapped range of {request.binary}")
    return _search(program, request, deadline)


def _search(program: elf.Program, request: SolveRequest, deadline: float) -> SolveOutcome:
    machine = Machine(program, stdin_cap=request.stdin_length_cap)
    avoid = frozenset(request.avoid_addrs)
    expected = request.expected_output
    stats = _SearchStats()
    work = [machine.initial_state()]
    while work:
        if time.monotonic() > deadline:
            return _timeout_outcome(stats)
        state = work.pop()
        if state.exited:
            stats.paths_finished += 1
            if request.mode == MODE_OUTPUT:
                found = _try_output_candidate(request, state, deadline, stats)
                if found is not None:
                    return found
            continue
        # Exited states never re-enter here, so rip is a real next
        # instruction; that is what reaching or avoiding an address means.
        if state.rip in avoid:
            stats.paths_pruned += 1
            continue
        if request.mode == MODE_PATH and state.rip == request.target_addr:
            found = _try_path_candidate(program, request, state, deadline, stats)
            if found is not None:
                return found
            stats.paths_pruned += 1  # contradictory path constraints: a ghost path
            continue
        if expected is not None and len(state.stdout) > len(expected):
            stats.paths_pruned += 1  # stdout only grows; overshoot can never match
            continue
        successors = machine.step(state)
        work.extend(reversed(successors))  # pop() then takes fall-through first
    return _unsat_outcome(request, stats)


def _try_path_candidate(program: elf.Program, request: SolveRequest, state: MachineState,
                        deadline: float, stats: _SearchStats) -> SolveOutcome | None:
    stats.solver_calls += 1
    try:
        model = solve_constraints(state.constraints, deadline=deadline)
    except SolverTimeout:
        return _timeout_outcome(stats)
    if not model.sat:
        return None
    stdin = _stdin_from_state(state, model)
    _verify_by_replay(program, stdin, request)
    summary = (f"sat: {len(stdin)} stdin bytes reach {request.target_addr:#x}; "
               f"{len(state.constraints)} branch constraints; {stats.render()}; "
               f"verified by concrete replay")
    return SolveOutcome(status=STATUS_SAT, stdin=stdin, constraints_summary=summary)


def _try_output_candidate(request: SolveRequest, state: MachineState,
                          deadline: float, stats: _SearchStats) -> SolveOutcome | None:
    expected = request.expected_output
    assert expected is not None
    if len(state.stdout) != len(expected):
        return None
    goal = list(state.constraints)
    for got, want in zip(state.stdout, expected):
        pin = mk_cmp("eq", got, mk_const(want, 8))
        if isinstance(pin, BoolConst):
            if not pin.value:
                return None  # a concrete stdout byte already disagrees
            continue
        goal.append(pin)
    stats.solver_calls += 1
    try:
        model = solve_constraints(goal, deadline=deadline)
    except SolverTimeout:
        return _timeout_outcome(stats)
    if not model.sat:
        return None
    stdin = _stdin_from_state(state, model)
    outcome = _verify_by_execution(request.binary, stdin, expected, deadline, stats)
    if outcome is not None:
        return outcome
    summary = (f"sat: {len(stdin)} stdin bytes print the expected {len(expected)} bytes; "
               f"{len(state.constraints)} branch constraints; {stats.render()}; "
               f"verified by re-executing the binary")
    return SolveOutcome(status=STATUS_SAT, stdin=stdin, constraints_summary=summary)


def _stdin_from_state(state: MachineState, model: Model) -> bytes:
    """Concretize every byte the program consumed along this path.

    Bytes the path never constrained default to zero, matching the
    solver's smallest-value convention, so outcomes stay deterministic.
    """
    assert model.assignment is not None
    out = bytearray()
    for byte in state.stdin_taken:
        if isinstance(byte, Var):
            out.append(model.assignment.get(byte.name, 0))
        else:
            out.append(byte.value)  # replayed or past-cap constant
    return bytes(out)


def _verify_by_replay(program: elf.Program, stdin: bytes, request: SolveRequest) -> None:
    watch = frozenset({request.target_addr} | set(request.avoid_addrs))
    _, hit = run_concrete(program, stdin, watch=watch)
    if request.target_addr not in hit:
        raise VerificationFailed(
            f"model stdin does not reach {request.target_addr:#x} under concrete replay")
    touched = hit & set(request.avoid_addrs)
    if touched:
        raise VerificationFailed(
            "model stdin crosses avoided addresses: "
            + ", ".join(f"{a:#x}" for a in sorted(touched)))


def _verify_by_execution(binary: str, stdin: bytes, expected: bytes,
                         deadline: float, stats: _SearchStats) -> SolveOutcome | None:
    """Run the real program on the model stdin; None means verified.

    A run that cannot finish inside the budget yields a timeout outcome
    rather than guessing; a finished run with different stdout is an
    engine defect and raises.
    """
    remaining = deadline - time.monotonic()
    if remaining <= 0:
        return _timeout_outcome(stats)
    try:
        proc = subprocess.run(
            [binary], input=stdin, stdout=subprocess.PIPE,
            stderr=subprocess.DEVNULL, timeout=remaining)
    except subprocess.TimeoutExpired:
        return _timeout_outcome(stats)
    if proc.stdout != expected:
        raise VerificationFailed(
            f"real execution printed {proc.stdout!r}, expected {expected!r}")
    return None


def _timeout_outcome(stats: _SearchStats) -> SolveOutcome:
    return SolveOutcome(
        status=STATUS_TIMEOUT, stdin=None,
        constraints_summary=f"timeout: budget exhausted; {stats.render()}")


def _unsat_outcome(request: SolveRequest, stats: _SearchStats) -> SolveOutcome:
    if request.mode == MODE_PATH:
        why = f"no feasible path reaches {request.target_addr:#x}"
    else:
        assert request.expected_output is not None
        why = f"no terminal path can print the expected {len(request.expected_output)} bytes"
    return SolveOutcome(
        status=STATUS_UNSAT, stdin=None,
        constraints_summary=f"unsat: state space exhausted; {why}; {stats.render()}")
