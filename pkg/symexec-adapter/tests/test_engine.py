"""End-to-end solving on the fixtures.

The crackme's key never appears in its binary, so recovering it is
evidence the whole stack works: decode, symbolic stepping, constraint
collection, solving, and the mandatory concrete re-check. The authored
key doubles as the expected answer; the real binary is the oracle.
Path-mode answers are additionally confirmed with a debugger
breakpoint on the target address, an observer wholly outside this
package.
"""

import shutil
import subprocess
import time

import pytest

from symexec.elf import LoadFailure
from symexec.engine import (
    AddressOutOfRange,
    SolveOutcome,
    SolveRequest,
    solve,
)

KEY = b"s3cr3tk9"
GOOD = b"Good Job.\n"


def test_output_goal_recovers_the_key(crackme):
    started = time.monotonic()
    outcome = solve(SolveRequest(binary=str(crackme), mode="output", expected_output=GOOD))
    elapsed = time.monotonic() - started
    assert outcome.status == "sat"
    assert outcome.stdin == KEY
    assert elapsed < 120
    proc = subprocess.run([str(crackme)], input=outcome.stdin, capture_output=True, timeout=10)
    assert proc.stdout == GOOD and proc.returncode == 0


def test_output_goal_is_deterministic(crackme):
    request = SolveRequest(binary=str(crackme), mode="output", expected_output=GOOD)
    first, second = solve(request), solve(request)
    assert first == second


def test_path_goal_reaches_accept_avoiding_reject(crackme, crackme_program):
    outcome = solve(SolveRequest(
        binary=str(crackme), mode="path",
        target_addr=crackme_program.symbol_addr("accept"),
        avoid_addrs=(crackme_program.symbol_addr("reject"),),
    ))
    assert outcome.status == "sat"
    assert outcome.stdin == KEY


def test_path_answer_confirmed_by_debugger_breakpoint(crackme, crackme_program, tmp_path):
    if shutil.which("gdb") is None:
        pytest.skip("gdb not available for the breakpoint check")
    target = crackme_program.symbol_addr("accept")
    outcome = solve(SolveRequest(binary=str(crackme), mode="path", target_addr=target))
    assert outcome.status == "sat" and outcome.stdin is not None
    stdin_file = tmp_path / "stdin.bin"
    stdin_file.write_bytes(outcome.stdin)
    session = subprocess.run(
        ["gdb", "--batch", "--nx",
         "-ex", f"file {crackme}",
         "-ex", f"break *{target:#x}",
         "-ex", f"run < {stdin_file}"],
        capture_output=True, text=True, timeout=60)
    assert f"Breakpoint 1, {target:#018x}" in session.stdout


def test_dead_branch_is_unsat(deadbranch, deadbranch_program):
    outcome = solve(SolveRequest(
        binary=str(deadbranch), mode="path",
        target_addr=deadbranch_program.symbol_addr("unreachable_reward"),
    ))
    assert outcome.status == "unsat"
    assert outcome.stdin is None
    assert "state space exhausted" in outcome.constraints_summary


def test_absent_output_is_unsat(crackme):
    outcome = solve(SolveRequest(
        binary=str(crackme), mode="output", expected_output=b"No way.\n"))
    assert outcome.status == "unsat"
    assert outcome.stdin is None


def test_same_length_wrong_output_is_unsat(crackme):
    # Same length as the real success banner, one byte off: the
    # concrete-stdout fast path must refuse it without a solver call.
    outcome = solve(SolveRequest(
        binary=str(crackme), mode="output", expected_output=b"Good Job!\n"))
    assert outcome.status == "unsat"


def test_failure_banner_is_satisfiable(crackme):
    outcome = solve(SolveRequest(
        binary=str(crackme), mode="output", expected_output=b"Try again.\n"))
    assert outcome.status == "sat"
    assert outcome.stdin is not None and outcome.stdin != KEY
    proc = subprocess.run([str(crackme)], input=outcome.stdin, capture_output=True, timeout=10)
    assert proc.stdout == b"Try again.\n" and proc.returncode == 1


def test_millisecond_budget_times_out(crackme):
    started = time.monotonic()
    outcome = solve(SolveRequest(
        binary=str(crackme), mode="output", expected_output=GOOD, time_budget_s=0.001))
    elapsed = time.monotonic() - started
    assert outcome.status == "timeout"
    assert outcome.stdin is None
    assert elapsed < 1.0  # the budget actually cut the work short


def test_unmapped_target_raises(crackme):
    with pytest.raises(AddressOutOfRange):
        solve(SolveRequest(binary=str(crackme), mode="path", target_addr=0xDEAD_0000))


def test_non_elf_binary_raises(tmp_path):
    fake = tmp_path / "script.sh"
    fake.write_text("#!/bin/sh\necho hi\n")
    with pytest.raises(LoadFailure):
        solve(SolveRequest(binary=str(fake), mode="output", expected_output=b"hi\n"))


def test_entry_as_target_needs_no_stdin(crackme, crackme_program):
    outcome = solve(SolveRequest(
        binary=str(crackme), mode="path", target_addr=crackme_program.entry))
    assert outcome.status == "sat"
    assert outcome.stdin == b""


def test_avoiding_the_target_itself_is_unsat(crackme, crackme_program):
    accept = crackme_program.symbol_addr("accept")
    outcome = solve(SolveRequest(
        binary=str(crackme), mode="path", target_addr=accept, avoid_addrs=(accept,)))
    assert outcome.status == "unsat"


def test_request_invariants():
    with pytest.raises(ValueError):
        SolveRequest(binary="x", mode="path")  # no target
    with pytest.raises(ValueError):
        SolveRequest(binary="x", mode="output")  # no expected output
    with pytest.raises(ValueError):
        SolveRequest(binary="x", mode="sideways", target_addr=1)
    with pytest.raises(ValueError):
        SolveRequest(binary="x", mode="path", target_addr=1, stdin_length_cap=0)
    with pytest.raises(ValueError):
        SolveRequest(binary="x", mode="path", target_addr=1, time_budget_s=0)


def test_outcome_invariant():
    with pytest.raises(ValueError):
        SolveOutcome(status="sat", stdin=None, constraints_summary="")
    with pytest.raises(ValueError):
        SolveOutcome(status="unsat", stdin=b"x", constraints_summary="")
