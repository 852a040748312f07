"""One benchmark trial: provision, run the episode, audit, tear down.

Every trial gets a private sandbox directory.  Setup commands compile
fixtures into it, services are started and health-checked, then an
episode runs against a gateway whose policy comes from the challenge
manifest.  Teardown always runs, even when setup or the episode blew
up, so no trial leaks processes or temp state into the next one.

A trial that cannot be provisioned is *invalid*, not failed: it is
excluded from success-rate denominators instead of silently counting
against the agent.
"""

from __future__ import annotations

import json
import os
import signal
import socket
import subprocess
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

from ctfgate.agent.loop import EpisodeConfig, EpisodeRunner
from ctfgate.errors import EmptyPlan
from ctfgate.gateway.dispatch import Gateway
from ctfgate.gateway.registry import ToolRegistry, load_manifest
from ctfgate.gateway.trace import TraceWriter
from ctfgate.harness.manifest import (
    ChallengeManifest,
    default_substitutions,
    resolve,
    substitute,
)
from ctfgate.harness.stats import check_reward
from ctfgate.reasoner.scripted import ScriptedReasoner, load_scenario
from ctfgate.toolsrv.catalog import build_manifest

SETUP_TIMEOUT_S = 90.0
SERVICE_READY_TIMEOUT_S = 10.0
DEFAULT_TRIAL_TIMEOUT_S = 60.0


class EnvironmentSetupFailure(RuntimeError):
    """Provisioning broke before the agent ever acted."""


@dataclass(frozen=True)
class TrialRecord:
    """Everything the matrix needs to score and re-audit one trial."""

    challenge_id: str
    category: str
    condition: str
    trial_index: int
    seed: int
    valid: bool
    success: bool
    stop_kind: str | None
    flag: str | None
    steps: int
    duration_s: float
    trace_path: str
    sandbox: str
    error: str | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "challenge_id": self.challenge_id,
            "category": self.category,
            "condition": self.condition,
            "trial_index": self.trial_index,
            "seed": self.seed,
            "valid": self.valid,
            "success": self.success,
            "stop_kind": self.stop_kind,
            "flag": self.flag,
            "steps": self.steps,
            "duration_s": self.duration_s,
            "trace_path": self.trace_path,
            "sandbox": self.sandbox,
            "error": self.error,
        }


@dataclass
class Provisioned:
    """Live service processes a trial must reap."""

    services: list[subprocess.Popen] = field(default_factory=list)


def run_setup_commands(commands, cwd: Path) -> None:
    for argv in commands:
        argv = [str(a) for a in argv]
        try:
            proc = subprocess.run(
                argv,
                cwd=str(cwd),
                capture_output=True,
                timeout=SETUP_TIMEOUT_S,
            )
        except (OSError, subprocess.TimeoutExpired) as exc:
            raise EnvironmentSetupFailure(f"setup command {argv[0]} failed: {exc}") from exc
        if proc.returncode != 0:
            tail = proc.stderr.decode("utf-8", "replace")[-400:]
            raise EnvironmentSetupFailure(
                f"setup command {argv[0]} exited {proc.returncode}: {tail}"
            )


def _wait_port(port: int, deadline: float) -> bool:
    while time.monotonic() < deadline:
        try:
            with socket.create_connection(("127.0.0.1", port), timeout=0.25):
                return True
        except OSError:
            time.sleep(0.05)
    return False


def start_services(manifest: ChallengeManifest, port: int, cwd: Path) -> Provisioned:
    prov = Provisioned()
    for svc in manifest.services:
        argv = [str(a) for a in svc.argv]
        try:
            proc = subprocess.Popen(
                argv,
                cwd=str(cwd),
                stdout=subprocess.DEVNULL,
                stderr=subprocess.DEVNULL,
                start_new_session=True,
            )
        except OSError as exc:
            kill_services(prov)
            raise EnvironmentSetupFailure(f"service {argv[0]} failed to start: {exc}") from exc
        prov.services.append(proc)
        if svc.ready_port:
            if not _wait_port(port, time.monotonic() + SERVICE_READY_TIMEOUT_S):
                kill_services(prov)
                raise EnvironmentSetupFailure(
                    f"service {argv[0]} never opened port {port}"
                )
    return prov


def kill_services(prov: Provisioned) -> None:
    for proc in prov.services:
        if proc.poll() is None:
            try:
                os.killpg(proc.pid, signal.SIGKILL)
            except (ProcessLookupError, PermissionError):
                proc.kill()
        try:
            proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            pass


def build_registry(policy_path: Path, sandbox: Path) -> ToolRegistry:
    return load_manifest(
        build_manifest(),
        substitutions={
            "python": sys.executable,
            "policy": str(policy_path),
            "cwd": str(sandbox),
        },
    )


def load_scripted_reasoner(
    scenario_path: Path, mapping: dict[str, str]
) -> ScriptedReasoner:
    doc = json.loads(scenario_path.read_text(encoding="utf-8"))
    return ScriptedReasoner(load_scenario(substitute(doc, mapping)))


ReasonerFactory = Callable[[ChallengeManifest, dict[str, str]], Any]


def run_trial(
    manifest: ChallengeManifest,
    condition: str,
    sandbox: Path | str,
    *,
    trial_index: int = 0,
    seed: int = 0,
    port: int = 8800,
    timeout_s: float = DEFAULT_TRIAL_TIMEOUT_S,
    reasoner_factory: ReasonerFactory | None = None,
) -> TrialRecord:
    """Provision ``sandbox``, run one episode, and audit the result.

    The session label, ports, and scripted reasoner are all derived
    deterministically from the arguments, so two runs with identical
    arguments produce byte-identical canonical traces.
    """
    sandbox = Path(sandbox)
    sandbox.mkdir(parents=True, exist_ok=True)
    trace_path = sandbox / "trace.jsonl"
    mapping = default_substitutions(sandbox, manifest.root, port)
    resolved = resolve(manifest, mapping)
    session = f"{manifest.challenge_id}-{condition}-seed{seed}-t{trial_index:02d}"

    started = time.monotonic()
    prov = Provisioned()
    gateway: Gateway | None = None
    record_kwargs: dict[str, Any] = {
        "challenge_id": manifest.challenge_id,
        "category": manifest.category,
        "condition": condition,
        "trial_index": trial_index,
        "seed": seed,
        "trace_path": str(trace_path),
        "sandbox": str(sandbox),
    }

    try:
        try:
            run_setup_commands(resolved.setup, sandbox)
            prov = start_services(resolved, port, sandbox)

            policy_path = sandbox / "policy.json"
            policy_path.write_text(
                json.dumps(resolved.policy, indent=2, sort_keys=True) + "\n",
                encoding="utf-8",
            )
            registry = build_registry(policy_path, sandbox)
            gateway = Gateway(
                registry,
                resolved.scope_policy(),
                TraceWriter(trace_path, session=session),
                session_id=session,
            )

            if reasoner_factory is not None:
                reasoner = reasoner_factory(resolved, mapping)
            else:
                scenario_path = resolved.scenario_path()
                if scenario_path is None:
                    raise EnvironmentSetupFailure(
                        f"challenge {manifest.challenge_id} ships no scenario and "
                        "no reasoner factory was supplied"
                    )
                reasoner = load_scripted_reasoner(scenario_path, mapping)
        except EnvironmentSetupFailure as exc:
            return TrialRecord(
                valid=False,
                success=False,
                stop_kind=None,
                flag=None,
                steps=0,
                duration_s=time.monotonic() - started,
                error=str(exc),
                **record_kwargs,
            )

        config = EpisodeConfig(
            objective=resolved.objective,
            flag_pattern=resolved.flag_pattern,
            doc_pack=condition,
            timeout_s=timeout_s,
            seed=seed,
        )
        runner = EpisodeRunner(config, reasoner, gateway)
        try:
            state = runner.run()
        except EmptyPlan as exc:
            return TrialRecord(
                valid=False,
                success=False,
                stop_kind=None,
                flag=None,
                steps=0,
                duration_s=time.monotonic() - started,
                error=f"scenario proposed no plan: {exc}",
                **record_kwargs,
            )

        stop = state.stop
        observations = [obs.to_dict() for obs, _ in state.history.pairs()]
        audit = check_reward(
            resolved.flag_pattern,
            stop.kind if stop else None,
            stop.detail if stop else None,
            observations,
        )
        return TrialRecord(
            valid=True,
            success=audit.rewarded,
            stop_kind=stop.kind if stop else None,
            flag=audit.flag if audit.rewarded else None,
            steps=state.step_count,
            duration_s=time.monotonic() - started,
            error=None,
            **record_kwargs,
        )
    finally:
        if gateway is not None:
            gateway.close()
        kill_services(prov)
        try:
            run_setup_commands(resolved.teardown, sandbox)
        except EnvironmentSetupFailure:
            pass
