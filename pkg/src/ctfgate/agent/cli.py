"""Episode entry point (console script: ctf-episode).

Runs one agent episode against a challenge: builds the gateway from the
challenge's policy, wires up a scripted or remote reasoner, and streams
the decision trace to disk.  Exit status 0 means the flag was captured;
2 means the episode stopped any other way.

    ctf-episode --challenge challenges/strings_recon --sandbox /tmp/run \
                --reasoner scripted:solve.json --trace /tmp/run/trace.jsonl

A checkpointed episode can be interrupted and picked up again:

    ctf-episode ... --checkpoint-every-min 10 --checkpoint /tmp/run/ep.ckpt
    ctf-episode ... --resume /tmp/run/ep.ckpt
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from ctfgate.agent.checkpoint import load_checkpoint
from ctfgate.agent.loop import EpisodeConfig, EpisodeRunner
from ctfgate.agent.state import reward
from ctfgate.errors import GateError
from ctfgate.gateway.dispatch import Gateway
from ctfgate.gateway.policy import load_policy
from ctfgate.gateway.trace import TraceWriter
from ctfgate.harness.manifest import (
    default_substitutions,
    load_manifest,
    resolve,
)
from ctfgate.harness.trial import (
    EnvironmentSetupFailure,
    Provisioned,
    build_registry,
    kill_services,
    load_scripted_reasoner,
    run_setup_commands,
    start_services,
)
from ctfgate.reasoner.remote import RemoteReasoner


def _make_reasoner(spec: str, mapping: dict[str, str]):
    kind, _, rest = spec.partition(":")
    if kind == "scripted" and rest:
        return load_scripted_reasoner(Path(rest), mapping)
    if kind == "remote" and rest:
        return RemoteReasoner(endpoint=rest)
    raise SystemExit(f"--reasoner must be scripted:<scenario.json> or remote:<url>, got {spec!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ctf-episode", description="Run one gated agent episode."
    )
    parser.add_argument("--challenge", required=True,
                        help="challenge directory or challenge.json path")
    parser.add_argument("--sandbox", required=True,
                        help="working directory for fixtures and artifacts")
    parser.add_argument("--reasoner", required=True,
                        help="scripted:<scenario.json> or remote:<url>")
    parser.add_argument("--objective", default=None,
                        help="override the manifest objective")
    parser.add_argument("--policy", default=None,
                        help="override the manifest scope policy (JSON file)")
    parser.add_argument("--trace", default=None,
                        help="trace path (default: <sandbox>/trace.jsonl)")
    parser.add_argument("--doc-pack", default=None,
                        help="guidance condition name forwarded to the reasoner")
    parser.add_argument("--timeout-min", type=float, default=60.0)
    parser.add_argument("--max-steps", type=int, default=100)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--port", type=int, default=8800,
                        help="port substituted into service fixtures")
    parser.add_argument("--checkpoint", default=None,
                        help="checkpoint path (default: <trace>.ckpt)")
    parser.add_argument("--checkpoint-every-min", type=float, default=None)
    parser.add_argument("--checkpoint-after-steps", type=int, default=None)
    parser.add_argument("--halt-at-checkpoint", action="store_true",
                        help="stop after writing the first checkpoint")
    parser.add_argument("--resume", default=None,
                        help="resume from a checkpoint file")
    parser.add_argument("--no-provision", action="store_true",
                        help="skip the manifest's setup commands and services "
                             "(the sandbox is already prepared)")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)

    manifest = load_manifest(Path(args.challenge))
    sandbox = Path(args.sandbox)
    sandbox.mkdir(parents=True, exist_ok=True)
    mapping = default_substitutions(sandbox, manifest.root, args.port)
    resolved = resolve(manifest, mapping)

    trace_path = Path(args.trace) if args.trace else sandbox / "trace.jsonl"
    checkpoint_path = (
        Path(args.checkpoint) if args.checkpoint else trace_path.with_suffix(".ckpt")
    )

    prov = Provisioned()
    if not args.no_provision:
        try:
            run_setup_commands(resolved.setup, sandbox)
            prov = start_services(resolved, args.port, sandbox)
        except EnvironmentSetupFailure as exc:
            print(f"provisioning failed: {exc}", file=sys.stderr)
            return 4

    if args.policy:
        policy = load_policy(args.policy)
        policy_path = Path(args.policy)
    else:
        policy = resolved.scope_policy()
        policy_path = sandbox / "policy.json"
        policy_path.write_text(
            json.dumps(resolved.policy, indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )

    registry = build_registry(policy_path, sandbox)
    reasoner = _make_reasoner(args.reasoner, mapping)

    checkpoint = None
    session = f"{manifest.challenge_id}-seed{args.seed}"
    start_seq = 0
    if args.resume:
        checkpoint = load_checkpoint(args.resume)
        session = checkpoint.session
        start_seq = checkpoint.trace_next_seq

    gateway = Gateway(
        registry,
        policy,
        TraceWriter(trace_path, session=session, start_seq=start_seq),
        session_id=session,
    )

    config = EpisodeConfig(
        objective=args.objective or resolved.objective,
        flag_pattern=resolved.flag_pattern,
        doc_pack=args.doc_pack,
        timeout_s=args.timeout_min * 60.0,
        max_steps=args.max_steps,
        checkpoint_path=checkpoint_path,
        checkpoint_every_s=(
            args.checkpoint_every_min * 60.0 if args.checkpoint_every_min else 600.0
        ),
        checkpoint_after_steps=args.checkpoint_after_steps,
        halt_at_checkpoint=args.halt_at_checkpoint,
        seed=args.seed,
    )

    runner = EpisodeRunner(config, reasoner, gateway)
    if checkpoint is not None:
        runner.resume_from(checkpoint)

    try:
        state = runner.run()
    except GateError as exc:
        print(f"episode failed: {exc}", file=sys.stderr)
        return 3
    finally:
        gateway.close()
        kill_services(prov)
        if not args.no_provision:
            try:
                run_setup_commands(resolved.teardown, sandbox)
            except EnvironmentSetupFailure:
                pass

    stop = state.stop
    if stop is None:
        print(
            json.dumps(
                {"stop": None, "halted_at_checkpoint": True, "steps": state.step_count}
            )
        )
        return 0
    print(
        json.dumps(
            {
                "stop": stop.kind,
                "detail": stop.detail,
                "reward": reward(stop),
                "steps": state.step_count,
                "trace": str(trace_path),
            }
        )
    )
    return 0 if reward(stop) == 1 else 2


if __name__ == "__main__":
    sys.exit(main())
