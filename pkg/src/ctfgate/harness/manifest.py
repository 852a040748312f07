"""Challenge manifests.

A challenge is a directory holding a ``challenge.json`` manifest plus
whatever fixture files it references (C sources, data blobs, a service
script, a scripted solve scenario).  The manifest declares everything a
trial needs to provision the environment and judge the outcome: setup
and teardown commands, long-running services, the scope policy the
gateway enforces, and the flag pattern that defines success.

Manifests are templates.  Strings may embed ``${SANDBOX}``,
``${CHALLENGE}``, ``${PORT}``, ``${PYTHON}`` and ``${CC}`` placeholders;
:func:`resolve` substitutes them once the trial has allocated the
sandbox directory and port.
"""

from __future__ import annotations

import json
import re
import shutil
import string
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

from ctfgate.agent.salience import DEFAULT_FLAG_PATTERN
from ctfgate.gateway.policy import DEFAULT_MAX_WALL_TIME_S, ScopePolicy, make_policy

CATEGORIES = (
    "Memory Corruption",
    "Reverse Engineering",
    "Web Exploitation",
    "Cryptography",
)

MANIFEST_NAME = "challenge.json"

SUBSTITUTION_KEYS = ("SANDBOX", "CHALLENGE", "PORT", "PYTHON", "CC")

_MANIFEST_KEYS = frozenset(
    {
        "id",
        "category",
        "objective",
        "flag_pattern",
        "points",
        "difficulty",
        "provenance",
        "setup",
        "teardown",
        "services",
        "policy",
        "scenario",
    }
)


class ManifestError(ValueError):
    """The manifest file is missing, malformed, or violates an invariant."""


@dataclass(frozen=True)
class ServiceSpec:
    """A long-running process the trial starts before the episode and
    kills afterwards.  ``ready_port`` waits for the allocated port to
    accept connections before the episode begins."""

    argv: tuple[str, ...]
    ready_port: bool = True

    def to_dict(self) -> dict[str, Any]:
        return {"argv": list(self.argv), "ready_port": self.ready_port}


@dataclass(frozen=True)
class ChallengeManifest:
    challenge_id: str
    category: str
    objective: str
    flag_pattern: str
    points: int
    root: Path
    difficulty: str = "unrated"
    provenance: str = ""
    setup: tuple[tuple[str, ...], ...] = ()
    teardown: tuple[tuple[str, ...], ...] = ()
    services: tuple[ServiceSpec, ...] = ()
    policy: dict[str, Any] = field(default_factory=dict)
    scenario: str | None = None

    def __post_init__(self) -> None:
        if not self.challenge_id or not re.fullmatch(r"[a-z0-9_]+", self.challenge_id):
            raise ManifestError(
                f"challenge id must be lowercase [a-z0-9_]+, got {self.challenge_id!r}"
            )
        if self.category not in CATEGORIES:
            raise ManifestError(
                f"unknown category {self.category!r}; expected one of {CATEGORIES}"
            )
        if not self.objective.strip():
            raise ManifestError("objective must be nonempty")
        try:
            re.compile(self.flag_pattern)
        except re.error as exc:
            raise ManifestError(f"flag_pattern does not compile: {exc}") from exc
        if self.points <= 0:
            raise ManifestError("points must be positive")

    def scope_policy(self) -> ScopePolicy:
        return make_policy(
            allowed_cidrs=self.policy.get("allowed_cidrs", []),
            allowed_binaries=self.policy.get("allowed_binaries", []),
            max_wall_time_seconds=self.policy.get(
                "max_wall_time_seconds", DEFAULT_MAX_WALL_TIME_S
            ),
        )

    def scenario_path(self) -> Path | None:
        if self.scenario is None:
            return None
        return self.root / self.scenario

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.challenge_id,
            "category": self.category,
            "objective": self.objective,
            "flag_pattern": self.flag_pattern,
            "points": self.points,
            "difficulty": self.difficulty,
            "provenance": self.provenance,
            "setup": [list(cmd) for cmd in self.setup],
            "teardown": [list(cmd) for cmd in self.teardown],
            "services": [svc.to_dict() for svc in self.services],
            "policy": self.policy,
            "scenario": self.scenario,
        }


def _command_list(raw: Any, label: str) -> tuple[tuple[str, ...], ...]:
    if raw is None:
        return ()
    if not isinstance(raw, list):
        raise ManifestError(f"{label} must be a list of argv lists")
    out = []
    for cmd in raw:
        if (
            not isinstance(cmd, list)
            or not cmd
            or not all(isinstance(a, str) for a in cmd)
        ):
            raise ManifestError(f"{label} entries must be nonempty string lists")
        out.append(tuple(cmd))
    return tuple(out)


def load_manifest(path: Path | str) -> ChallengeManifest:
    """Load ``challenge.json`` from ``path`` (a file or a challenge
    directory).  Raises :class:`ManifestError` on any defect."""

    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ManifestError(f"cannot read manifest: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ManifestError(f"manifest is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ManifestError("manifest root must be an object")
    unknown = sorted(set(doc) - _MANIFEST_KEYS)
    if unknown:
        # typos in fixture files should fail at load, not silently no-op
        raise ManifestError(f"unknown manifest keys: {', '.join(unknown)}")

    services = []
    for raw in doc.get("services", []) or []:
        if not isinstance(raw, dict) or "argv" not in raw:
            raise ManifestError("service entries must be objects with argv")
        argv = raw["argv"]
        if (
            not isinstance(argv, list)
            or not argv
            or not all(isinstance(a, str) for a in argv)
        ):
            raise ManifestError("service argv must be a nonempty string list")
        services.append(
            ServiceSpec(argv=tuple(argv), ready_port=bool(raw.get("ready_port", True)))
        )

    try:
        return ChallengeManifest(
            challenge_id=doc.get("id", ""),
            category=doc.get("category", ""),
            objective=doc.get("objective", ""),
            flag_pattern=doc.get("flag_pattern", DEFAULT_FLAG_PATTERN),
            points=int(doc.get("points", 0)),
            root=path.parent.resolve(),
            difficulty=str(doc.get("difficulty", "unrated")),
            provenance=str(doc.get("provenance", "")),
            setup=_command_list(doc.get("setup"), "setup"),
            teardown=_command_list(doc.get("teardown"), "teardown"),
            services=tuple(services),
            policy=doc.get("policy", {}) if isinstance(doc.get("policy", {}), dict) else {},
            scenario=doc.get("scenario"),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ManifestError):
            raise
        raise ManifestError(f"malformed manifest field: {exc}") from exc


def discover_suite(root: Path | str) -> list[ChallengeManifest]:
    """All challenges under ``root``, sorted by id.  A challenge is any
    direct subdirectory containing a manifest."""

    root = Path(root)
    if not root.is_dir():
        raise ManifestError(f"suite root {root} is not a directory")
    found = []
    for sub in sorted(root.iterdir()):
        if sub.is_dir() and (sub / MANIFEST_NAME).exists():
            found.append(load_manifest(sub))
    if not found:
        raise ManifestError(f"no challenges found under {root}")
    ids = [m.challenge_id for m in found]
    if len(set(ids)) != len(ids):
        raise ManifestError(f"duplicate challenge ids in suite: {ids}")
    return found


def default_substitutions(
    sandbox: Path | str, challenge_root: Path | str, port: int
) -> dict[str, Any]:
    cc = shutil.which("gcc") or shutil.which("cc") or "gcc"
    return {
        "SANDBOX": str(sandbox),
        "CHALLENGE": str(challenge_root),
        "PORT": port,
        "PYTHON": sys.executable,
        "CC": cc,
    }


_EXACT_PLACEHOLDER = re.compile(r"^\$\{([A-Za-z_][A-Za-z0-9_]*)\}$")


def substitute(value: Any, mapping: dict[str, Any]) -> Any:
    """Recursively expand ``${NAME}`` placeholders in every string of a
    JSON-shaped value.  A string that is exactly one placeholder keeps
    the mapped value's native type (so ``"${PORT}"`` becomes an int in
    a port parameter); mixed strings render everything as text.
    Unknown placeholders raise, so typos in fixture files fail loudly
    instead of leaking literals into commands."""

    if isinstance(value, str):
        exact = _EXACT_PLACEHOLDER.match(value)
        if exact:
            name = exact.group(1)
            if name not in mapping:
                raise ManifestError(f"unknown placeholder ${{{name}}}")
            return mapping[name]
        try:
            return string.Template(value).substitute(
                {k: str(v) for k, v in mapping.items()}
            )
        except KeyError as exc:
            raise ManifestError(f"unknown placeholder {exc} in {value!r}") from exc
    if isinstance(value, list):
        return [substitute(v, mapping) for v in value]
    if isinstance(value, tuple):
        return tuple(substitute(v, mapping) for v in value)
    if isinstance(value, dict):
        return {k: substitute(v, mapping) for k, v in value.items()}
    return value


def resolve(
    manifest: ChallengeManifest, mapping: dict[str, str]
) -> ChallengeManifest:
    """A copy of ``manifest`` with placeholders expanded everywhere a
    trial consumes them (commands, services, policy, objective)."""

    return replace(
        manifest,
        objective=substitute(manifest.objective, mapping),
        setup=substitute(manifest.setup, mapping),
        teardown=substitute(manifest.teardown, mapping),
        services=tuple(
            ServiceSpec(argv=substitute(s.argv, mapping), ready_port=s.ready_port)
            for s in manifest.services
        ),
        policy=substitute(manifest.policy, mapping),
    )
