"""Challenge manifest loading, placeholder substitution, and suite
discovery."""

import json
from pathlib import Path

import pytest

from ctfgate.gateway.policy import ScopePolicy
from ctfgate.harness.manifest import (
    CATEGORIES,
    ChallengeManifest,
    ManifestError,
    default_substitutions,
    discover_suite,
    load_manifest,
    resolve,
    substitute,
)

SUITE_ROOT = Path(__file__).resolve().parent.parent / "challenges"


def minimal_doc(**overrides):
    doc = {
        "id": "toy_chal",
        "category": "Reverse Engineering",
        "objective": "recover the flag from the binary",
        "flag_pattern": r"flag\{[a-z0-9_]{4,40}\}",
        "points": 100,
        "scenario": "solve.json",
    }
    doc.update(overrides)
    return doc


def write_challenge(root: Path, doc: dict) -> Path:
    root.mkdir(parents=True, exist_ok=True)
    (root / "challenge.json").write_text(json.dumps(doc))
    (root / doc.get("scenario", "solve.json")).write_text("{}")
    return root


class TestLoading:
    def test_loads_from_directory_or_file(self, tmp_path):
        root = write_challenge(tmp_path / "toy", minimal_doc())
        by_dir = load_manifest(root)
        by_file = load_manifest(root / "challenge.json")
        assert by_dir.challenge_id == by_file.challenge_id == "toy_chal"
        assert by_dir.root == root

    def test_all_shipped_manifests_validate(self):
        suite = discover_suite(SUITE_ROOT)
        assert len(suite) == 5
        for manifest in suite:
            assert manifest.category in CATEGORIES
            assert (manifest.root / manifest.scenario).is_file()
            # policy must be materializable without substitution errors
            resolved = resolve(
                manifest, default_substitutions(Path("/tmp/sbx"), manifest.root, 9101)
            )
            assert isinstance(resolved.scope_policy(), ScopePolicy)

    def test_suite_is_sorted_and_unique(self):
        ids = [m.challenge_id for m in discover_suite(SUITE_ROOT)]
        assert ids == sorted(ids)
        assert len(ids) == len(set(ids))

    def test_duplicate_ids_rejected(self, tmp_path):
        write_challenge(tmp_path / "a", minimal_doc())
        write_challenge(tmp_path / "b", minimal_doc())
        with pytest.raises(ManifestError, match="duplicate"):
            discover_suite(tmp_path)

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(ManifestError):
            load_manifest(tmp_path / "nowhere")

    def test_malformed_json(self, tmp_path):
        target = tmp_path / "bad"
        target.mkdir()
        (target / "challenge.json").write_text("{not json")
        with pytest.raises(ManifestError):
            load_manifest(target)


class TestInvariants:
    @pytest.mark.parametrize(
        "patch",
        [
            {"category": "Underwater Basket Weaving"},
            {"id": ""},
            {"id": "has space"},
            {"objective": "   "},
            {"flag_pattern": "flag{(unclosed"},
            {"points": -5},
        ],
    )
    def test_bad_fields_rejected(self, tmp_path, patch):
        doc = minimal_doc(**patch)
        root = write_challenge(tmp_path / "toy", doc)
        with pytest.raises(ManifestError):
            load_manifest(root)

    def test_unknown_keys_rejected(self, tmp_path):
        root = write_challenge(tmp_path / "toy", minimal_doc(extra_stuff=1))
        with pytest.raises(ManifestError, match="extra_stuff"):
            load_manifest(root)

    def test_service_argv_must_be_nonempty(self, tmp_path):
        root = write_challenge(
            tmp_path / "toy", minimal_doc(services=[{"argv": []}])
        )
        with pytest.raises(ManifestError):
            load_manifest(root)


class TestSubstitution:
    MAPPING = {"SANDBOX": "/tmp/sbx", "PORT": 9101, "PYTHON": "/usr/bin/python3"}

    def test_exact_placeholder_keeps_native_type(self):
        # a string that is exactly one placeholder adopts the mapped value,
        # so "${PORT}" can feed an integer-typed schema parameter
        assert substitute("${PORT}", self.MAPPING) == 9101
        assert isinstance(substitute("${PORT}", self.MAPPING), int)

    def test_embedded_placeholder_renders_as_text(self):
        assert substitute("listen on ${PORT}/tcp", self.MAPPING) == "listen on 9101/tcp"
        assert substitute("${SANDBOX}/chal", self.MAPPING) == "/tmp/sbx/chal"

    def test_containers_recurse(self):
        doc = {"argv": ["${PYTHON}", "-m", "x"], "ports": ["${PORT}"], "n": 3}
        out = substitute(doc, self.MAPPING)
        assert out == {"argv": ["/usr/bin/python3", "-m", "x"], "ports": [9101], "n": 3}

    def test_unknown_placeholder_raises(self):
        with pytest.raises(ManifestError, match="OOPS"):
            substitute("${OOPS}", self.MAPPING)
        with pytest.raises(ManifestError, match="OOPS"):
            substitute("x ${OOPS} y", self.MAPPING)

    def test_non_strings_pass_through(self):
        assert substitute(17, self.MAPPING) == 17
        assert substitute(None, self.MAPPING) is None

    def test_resolve_touches_exec_surfaces_only(self, tmp_path):
        doc = minimal_doc(
            objective="probe 127.0.0.1:${PORT}",
            setup=[["${PYTHON}", "gen.py", "${SANDBOX}"]],
            services=[{"argv": ["${PYTHON}", "srv.py", "--port", "${PORT}"]}],
            policy={"allowed_binaries": ["${SANDBOX}/chal"]},
        )
        manifest = load_manifest(write_challenge(tmp_path / "toy", doc))
        resolved = resolve(manifest, self.MAPPING)
        assert resolved.objective == "probe 127.0.0.1:9101"
        assert resolved.setup == (("/usr/bin/python3", "gen.py", "/tmp/sbx"),)
        assert resolved.services[0].argv == ("/usr/bin/python3", "srv.py", "--port", 9101)
        assert resolved.policy["allowed_binaries"] == ["/tmp/sbx/chal"]
        # the original is untouched
        assert manifest.objective == "probe 127.0.0.1:${PORT}"

    def test_default_substitutions_shape(self, tmp_path):
        mapping = default_substitutions(tmp_path / "sbx", tmp_path / "chal", 9200)
        assert mapping["PORT"] == 9200
        assert mapping["SANDBOX"].endswith("sbx")
        assert Path(mapping["PYTHON"]).name.startswith("python")
        assert "CC" in mapping


class TestScopePolicy:
    def test_policy_fields_flow_through(self, tmp_path):
        doc = minimal_doc(
            policy={
                "allowed_binaries": ["/usr/bin/strings"],
                "allowed_cidrs": ["127.0.0.0/8"],
                "max_wall_time_seconds": 120,
            }
        )
        manifest = load_manifest(write_challenge(tmp_path / "toy", doc))
        policy = manifest.scope_policy()
        assert policy.permits_binary("/usr/bin/strings")
        assert not policy.permits_binary("/usr/bin/objdump")
        assert policy.permits_address("127.0.0.1")
        assert not policy.permits_address("8.8.8.8")

    def test_empty_policy_yields_default_deny(self, tmp_path):
        manifest = load_manifest(write_challenge(tmp_path / "toy", minimal_doc()))
        policy = manifest.scope_policy()
        assert not policy.permits_binary("/bin/sh")
