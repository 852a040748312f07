"""environment.json must agree with what the code actually uses."""

import importlib.util
import json
from pathlib import Path

import symexec

ADAPTER_ROOT = Path(__file__).resolve().parent.parent


def _manifest():
    return json.loads((ADAPTER_ROOT / "environment.json").read_text())


def _build_module():
    path = ADAPTER_ROOT / "fixtures" / "build.py"
    spec = importlib.util.spec_from_file_location("fixture_build_pins", path)
    module = importlib.util.module_from_spec(spec)
    assert spec.loader is not None
    spec.loader.exec_module(module)
    return module


def test_pinned_cflags_match_the_build_script():
    pinned = _manifest()["fixtures"]["cflags"]
    assert tuple(pinned) == _build_module().CFLAGS


def test_pinned_engine_version_matches_the_package():
    engine = _manifest()["engine"]
    assert engine["name"] == "symexec"
    assert engine["version"] == symexec.__version__
