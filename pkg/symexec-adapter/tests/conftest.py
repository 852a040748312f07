"""Shared fixtures: the compiled test binaries and their loaded images."""

import importlib.util
import shutil
from pathlib import Path

import pytest

from symexec.elf import Program, load

ADAPTER_ROOT = Path(__file__).resolve().parent.parent
FIXTURES_DIR = ADAPTER_ROOT / "fixtures"


def _build_module():
    spec = importlib.util.spec_from_file_location("fixture_build", FIXTURES_DIR / "build.py")
    module = importlib.util.module_from_spec(spec)
    assert spec.loader is not None
    spec.loader.exec_module(module)
    return module


@pytest.fixture(scope="session")
def binaries(tmp_path_factory) -> dict[str, Path]:
    if shutil.which("gcc") is None:
        pytest.skip("no gcc; the fixture binaries cannot be built")
    return _build_module().build(tmp_path_factory.mktemp("bin"))


@pytest.fixture(scope="session")
def crackme(binaries) -> Path:
    return binaries["crackme"]


@pytest.fixture(scope="session")
def deadbranch(binaries) -> Path:
    return binaries["deadbranch"]


@pytest.fixture(scope="session")
def crackme_program(crackme) -> Program:
    return load(str(crackme))


@pytest.fixture(scope="session")
def deadbranch_program(deadbranch) -> Program:
    return load(str(deadbranch))
