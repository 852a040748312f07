import shutil
import subprocess
import sys
from pathlib import Path

import pytest

REPO_ROOT = Path(__file__).resolve().parent.parent
FIXTURES = Path(__file__).resolve().parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def python_exe() -> str:
    return sys.executable


@pytest.fixture(scope="session")
def compile_c(tmp_path_factory):
    """Compile a C snippet once per session, return the binary path."""
    build_dir = tmp_path_factory.mktemp("cc")
    cache: dict[str, Path] = {}
    cc = shutil.which("gcc") or shutil.which("cc")
    if cc is None:
        pytest.skip("no C compiler available")

    def build(name: str, source: str, flags: tuple[str, ...] = ()) -> Path:
        if name in cache:
            return cache[name]
        src = build_dir / f"{name}.c"
        out = build_dir / name
        src.write_text(source)
        subprocess.run(
            [cc, "-O0", "-g", *flags, "-o", str(out), str(src)],
            check=True,
            capture_output=True,
        )
        cache[name] = out
        return out

    return build
