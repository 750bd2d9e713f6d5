import numpy as np
import pytest

from beamsec.config import reference_config
from beamsec.harness import build_scene

_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def ref_config():
    return reference_config()


@pytest.fixture(scope="session")
def ref_scene(ref_config):
    return build_scene(ref_config)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def acceptance_line(request, capsys):
    """Record and immediately print one PASS/FAIL line for an acceptance criterion."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def record(number: int, ok: bool, detail: str):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}"
        lines.append(line)
        with capsys.disabled():
            print(f"\n{line}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
