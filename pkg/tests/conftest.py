from pathlib import Path

import pytest
from hypothesis import settings

from bbstab import _kernels

ROOT = Path(__file__).resolve().parents[1]
MATRIX_DIR = ROOT / "data" / "matrices"

# first calls may load compiled kernels from the on-disk cache
settings.register_profile("bbstab", deadline=None)
settings.load_profile("bbstab")

numba_only = pytest.mark.skipif(
    not _kernels.USE_NUMBA, reason="depends on the compiled backend (timing or exp rounding)"
)


@pytest.fixture
def matrix_files():
    files = sorted(MATRIX_DIR.glob("*.mtx"))
    assert len(files) >= 5
    return files


ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    """Record one pass/fail line for an acceptance criterion."""

    def _report(number, title, passed, detail):
        line = f"criterion {number:>2} [{'PASS' if passed else 'FAIL'}] {title}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section(f"acceptance criteria ({_kernels.BACKEND} backend)")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
