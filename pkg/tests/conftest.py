import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from binrep import ReplicateDataset  # noqa: E402


@pytest.fixture
def tiny():
    return ReplicateDataset.from_counts([3, 3], [0, 3])


@pytest.fixture
def separated():
    return ReplicateDataset.from_counts([2, 2], [0, 2], status=[0, 1])


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
