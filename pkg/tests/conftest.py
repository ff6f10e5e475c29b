from pathlib import Path

import numpy as np
import pytest

from conntest.image import Image

_ACCEPTANCE_LINES = []


def pytest_runtest_logreport(report):
    if report.when != "call":
        return
    name = report.nodeid.rsplit("::", 1)[-1]
    if name.startswith("test_criterion_"):
        _ACCEPTANCE_LINES.append(f"{name}: {report.outcome.upper()}")


def pytest_sessionfinish(session, exitstatus):
    """One pass/fail line per acceptance criterion, kept next to the code."""
    if not _ACCEPTANCE_LINES:
        return
    lines = sorted(_ACCEPTANCE_LINES)
    out = Path(__file__).resolve().parent.parent / "acceptance_report.txt"
    out.write_text("\n".join(lines) + "\n")
    print("\nacceptance criteria:")
    for line in lines:
        print(f"  {line}")
    print(f"written to {out}")


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(1234))


def bits_from_rows(rows):
    """Build a square bool array from strings like "1 0 1"."""
    grid = np.array([[int(c) for c in row.split()] for row in rows],
                    dtype=bool)
    assert grid.shape[0] == grid.shape[1]
    return grid


def image_from_rows(rows) -> Image:
    return Image(bits_from_rows(rows))
