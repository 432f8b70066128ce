from pathlib import Path

import pytest

from tree_anova.estimation import SummaryStats

DATA_DIR = Path(__file__).parent / "data"
HEADACHE_CSV = DATA_DIR / "headache_u_change.csv"


@pytest.fixture
def table7():
    """Published summary of the noise-change data: control first."""
    return SummaryStats.from_unbiased(
        [23, 25, 22, 28],
        [-0.4134783, 0.2344, 1.0504545, 0.9367857],
        [1.416596, 3.422117, 7.297271, 1.935926],
    )


_ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def criterion(request):
    """Record one PASS/FAIL line for an acceptance criterion.

    Usage: ``with criterion(3, "description") as detail: ...``; assign
    ``detail.text`` for extra context in the summary line.
    """
    import contextlib
    import types

    @contextlib.contextmanager
    def record(number, title):
        detail = types.SimpleNamespace(text="")
        try:
            yield detail
        except pytest.skip.Exception as exc:
            _ACCEPTANCE_LINES[number] = f"SKIP  criterion {number}: {title} ({exc})"
            raise
        except BaseException:
            _ACCEPTANCE_LINES[number] = f"FAIL  criterion {number}: {title} {detail.text}".rstrip()
            raise
        _ACCEPTANCE_LINES[number] = f"PASS  criterion {number}: {title} {detail.text}".rstrip()

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE_LINES):
        terminalreporter.write_line(_ACCEPTANCE_LINES[number])
