import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).parent))

from acceptance_log import LINES  # noqa: E402


def pytest_terminal_summary(terminalreporter):
    if not LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in LINES:
        terminalreporter.write_line(line)
