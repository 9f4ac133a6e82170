"""One line per acceptance criterion, collected for the terminal summary."""

LINES = []


def record(number, ok, summary):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {summary}"
    LINES.append(line)
    print(line)
    return ok
