import pytest

from ratelab._backend import compiled_available

BACKENDS = ["python"] + (["compiled"] if compiled_available() else [])


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


ACCEPTANCE_KEY = pytest.StashKey[dict]()


@pytest.fixture
def verdict(request):
    """Record one acceptance criterion; the lines are printed in the terminal summary."""
    lines = request.config.stash.setdefault(ACCEPTANCE_KEY, {})

    def report(number, checks):
        ok = all(c[1] for c in checks)
        detail = "; ".join(f"{name}: {'ok' if good else 'FAIL'} ({info})"
                           for name, good, info in checks)
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines[number] = line
        print(line)
        return ok
    return report


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE_KEY, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for k in sorted(lines):
            terminalreporter.write_line(lines[k])
