import pytest
from hypothesis import settings

from shape_embed.graph import fuzzy_graph
from shape_embed.synthetic import benchmark

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")


@pytest.fixture(scope="session")
def bench():
    return benchmark(0)


@pytest.fixture(scope="session")
def bench_graph(bench):
    return fuzzy_graph(bench, 15)


_ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Record one verdict line per acceptance criterion for the terminal summary."""
    lines = request.config.stash.setdefault(_ACCEPTANCE_KEY, [])

    def record(number, title, ok, detail, elapsed, limit):
        status = "PASS" if ok else "FAIL"
        line = f"[{status}] criterion {number:>2}: {title} ({detail}; {elapsed:.2f}s of {limit:g}s)"
        lines.append((number, line))
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
