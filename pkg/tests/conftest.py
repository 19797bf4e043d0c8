from importlib import resources

import pytest

from igk.graph import LabeledGraph, cycle_graph, parse_tu_dataset, path_graph

DATA = resources.files("igk").joinpath("data")


@pytest.fixture(scope="session")
def data_dir():
    return DATA


@pytest.fixture(scope="session")
def mini():
    return parse_tu_dataset(DATA / "mini", "MINI")


@pytest.fixture(scope="session")
def wlcx():
    return parse_tu_dataset(DATA / "wl_counterexample", "WLCX")


@pytest.fixture
def p3():
    return path_graph(3)


@pytest.fixture
def c3():
    return cycle_graph(3)


def star(n_leaves, label=0):
    return LabeledGraph.from_edges(n_leaves + 1, [(0, i) for i in range(1, n_leaves + 1)],
                                   graph_label=label)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def record():
    """Collect one pass/fail line per acceptance criterion."""
    def add(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return add


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
