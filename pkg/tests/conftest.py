from __future__ import annotations

import pytest

from rpmlab.graph import build_graph


@pytest.fixture
def edge():
    return build_graph(["x", "y"], [("x", "y")])


@pytest.fixture
def path3():
    return build_graph(["x", "y", "z"], [("x", "y"), ("y", "z")])


@pytest.fixture
def triangle():
    return build_graph(["a", "b", "c"], [("a", "b"), ("b", "c"), ("a", "c")])


@pytest.fixture
def edge_plus():
    return build_graph(["x", "y"], [("x", "y")], [("x", "EXT")])


ACCEPTANCE: dict[str, str] = {}


def record(criterion: int, ok: bool, detail: str) -> str:
    line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'} | {detail}"
    ACCEPTANCE[f"{criterion}"] = line
    print(line, flush=True)
    return line


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=int):
        terminalreporter.write_line(ACCEPTANCE[key])
