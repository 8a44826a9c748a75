import io

import pytest
from hypothesis import HealthCheck, settings

from gerryensemble.graph import Adjacency, DistrictGraph, Vtd
from gerryensemble.plan import Plan
from gerryensemble.synth import SynthSpec, make_grid_state

settings.register_profile("suite", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("suite")


def grid(rows, cols, county_block=0, **kw):
    """Uniform unit-square grid graph (population 1 per cell unless overridden)."""
    g, _ = make_grid_state(SynthSpec(rows, cols, num_districts=1, county_block=county_block, **kw))
    return g


def grid_with_votes(rows, cols, **kw):
    return make_grid_state(SynthSpec(rows, cols, **kw))


def labels_plan(g, labels, d=None):
    return Plan.from_labels(g, labels, d)


def column_plan(g, rows, cols, d):
    """Districts are bands of whole columns, left to right."""
    labels = []
    for r in range(rows):
        for c in range(cols):
            labels.append(min(d, c * d // cols + 1))
    return Plan.from_labels(g, labels, d)


def csv_stream(text):
    return io.StringIO(text)


def path_graph(n, missing_edge=None):
    vtds = [Vtd(f"v{i}", 1.0, 1.0, 0.0, "c", 2.0) for i in range(n)]
    edges = [Adjacency(f"v{i}", f"v{i + 1}", 1.0) for i in range(n - 1) if i != missing_edge]
    return vtds, edges


@pytest.fixture
def grid3():
    return grid(3, 3)


ACCEPTANCE_LINES = []


def report_criterion(number, title, ok, detail=""):
    """Record and print one PASS/FAIL line for an acceptance criterion."""
    line = f"criterion {number} [{'PASS' if ok else 'FAIL'}] {title}" + (f": {detail}" if detail else "")
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
