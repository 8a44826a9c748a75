import io

import pytest
from hypothesis import given, strategies as st

from gerryensemble.graph import (Adjacency, DisconnectedGraphError, DistrictGraph, DuplicateIdError, GraphError,
                                 Vtd, ideal_population, load_graph, read_nodes, validate_graph, write_graph)

from conftest import grid, path_graph

NODES_2X2 = """id,population,area,minority_population,county,outer_boundary_length
a,1,1,0,x,2
b,1,1,0,x,2
c,1,1,0,y,2
d,1,1,0,y,2
"""
EDGES_2X2 = """id_a,id_b,shared_perimeter
a,b,1
c,d,1
a,c,1
b,d,1
"""


def test_two_by_two_loads_connected():
    g = load_graph(io.StringIO(NODES_2X2), io.StringIO(EDGES_2X2))
    assert g.num_vtds == 4 and g.num_edges == 4
    assert g.total_population == 4
    assert len(g.components()) == 1
    assert g.county_index == {"x": frozenset("ab"), "y": frozenset("cd")}


def test_duplicate_id():
    nodes = NODES_2X2 + "a,1,1,0,x,2\n"
    with pytest.raises(DuplicateIdError) as exc:
        load_graph(io.StringIO(nodes), io.StringIO(EDGES_2X2))
    assert exc.value.vtd_id == "a"
    assert "DuplicateId('a')" in str(exc.value)


def test_unknown_endpoint():
    with pytest.raises(GraphError, match="UnknownEndpoint"):
        load_graph(io.StringIO(NODES_2X2), io.StringIO(EDGES_2X2 + "a,zz,1\n"))


def test_disconnected_path_lists_components():
    vtds, edges = path_graph(6, missing_edge=2)
    g = DistrictGraph(vtds, edges)
    report = validate_graph(g)
    assert [v.kind for v in report] == ["Disconnected"]
    nodes = io.StringIO()
    nodes.write("id,population,area,minority_population,county,outer_boundary_length\n")
    for v in vtds:
        nodes.write(f"{v.id},1,1,0,c,2\n")
    text = "id_a,id_b,shared_perimeter\n" + "".join(f"{e.vtd_a},{e.vtd_b},1\n" for e in edges)
    nodes.seek(0)
    with pytest.raises(DisconnectedGraphError) as exc:
        load_graph(nodes, io.StringIO(text))
    assert exc.value.components == [["v0", "v1", "v2"], ["v3", "v4", "v5"]]


def test_valid_grid_has_empty_report():
    assert validate_graph(grid(3, 3)).ok


def test_minority_above_population_is_one_violation():
    vtds, edges = path_graph(3)
    vtds[1] = Vtd("v1", 5.0, 1.0, 6.0, "c", 2.0)
    report = validate_graph(DistrictGraph(vtds, edges))
    assert len(report) == 1
    assert report.violations[0].kind == "MinorityExceedsPopulation"


def test_zero_area_names_unit():
    vtds, edges = path_graph(3)
    vtds[2] = Vtd("v2", 1.0, 0.0, 0.0, "c", 2.0)
    report = validate_graph(DistrictGraph(vtds, edges))
    assert len(report) == 1
    assert report.violations[0].ids == ("v2",)


def test_zero_perimeter_rejected():
    vtds, _ = path_graph(2)
    report = validate_graph(DistrictGraph(vtds, [Adjacency("v0", "v1", 0.0)]))
    assert [v.kind for v in report] == ["NonPositivePerimeter"]


def test_bad_header():
    with pytest.raises(GraphError, match="header"):
        read_nodes(io.StringIO("id,pop\nA,1\n"))


@pytest.mark.parametrize("total,d,expected", [(13, 13, 1.0), (100, 4, 25.0), (100, 3, 100 / 3)])
def test_ideal_population(total, d, expected):
    vtds = [Vtd("a", total - 1.0, 1, 0, "c"), Vtd("b", 1.0, 1, 0, "c")]
    g = DistrictGraph(vtds, [Adjacency("a", "b", 1.0)])
    assert ideal_population(g, d) == expected


def test_ideal_population_rejects_zero():
    with pytest.raises(ValueError):
        ideal_population(grid(2, 2), 0)


def test_graph_is_read_only():
    g = grid(2, 2)
    with pytest.raises(ValueError):
        g.population[0] = 5


@given(rows=st.integers(1, 5), cols=st.integers(1, 5), block=st.integers(0, 3), seed=st.integers(0, 1000))
def test_round_trip(tmp_path_factory, rows, cols, block, seed):
    g = grid(rows, cols, county_block=block, population_model="urban", base_population=3.7,
             urban_peak=2.5, minority_base=0.1, minority_peak=0.3, seed=seed, population_jitter=0.2)
    d = tmp_path_factory.mktemp("rt")
    write_graph(g, d / "n.csv", d / "e.csv")
    again = load_graph(str(d / "n.csv"), str(d / "e.csv"))
    assert again == g
    assert len(again.components()) == 1
