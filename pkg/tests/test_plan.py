import random

import pytest
from hypothesis import given, strategies as st

from gerryensemble.plan import (EmptiesDistrictError, EmptyDistrictError, LabelOutOfRangeError, Plan, PlanState,
                                UnlabeledVtdError, aggregates_close, max_district_deviation, read_plan,
                                recompute_aggregates, write_plan)

from conftest import column_plan, grid, labels_plan


def test_two_by_two_left_right_has_two_conflicted_edges():
    g = grid(2, 2)
    st_ = PlanState(g, labels_plan(g, [1, 2, 1, 2]))
    assert st_.conflicted_count == 2
    # both conflicted edges join the left and right columns
    for k in st_.conflicted:
        assert {int(g.edge_u[k]) % 2, int(g.edge_v[k]) % 2} == {0, 1}


def test_single_district_has_no_conflicts():
    g = grid(3, 3)
    assert PlanState(g, labels_plan(g, [1] * 9, 1)).conflicted_count == 0


def test_missing_unit():
    g = grid(2, 2)
    plan = Plan({i: 1 for i in g.ids[:3]}, 1)
    with pytest.raises(UnlabeledVtdError):
        PlanState(g, plan)


def test_label_out_of_range_and_empty():
    g = grid(2, 2)
    with pytest.raises(LabelOutOfRangeError):
        PlanState(g, labels_plan(g, [1, 1, 1, 3], 2))
    with pytest.raises(EmptyDistrictError):
        PlanState(g, labels_plan(g, [1, 1, 1, 1], 2))


def test_contiguity_examples(grid3):
    g = grid3
    left = PlanState(g, labels_plan(g, [1, 2, 2, 1, 2, 2, 1, 2, 2]))
    assert left.is_contiguous(1)
    corners = PlanState(g, labels_plan(g, [1, 2, 2, 2, 2, 2, 2, 2, 1]))
    assert not corners.is_contiguous(1)
    ring = PlanState(g, labels_plan(g, [1, 1, 1, 1, 2, 1, 1, 1, 1]))
    assert ring.is_contiguous(1)


def test_interior_flip_raises_conflicts_by_degree(grid3):
    g = grid3
    st_ = PlanState(g, labels_plan(g, [1, 1, 1, 1, 1, 1, 1, 1, 2]))
    before = st_.conflicted_count
    center = 4
    st_.apply_flip(center, 2)
    assert st_.conflicted_count == before + len(g.neighbors[center])


def test_flip_revert_restores_state(grid3):
    g = grid3
    st_ = PlanState(g, column_plan(g, 3, 3, 3))
    ref = PlanState(g, column_plan(g, 3, 3, 3))
    delta = st_.apply_flip(1, 1)
    assert st_ != ref
    st_.revert(delta)
    assert st_ == ref


def test_flip_sole_unit_empties(grid3):
    g = grid3
    st_ = PlanState(g, labels_plan(g, [1, 2, 2, 2, 2, 2, 2, 2, 2]))
    with pytest.raises(EmptiesDistrictError, match="EmptiesDistrict"):
        st_.apply_flip(0, 2)


def test_max_district_deviation_examples():
    g = grid(2, 2)
    ref = labels_plan(g, [1, 2, 1, 2])
    assert max_district_deviation(PlanState(g, ref), ref) == 0
    moved = labels_plan(g, [2, 2, 1, 2])
    assert max_district_deviation(PlanState(g, moved), ref) == 1
    swapped = labels_plan(g, [2, 1, 1, 2])
    assert max_district_deviation(PlanState(g, swapped), ref) == 2


def test_plan_csv_round_trip(tmp_path):
    g = grid(3, 3)
    plan = column_plan(g, 3, 3, 3)
    write_plan(plan, tmp_path / "p.csv")
    assert read_plan(str(tmp_path / "p.csv")) == plan
    assert (tmp_path / "p.csv").read_text().splitlines()[0] == "id,district"


def _union_find_contiguous(g, labels, d):
    parent = list(range(len(labels)))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for u, v in zip(g.edge_u.tolist(), g.edge_v.tolist()):
        if labels[u] == labels[v]:
            parent[find(u)] = find(v)
    roots = {}
    for v, lab in enumerate(labels):
        roots.setdefault(lab, set()).add(find(v))
    return {k: len(roots.get(k, ())) == 1 for k in range(1, d + 1)}


@given(st.integers(2, 4), st.integers(2, 4), st.integers(2, 4), st.data())
def test_contiguity_matches_union_find(rows, cols, d, data):
    g = grid(rows, cols)
    n = rows * cols
    d = min(d, n)
    labels = data.draw(st.lists(st.integers(1, d), min_size=n, max_size=n).filter(lambda l: len(set(l)) == d))
    state = PlanState(g, labels_plan(g, labels, d))
    uf = _union_find_contiguous(g, labels, d)
    assert {k: state.is_contiguous(k) for k in range(1, d + 1)} == uf


def _exact(state):
    return (list(state.labels), list(state.pop), list(state.area), list(state.minority), list(state.boundary),
            list(state.count), [dict(c) for c in state.county_counts], state.conflicted)


@given(st.integers(0, 10_000), st.integers(1, 200))
def test_random_flips_match_recompute(seed, n_flips):
    g = grid(4, 5, county_block=2, population_model="urban", base_population=7, urban_peak=3,
             minority_base=0.1, minority_peak=0.5, population_jitter=0.3, seed=seed)
    rng = random.Random(seed)
    state = PlanState(g, column_plan(g, 4, 5, 3))
    snapshots, deltas = [], []
    for _ in range(n_flips):
        k = state.conflicted_edge(rng.randrange(state.conflicted_count))
        a, b = int(g.edge_u[k]), int(g.edge_v[k])
        v, new = (a, state.labels[b]) if rng.random() < 0.5 else (b, state.labels[a])
        if state.count[state.labels[v]] == 1:
            continue
        snapshots.append(_exact(state))
        deltas.append(state.apply_flip(v, new))
    assert aggregates_close(state)
    for snap, delta in zip(reversed(snapshots), reversed(deltas)):
        state.revert(delta)
        assert _exact(state) == snap


def test_hundred_thousand_flips_match_recompute():
    g = grid(8, 8, county_block=3, population_model="urban", base_population=11, urban_peak=4,
             minority_base=0.05, minority_peak=0.6, population_jitter=0.4, seed=5)
    rng = random.Random(5)
    state = PlanState(g, column_plan(g, 8, 8, 4))
    for _ in range(100_000):
        k = state.conflicted_edge(rng.randrange(state.conflicted_count))
        a, b = int(g.edge_u[k]), int(g.edge_v[k])
        v, new = (a, state.labels[b]) if rng.random() < 0.5 else (b, state.labels[a])
        if state.count[state.labels[v]] > 1:
            state.apply_flip(v, new)
    assert aggregates_close(state, rel=1e-9)
    ref = recompute_aggregates(state)
    assert state.count == ref["count"] and state.conflicted == ref["conflicted"]
