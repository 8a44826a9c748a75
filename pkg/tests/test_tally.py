import io

import pytest
from hypothesis import given, strategies as st

from gerryensemble.graph import Adjacency, DistrictGraph, Vtd
from gerryensemble.plan import Plan
from gerryensemble.tally import (VoteError, VoteTable, interpolated_seats, ranked_shares, read_votes, seat_count,
                                 tally, tally_labels, write_votes)

from conftest import column_plan, grid_with_votes

JUDGES_2012 = [35.5, 40.0, 42.6, 42.7, 44.5, 48.5, 48.8, 50.5, 57.0, 57.5, 59.2, 64.6, 66.0]


def two_unit_votes():
    return VoteTable("t", {"A": 60.0, "B": 30.0}, {"A": 40.0, "B": 70.0})


def test_two_district_tally():
    res = tally(Plan({"A": 1, "B": 2}, 2), two_unit_votes())
    assert [r.dem_share for r in res] == [0.6, 0.3]
    assert [r.winner for r in res] == ["Dem", "Rep"]
    assert seat_count(res) == 1


def test_even_votes_tie_to_republicans():
    votes = VoteTable("t", {"A": 5.0, "B": 7.0}, {"A": 5.0, "B": 7.0})
    res = tally(Plan({"A": 1, "B": 2}, 2), votes)
    assert [r.dem_share for r in res] == [0.5, 0.5]
    assert seat_count(res) == 0
    assert all(r.winner == "Rep" for r in res)


def test_locality_of_a_move():
    g, votes = grid_with_votes(4, 4, num_districts=4, population_model="urban", urban_peak=3,
                               urban_dem_boost=0.4, seed=3)
    plan = column_plan(g, 4, 4, 4)
    before = tally(plan, votes)
    moved = dict(plan.assignment)
    moved[g.ids[1]] = 1
    after = tally(Plan(moved, 4), votes)
    changed = [b.district for b, a in zip(before, after) if (b.dem_votes, b.rep_votes) != (a.dem_votes, a.rep_votes)]
    assert changed == [1, 2]


def test_missing_unit_and_zero_vote_district():
    with pytest.raises(VoteError):
        tally(Plan({"A": 1, "B": 2, "C": 2}, 2), two_unit_votes())
    empty = VoteTable("t", {"A": 0.0, "B": 3.0}, {"A": 0.0, "B": 1.0})
    with pytest.raises(VoteError):
        tally(Plan({"A": 1, "B": 2}, 2), empty)


def test_extra_units_in_votes_rejected():
    vtds = [Vtd("A", 1, 1, 0, "c"), Vtd("B", 1, 1, 0, "c")]
    g = DistrictGraph(vtds, [Adjacency("A", "B", 1.0)])
    votes = VoteTable("t", {"A": 1.0, "B": 1.0, "Z": 1.0}, {"A": 1.0, "B": 1.0, "Z": 1.0})
    with pytest.raises(VoteError):
        votes.arrays_for(g)
    with pytest.raises(VoteError):
        tally(Plan({"A": 1, "B": 2}, 2), votes)


def test_judges_column_seats():
    shares = [x / 100 for x in JUDGES_2012]
    assert seat_count(shares) == 6
    assert interpolated_seats(shares) == pytest.approx(6 + 0.5 / 1.7, abs=1e-12)
    assert interpolated_seats(shares) == pytest.approx(6.28, abs=0.015)


def test_worked_interpolation():
    shares = [0.40, 0.467, 0.501, 0.55, 0.6, 0.7]
    assert seat_count(shares) == 4
    assert interpolated_seats(shares) == pytest.approx(4.03, abs=1e-2)
    assert interpolated_seats(shares) == pytest.approx(4 + 0.1 / 3.4, abs=1e-12)


def test_symmetric_marginals_give_half():
    eps = 0.013
    assert interpolated_seats([0.3, 0.5 - eps, 0.5 + eps, 0.8]) == pytest.approx(2.5)


def test_sweeps():
    assert interpolated_seats([0.6, 0.7, 0.8]) == 3.0
    assert interpolated_seats([0.2, 0.3, 0.5]) == 0.0


def test_votes_csv_round_trip(tmp_path):
    votes = VoteTable("x", {"a": 1.5, "b": 2.0}, {"a": 3.0, "b": 0.25})
    write_votes(votes, tmp_path / "v.csv")
    back = read_votes(str(tmp_path / "v.csv"))
    assert back.dem == votes.dem and back.rep == votes.rep
    with pytest.raises(VoteError):
        read_votes(io.StringIO("id,d,r\n"))


share = st.floats(0.01, 0.99, allow_nan=False)


@given(st.lists(share, min_size=2, max_size=15))
def test_interpolated_between_seat_counts(shares):
    s = seat_count(shares)
    x = interpolated_seats(shares)
    if 0 < s < len(shares):
        assert s <= x <= s + 1
    ranked = ranked_shares(shares)
    assert ranked == sorted(ranked)
    assert s == sum(1 for r in ranked if r > 0.5)


@given(st.integers(0, 200), st.permutations([1, 2, 3, 4]))
def test_conservation_and_label_invariance(seed, perm):
    g, votes = grid_with_votes(4, 4, num_districts=4, population_model="urban", urban_peak=3,
                               urban_dem_boost=0.3, vote_noise=0.05, seed=seed)
    dem, rep = votes.arrays_for(g)
    labels = column_plan(g, 4, 4, 4).labels_for(g)
    res = tally_labels(labels, dem, rep, 4)
    assert sum(r.dem_votes for r in res) == pytest.approx(votes.total_dem, rel=1e-12)
    relabeled = tally_labels([perm[x - 1] for x in labels], dem, rep, 4)
    assert ranked_shares(res) == ranked_shares(relabeled)
