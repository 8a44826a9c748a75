"""District plans and their incrementally maintained state.

A plan maps every unit id to a district label in ``1..D``. ``PlanState``
wraps a plan with per-district aggregates and the set of conflicted edges
(edges whose endpoints carry different labels) so that a single-unit
relabel costs O(degree).
"""
from __future__ import annotations

import csv
import math
from collections import deque
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

from .graph import DistrictGraph, _open_text


class PlanError(ValueError):
    pass


class UnlabeledVtdError(PlanError):
    def __init__(self, ids):
        self.ids = tuple(ids)
        super().__init__(f"UnlabeledVtd: {', '.join(self.ids[:10])}{' ...' if len(self.ids) > 10 else ''}")


class UnknownVtdError(PlanError):
    def __init__(self, ids):
        self.ids = tuple(ids)
        super().__init__(f"UnknownVtd: {', '.join(self.ids[:10])}")


class LabelOutOfRangeError(PlanError):
    def __init__(self, vtd_id, label, num_districts):
        super().__init__(f"LabelOutOfRange: {vtd_id!r} has label {label}, expected 1..{num_districts}")


class EmptyDistrictError(PlanError):
    def __init__(self, districts):
        self.districts = tuple(districts)
        super().__init__(f"EmptyDistrict: {list(self.districts)}")


class EmptiesDistrictError(PlanError):
    """Raised when a flip would remove the last unit of its district."""


@dataclass
class Plan:
    assignment: Dict[str, int]
    num_districts: int

    @classmethod
    def from_labels(cls, g: DistrictGraph, labels: Sequence[int], num_districts: Optional[int] = None) -> "Plan":
        labels = [int(x) for x in labels]
        d = num_districts if num_districts is not None else max(labels)
        return cls(dict(zip(g.ids, labels)), d)

    def labels_for(self, g: DistrictGraph) -> List[int]:
        missing = [i for i in g.ids if i not in self.assignment]
        if missing:
            raise UnlabeledVtdError(missing)
        if len(self.assignment) != g.num_vtds:
            raise UnknownVtdError([i for i in self.assignment if i not in g.index])
        return [self.assignment[i] for i in g.ids]

    def districts(self) -> Dict[int, set]:
        out = {d: set() for d in range(1, self.num_districts + 1)}
        for vid, lab in self.assignment.items():
            out.setdefault(lab, set()).add(vid)
        return out


def read_plan(source, num_districts: Optional[int] = None) -> Plan:
    with _open_text(source) as f:
        reader = csv.DictReader(f)
        if (reader.fieldnames or []) != ["id", "district"]:
            raise PlanError("plan header must be id,district")
        assignment = {}
        for row in reader:
            if row["id"] in assignment:
                raise PlanError(f"duplicate id {row['id']!r} in plan")
            try:
                assignment[row["id"]] = int(row["district"])
            except ValueError:
                raise PlanError(f"{row['id']!r}: district label {row['district']!r} is not an integer") from None
    d = num_districts if num_districts is not None else max(assignment.values(), default=0)
    return Plan(assignment, d)


def write_plan(plan: Plan, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["id", "district"])
        for vid, lab in plan.assignment.items():
            w.writerow([vid, lab])


@dataclass
class DistrictAggregate:
    population: float
    area: float
    minority_population: float
    boundary_length: float
    vtd_count: int
    county_counts: Dict[str, int]


@dataclass
class FlipDelta:
    vtd: int
    vtd_id: str
    old_label: int
    new_label: int
    # (population, area, minority, boundary) of both districts before the flip
    old_before: tuple
    new_before: tuple
    conflicted_delta: int
    added_edges: tuple
    removed_edges: tuple


class PlanState:
    """Mutable plan with cached aggregates. Single owner; do not share while mutating."""

    def __init__(self, g: DistrictGraph, plan: Plan):
        labels = plan.labels_for(g)
        d = plan.num_districts
        for vid, lab in zip(g.ids, labels):
            if not 1 <= lab <= d:
                raise LabelOutOfRangeError(vid, lab, d)
        self.g = g
        self.num_districts = d
        self.labels: List[int] = labels
        self._recompute()
        empty = [k for k in range(1, d + 1) if self.count[k] == 0]
        if empty:
            raise EmptyDistrictError(empty)

    def _recompute(self):
        g, d, labels = self.g, self.num_districts, self.labels
        self.pop = [0.0] * (d + 1)
        self.area = [0.0] * (d + 1)
        self.minority = [0.0] * (d + 1)
        self.boundary = [0.0] * (d + 1)
        self.count = [0] * (d + 1)
        self.members = [set() for _ in range(d + 1)]
        self.county_counts = [dict() for _ in range(g.num_counties)]
        pop, area, mino, outer, county = g.pop_l, g.area_l, g.minority_l, g.outer_l, g.county_l
        for v, lab in enumerate(labels):
            self.pop[lab] += pop[v]
            self.area[lab] += area[v]
            self.minority[lab] += mino[v]
            self.boundary[lab] += outer[v]
            self.count[lab] += 1
            self.members[lab].add(v)
            cc = self.county_counts[county[v]]
            cc[lab] = cc.get(lab, 0) + 1
        self._cedges: List[int] = []
        self._cpos = [-1] * g.num_edges
        for k, (u, w, length) in enumerate(zip(g.edge_u.tolist(), g.edge_v.tolist(), g.edge_len.tolist())):
            if labels[u] != labels[w]:
                self.boundary[labels[u]] += length
                self.boundary[labels[w]] += length
                self._cpos[k] = len(self._cedges)
                self._cedges.append(k)

    # -- conflicted edge set -------------------------------------------------

    @property
    def conflicted_count(self) -> int:
        return len(self._cedges)

    @property
    def conflicted(self) -> frozenset:
        return frozenset(self._cedges)

    def conflicted_edge(self, i: int) -> int:
        return self._cedges[i]

    def _add_edge(self, k):
        self._cpos[k] = len(self._cedges)
        self._cedges.append(k)

    def _remove_edge(self, k):
        i = self._cpos[k]
        last = self._cedges.pop()
        if last != k:
            self._cedges[i] = last
            self._cpos[last] = i
        self._cpos[k] = -1

    # -- views ---------------------------------------------------------------

    @property
    def plan(self) -> Plan:
        return Plan(dict(zip(self.g.ids, self.labels)), self.num_districts)

    def aggregate(self, district: int) -> DistrictAggregate:
        names = self.g.county_names
        cc = {names[c]: counts[district] for c, counts in enumerate(self.county_counts) if district in counts}
        return DistrictAggregate(self.pop[district], self.area[district], self.minority[district],
                                 self.boundary[district], self.count[district], cc)

    def aggregates(self) -> List[DistrictAggregate]:
        return [self.aggregate(k) for k in range(1, self.num_districts + 1)]

    def copy(self) -> "PlanState":
        return PlanState(self.g, self.plan)

    def __eq__(self, other):
        if not isinstance(other, PlanState):
            return NotImplemented
        return (self.g is other.g and self.labels == other.labels and self.pop == other.pop
                and self.area == other.area and self.minority == other.minority
                and self.boundary == other.boundary and self.count == other.count
                and self.county_counts == other.county_counts and self.conflicted == other.conflicted)

    __hash__ = None

    # -- flips ---------------------------------------------------------------

    def flip_effect(self, v: int, new: int):
        """Aggregates of (old, new) districts and conflicted-count change if ``v`` moved to ``new``.

        Pure; shares arithmetic with :meth:`apply_flip` so both agree bit for bit.
        """
        g = self.g
        labels = self.labels
        old = labels[v]
        b_old = self.boundary[old] - g.outer_l[v]
        b_new = self.boundary[new] + g.outer_l[v]
        dconf = 0
        for w, _, length in g.neighbors[v]:
            lw = labels[w]
            if lw == old:
                b_old += length
                b_new += length
                dconf += 1
            elif lw == new:
                b_old -= length
                b_new -= length
                dconf -= 1
            else:
                b_old -= length
                b_new += length
        p, a, m = g.pop_l[v], g.area_l[v], g.minority_l[v]
        old_agg = (self.pop[old] - p, self.area[old] - a, self.minority[old] - m, b_old)
        new_agg = (self.pop[new] + p, self.area[new] + a, self.minority[new] + m, b_new)
        return old_agg, new_agg, dconf

    def apply_flip(self, v, new_label: int) -> FlipDelta:
        """Relabel unit ``v`` (index or id) to ``new_label``; returns an invertible delta."""
        if isinstance(v, str):
            v = self.g.index[v]
        old = self.labels[v]
        if new_label == old:
            raise PlanError(f"flip of {self.g.ids[v]!r} to its current label {old}")
        if not 1 <= new_label <= self.num_districts:
            raise LabelOutOfRangeError(self.g.ids[v], new_label, self.num_districts)
        if self.count[old] == 1:
            raise EmptiesDistrictError(f"EmptiesDistrict: moving {self.g.ids[v]!r} empties district {old}")
        old_before = (self.pop[old], self.area[old], self.minority[old], self.boundary[old])
        new_before = (self.pop[new_label], self.area[new_label], self.minority[new_label], self.boundary[new_label])
        old_agg, new_agg, dconf = self.flip_effect(v, new_label)
        added, removed = [], []
        labels = self.labels
        for w, k, _ in self.g.neighbors[v]:
            lw = labels[w]
            if lw == old:
                self._add_edge(k)
                added.append(k)
            elif lw == new_label:
                self._remove_edge(k)
                removed.append(k)
        self._set(v, old, new_label, old_agg, new_agg)
        return FlipDelta(v, self.g.ids[v], old, new_label, old_before, new_before, dconf,
                         tuple(added), tuple(removed))

    def _set(self, v, old, new, old_agg, new_agg):
        self.pop[old], self.area[old], self.minority[old], self.boundary[old] = old_agg
        self.pop[new], self.area[new], self.minority[new], self.boundary[new] = new_agg
        self.count[old] -= 1
        self.count[new] += 1
        self.members[old].discard(v)
        self.members[new].add(v)
        cc = self.county_counts[self.g.county_l[v]]
        left = cc[old] - 1
        if left:
            cc[old] = left
        else:
            del cc[old]
        cc[new] = cc.get(new, 0) + 1
        self.labels[v] = new

    def revert(self, delta: FlipDelta) -> None:
        """Undo ``delta``; restores aggregates to their exact prior values."""
        v, old, new = delta.vtd, delta.old_label, delta.new_label
        if self.labels[v] != new:
            raise PlanError("delta does not match current state")
        for k in delta.added_edges:
            self._remove_edge(k)
        for k in delta.removed_edges:
            self._add_edge(k)
        self._set(v, new, old, delta.new_before, delta.old_before)

    # -- contiguity ----------------------------------------------------------

    def is_contiguous(self, district: int) -> bool:
        members = self.members[district]
        if not members:
            return False
        labels, nbrs = self.labels, self.g.neighbors
        start = next(iter(members))
        seen = {start}
        stack = [start]
        while stack:
            u = stack.pop()
            for w, _, _ in nbrs[u]:
                if labels[w] == district and w not in seen:
                    seen.add(w)
                    stack.append(w)
        return len(seen) == len(members)

    def removal_keeps_connected(self, v: int) -> bool:
        """Whether the district of ``v`` stays connected once ``v`` leaves it.

        Assumes the district is connected now. Searches the district minus
        ``v`` from one same-district neighbor until every other one is reached.
        """
        labels, nbrs = self.labels, self.g.neighbors
        d = labels[v]
        targets = {w for w, _, _ in nbrs[v] if labels[w] == d}
        if len(targets) <= 1:
            return len(targets) == 1
        start = targets.pop()
        seen = {v, start}
        stack = [start]
        while stack:
            u = stack.pop()
            for w, _, _ in nbrs[u]:
                if w not in seen and labels[w] == d:
                    seen.add(w)
                    targets.discard(w)
                    if not targets:
                        return True
                    stack.append(w)
        return False


def new_plan_state(g: DistrictGraph, p: Plan) -> PlanState:
    return PlanState(g, p)


def is_contiguous(state: PlanState, district: int) -> bool:
    return state.is_contiguous(district)


def apply_flip(state: PlanState, vtd, new_label: int) -> FlipDelta:
    return state.apply_flip(vtd, new_label)


def max_district_deviation(state, reference: Plan) -> int:
    """Largest per-district symmetric difference (in units) between two plans."""
    plan = state.plan if isinstance(state, PlanState) else state
    if set(plan.assignment) != set(reference.assignment):
        raise PlanError("plans cover different vertex sets")
    if plan.num_districts != reference.num_districts:
        raise PlanError("plans have different district counts")
    mine, theirs = plan.districts(), reference.districts()
    return max((len(mine.get(k, set()) ^ theirs.get(k, set())) for k in set(mine) | set(theirs)), default=0)


def recompute_aggregates(state: PlanState) -> dict:
    """From-scratch aggregates, for checking the incremental ones."""
    fresh = PlanState.__new__(PlanState)
    fresh.g, fresh.num_districts, fresh.labels = state.g, state.num_districts, list(state.labels)
    fresh._recompute()
    return {"pop": fresh.pop, "area": fresh.area, "minority": fresh.minority, "boundary": fresh.boundary,
            "count": fresh.count, "county_counts": fresh.county_counts, "conflicted": fresh.conflicted}


def aggregates_close(state: PlanState, rel: float = 1e-9) -> bool:
    ref = recompute_aggregates(state)
    for key in ("pop", "area", "minority", "boundary"):
        for x, y in zip(getattr(state, key), ref[key]):
            if not math.isclose(x, y, rel_tol=rel, abs_tol=rel):
                return False
    return (state.count == ref["count"] and state.county_counts == ref["county_counts"]
            and state.conflicted == ref["conflicted"])


def components_of(state: PlanState, district: int) -> List[List[int]]:
    return state.g.components(state.members[district])


def bfs_connected(g: DistrictGraph, members) -> bool:
    members = set(members)
    if not members:
        return False
    start = next(iter(members))
    seen = {start}
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for w, _, _ in g.neighbors[u]:
            if w in members and w not in seen:
                seen.add(w)
                queue.append(w)
    return len(seen) == len(members)
