"""Voting-unit adjacency graph and its CSV ingestion.

Vertices are voting units carrying population, area, minority population,
county and the length of border they share with the state exterior. Edges
are positive-length shared borders between two units. The exterior vertex
is never materialized; only its border lengths matter for district
perimeters, and they live on each unit as ``outer_boundary_length``.
"""
from __future__ import annotations

import csv
import io
import os
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np

NODE_FIELDS = ["id", "population", "area", "minority_population", "county", "outer_boundary_length"]
BBOX_FIELDS = ["min_x", "min_y", "max_x", "max_y"]
EDGE_FIELDS = ["id_a", "id_b", "shared_perimeter"]


class GraphError(ValueError):
    """Base class for malformed graph input."""


class DuplicateIdError(GraphError):
    def __init__(self, vtd_id):
        super().__init__(f"DuplicateId({vtd_id!r})")
        self.vtd_id = vtd_id


class UnknownEndpointError(GraphError):
    def __init__(self, id_a, id_b, missing):
        super().__init__(f"UnknownEndpoint: edge ({id_a!r}, {id_b!r}) references {missing!r}")
        self.edge = (id_a, id_b)
        self.missing = missing


class InvalidValueError(GraphError):
    def __init__(self, message, ids):
        super().__init__(message)
        self.ids = tuple(ids)


class DisconnectedGraphError(GraphError):
    def __init__(self, components):
        self.components = [sorted(c) for c in components]
        summary = "; ".join("{" + ", ".join(c) + "}" for c in self.components)
        super().__init__(f"Disconnected: {len(self.components)} components: {summary}")


@dataclass(frozen=True)
class Vtd:
    id: str
    population: float
    area: float
    minority_population: float
    county_id: str
    outer_boundary_length: float = 0.0
    bbox: Optional[Tuple[float, float, float, float]] = None


@dataclass(frozen=True)
class Adjacency:
    vtd_a: str
    vtd_b: str
    shared_perimeter: float


@dataclass(frozen=True)
class Violation:
    kind: str
    ids: Tuple[str, ...]
    message: str


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __len__(self):
        return len(self.violations)

    def __iter__(self):
        return iter(self.violations)


class DistrictGraph:
    """Immutable weighted adjacency graph over voting units.

    Vertices are addressed either by string id or by their integer index,
    which is their position in the node table. Array attributes are
    read-only numpy views indexed by that position.
    """

    def __init__(self, vtds: Sequence[Vtd], adjacencies: Iterable[Adjacency]):
        self.vtds: Tuple[Vtd, ...] = tuple(vtds)
        self.index = {}
        for i, v in enumerate(self.vtds):
            if v.id in self.index:
                raise DuplicateIdError(v.id)
            self.index[v.id] = i
        self.ids = tuple(v.id for v in self.vtds)
        n = len(self.vtds)

        seen = set()
        adj_list = []
        for e in adjacencies:
            for end in (e.vtd_a, e.vtd_b):
                if end not in self.index:
                    raise UnknownEndpointError(e.vtd_a, e.vtd_b, end)
            key = frozenset((e.vtd_a, e.vtd_b))
            if key in seen:
                raise GraphError(f"DuplicateEdge({e.vtd_a!r}, {e.vtd_b!r})")
            seen.add(key)
            adj_list.append(e)
        self.adjacencies: Tuple[Adjacency, ...] = tuple(adj_list)

        counties = sorted({v.county_id for v in self.vtds})
        self.county_names: Tuple[str, ...] = tuple(counties)
        code = {c: k for k, c in enumerate(counties)}

        self.population = _frozen([v.population for v in self.vtds])
        self.area = _frozen([v.area for v in self.vtds])
        self.minority = _frozen([v.minority_population for v in self.vtds])
        self.outer = _frozen([v.outer_boundary_length for v in self.vtds])
        self.county = _frozen([code[v.county_id] for v in self.vtds], dtype=np.int64)
        self.has_bbox = n > 0 and all(v.bbox is not None for v in self.vtds)
        self.bbox = _frozen([v.bbox for v in self.vtds]) if self.has_bbox else None
        # list mirrors for scalar access on the sampler hot path
        self.pop_l = self.population.tolist()
        self.area_l = self.area.tolist()
        self.minority_l = self.minority.tolist()
        self.outer_l = self.outer.tolist()
        self.county_l = self.county.tolist()

        self.edge_u = _frozen([self.index[e.vtd_a] for e in adj_list], dtype=np.int64)
        self.edge_v = _frozen([self.index[e.vtd_b] for e in adj_list], dtype=np.int64)
        self.edge_len = _frozen([e.shared_perimeter for e in adj_list])

        # (neighbor, edge index, shared length) per vertex; plain tuples for the hot path
        nbrs = [[] for _ in range(n)]
        for k, e in enumerate(adj_list):
            a, b = self.index[e.vtd_a], self.index[e.vtd_b]
            nbrs[a].append((b, k, e.shared_perimeter))
            nbrs[b].append((a, k, e.shared_perimeter))
        self.neighbors: Tuple[Tuple[Tuple[int, int, float], ...], ...] = tuple(tuple(x) for x in nbrs)

        self.county_index = {c: frozenset(v.id for v in self.vtds if v.county_id == c) for c in counties}
        self.total_population = float(self.population.sum())
        self.total_area = float(self.area.sum())
        self.total_minority = float(self.minority.sum())

    @property
    def num_vtds(self) -> int:
        return len(self.vtds)

    @property
    def num_edges(self) -> int:
        return len(self.adjacencies)

    @property
    def num_counties(self) -> int:
        return len(self.county_names)

    def components(self, members=None):
        """Connected components (as lists of indices) of the subgraph induced by ``members``."""
        allowed = set(range(self.num_vtds)) if members is None else set(members)
        comps = []
        seen = set()
        for s in sorted(allowed):
            if s in seen:
                continue
            comp = [s]
            seen.add(s)
            queue = deque([s])
            while queue:
                u = queue.popleft()
                for w, _, _ in self.neighbors[u]:
                    if w in allowed and w not in seen:
                        seen.add(w)
                        comp.append(w)
                        queue.append(w)
            comps.append(sorted(comp))
        return comps

    def __eq__(self, other):
        if not isinstance(other, DistrictGraph):
            return NotImplemented
        mine = {frozenset((e.vtd_a, e.vtd_b)): e.shared_perimeter for e in self.adjacencies}
        theirs = {frozenset((e.vtd_a, e.vtd_b)): e.shared_perimeter for e in other.adjacencies}
        return self.vtds == other.vtds and mine == theirs

    __hash__ = None

    def __repr__(self):
        return f"DistrictGraph({self.num_vtds} vtds, {self.num_edges} edges, {self.num_counties} counties)"


def _frozen(values, dtype=float):
    arr = np.asarray(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


def ideal_population(g: DistrictGraph, num_districts: int) -> float:
    """Total population divided evenly among ``num_districts`` (not rounded)."""
    if num_districts < 1:
        raise ValueError("num_districts must be >= 1")
    return g.total_population / num_districts


def validate_graph(g: DistrictGraph) -> ValidationReport:
    report = ValidationReport()
    add = report.violations.append
    for v in g.vtds:
        if v.population < 0:
            add(Violation("NegativePopulation", (v.id,), f"{v.id}: population {v.population} < 0"))
        if v.minority_population < 0:
            add(Violation("NegativeMinority", (v.id,), f"{v.id}: minority_population < 0"))
        if v.minority_population > v.population:
            add(Violation("MinorityExceedsPopulation", (v.id,),
                          f"{v.id}: minority_population {v.minority_population} > population {v.population}"))
        if not v.area > 0:
            add(Violation("NonPositiveArea", (v.id,), f"{v.id}: area {v.area} must be > 0"))
        if v.outer_boundary_length < 0:
            add(Violation("NegativeOuterBoundary", (v.id,), f"{v.id}: outer_boundary_length < 0"))
        if v.bbox is not None and (v.bbox[2] < v.bbox[0] or v.bbox[3] < v.bbox[1]):
            add(Violation("InvalidBbox", (v.id,), f"{v.id}: bbox max below min"))
    for e in g.adjacencies:
        if e.vtd_a == e.vtd_b:
            add(Violation("SelfLoop", (e.vtd_a,), f"self-loop at {e.vtd_a}"))
        if not e.shared_perimeter > 0:
            add(Violation("NonPositivePerimeter", (e.vtd_a, e.vtd_b),
                          f"edge ({e.vtd_a}, {e.vtd_b}): shared_perimeter {e.shared_perimeter} must be > 0"))
    if g.num_vtds == 0:
        add(Violation("Empty", (), "graph has no vtds"))
    else:
        comps = g.components()
        if len(comps) > 1:
            named = tuple(",".join(g.ids[i] for i in c) for c in comps)
            add(Violation("Disconnected", named, f"{len(comps)} connected components"))
    return report


def _raise_first(g: DistrictGraph, report: ValidationReport):
    for viol in report:
        if viol.kind == "Disconnected":
            raise DisconnectedGraphError([[g.ids[i] for i in c] for c in g.components()])
        raise InvalidValueError(viol.message, viol.ids)


def _open_text(source):
    if isinstance(source, (str, os.PathLike)):
        return open(source, newline="", encoding="utf-8")
    if isinstance(source, io.TextIOBase) or hasattr(source, "read"):
        return _NoClose(source)
    raise TypeError(f"cannot read tabular data from {type(source).__name__}")


class _NoClose:
    def __init__(self, f):
        self.f = f

    def __enter__(self):
        return self.f

    def __exit__(self, *exc):
        return False


def _num(text, column, row_id):
    try:
        return float(text)
    except (TypeError, ValueError):
        raise GraphError(f"{row_id}: column {column!r} is not a number: {text!r}") from None


def read_nodes(source) -> list:
    with _open_text(source) as f:
        reader = csv.DictReader(f)
        header = reader.fieldnames or []
        if header[:len(NODE_FIELDS)] != NODE_FIELDS:
            raise GraphError(f"nodes header must start with {','.join(NODE_FIELDS)}; got {','.join(header)}")
        with_bbox = header[len(NODE_FIELDS):] == BBOX_FIELDS
        if len(header) > len(NODE_FIELDS) and not with_bbox:
            raise GraphError(f"unexpected node columns {header[len(NODE_FIELDS):]}")
        out = []
        for row in reader:
            rid = row["id"]
            bbox = None
            if with_bbox and any(row[k] not in ("", None) for k in BBOX_FIELDS):
                bbox = tuple(_num(row[k], k, rid) for k in BBOX_FIELDS)
            out.append(Vtd(
                id=rid,
                population=_num(row["population"], "population", rid),
                area=_num(row["area"], "area", rid),
                minority_population=_num(row["minority_population"], "minority_population", rid),
                county_id=row["county"],
                outer_boundary_length=_num(row["outer_boundary_length"], "outer_boundary_length", rid),
                bbox=bbox,
            ))
    return out


def read_edges(source) -> list:
    with _open_text(source) as f:
        reader = csv.DictReader(f)
        if (reader.fieldnames or []) != EDGE_FIELDS:
            raise GraphError(f"edges header must be {','.join(EDGE_FIELDS)}")
        return [Adjacency(r["id_a"], r["id_b"], _num(r["shared_perimeter"], "shared_perimeter", r["id_a"]))
                for r in reader]


def load_graph(nodes_source, edges_source) -> DistrictGraph:
    """Parse node and edge tables into a validated graph.

    Raises a :class:`GraphError` subclass naming the offending ids when
    the data break any graph invariant.
    """
    g = DistrictGraph(read_nodes(nodes_source), read_edges(edges_source))
    report = validate_graph(g)
    if not report.ok:
        _raise_first(g, report)
    return g


def fmt_number(x) -> str:
    x = float(x)
    if x.is_integer() and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def write_graph(g: DistrictGraph, nodes_path, edges_path) -> None:
    with open(nodes_path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(NODE_FIELDS + (BBOX_FIELDS if g.has_bbox else []))
        for v in g.vtds:
            row = [v.id, fmt_number(v.population), fmt_number(v.area), fmt_number(v.minority_population),
                   v.county_id, fmt_number(v.outer_boundary_length)]
            if g.has_bbox:
                row += [fmt_number(c) for c in v.bbox]
            w.writerow(row)
    with open(edges_path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(EDGE_FIELDS)
        for e in g.adjacencies:
            w.writerow([e.vtd_a, e.vtd_b, fmt_number(e.shared_perimeter)])
