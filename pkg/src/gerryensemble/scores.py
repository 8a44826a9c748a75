"""Plan scores: population balance, compactness, county splits and minority targets.

The total is the weighted sum

    J = w_p * J_pop + w_I * J_compact + w_c * J_county + w_m * J_minority

where the compactness energy is either the isoperimetric sum (default) or
the bounding-rectangle dispersion sum. A state with a disconnected or
empty district scores ``math.inf``.

:class:`Scorer` keeps the county-split totals cached so a proposed flip is
priced in O(degree + D) without touching the state.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import NamedTuple, Optional

from .plan import EmptiesDistrictError, PlanError, PlanState

COMPACTNESS_KINDS = ("iso", "dispersion")


@dataclass
class ScoreWeights:
    w_p: float = 3000.0
    w_I: float = 2.5
    w_c: float = 0.4
    w_m: float = 800.0
    M_C: float = 100.0
    minority_target_1: float = 0.4448
    minority_target_2: float = 0.3620
    compactness: str = "iso"

    def __post_init__(self):
        for name in ("w_p", "w_I", "w_c", "w_m"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.M_C < 1:
            raise ValueError("M_C must be >= 1")
        for name in ("minority_target_1", "minority_target_2"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValueError(f"{name} must be a fraction in [0, 1]")
        if self.compactness not in COMPACTNESS_KINDS:
            raise ValueError(f"compactness must be one of {COMPACTNESS_KINDS}")

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class ScoreBreakdown:
    j_pop: float
    j_iso: float
    j_county: float
    j_minority: float
    j_total: float

    def to_json(self):
        return {"jp": self.j_pop, "ji": self.j_iso, "jc": self.j_county, "jm": self.j_minority,
                "jtotal": self.j_total if math.isfinite(self.j_total) else "inf"}


def combine(w: ScoreWeights, jp, ji, jc, jm) -> float:
    return w.w_p * jp + w.w_I * ji + w.w_c * jc + w.w_m * jm


# -- component formulas over per-district lists (index 0 unused) -------------

def _pop_energy(pops, ideal):
    s = 0.0
    for p in pops[1:]:
        r = p / ideal - 1.0
        s += r * r
    return math.sqrt(s)


def _iso_energy(boundaries, areas):
    s = 0.0
    for b, a in zip(boundaries[1:], areas[1:]):
        if not a > 0:
            raise ValueError("district with non-positive area")
        s += b * b / a
    return s


def _minority_fraction(m, p):
    return m / p if p > 0 else 0.0


def top_two(values):
    m1 = m2 = -math.inf
    for x in values:
        if x > m1:
            m1, m2 = x, m1
        elif x > m2:
            m2 = x
    return m1, m2


def _minority_energy(minorities, pops, t1, t2):
    if len(pops) - 1 < 2:
        raise ValueError("minority score needs at least 2 districts")
    m1, m2 = top_two(_minority_fraction(m, p) for m, p in zip(minorities[1:], pops[1:]))
    return math.sqrt(max(t1 - m1, 0.0)) + math.sqrt(max(t2 - m2, 0.0))


def minority_energy_from_fractions(m1, m2, t1=0.4448, t2=0.3620):
    return math.sqrt(max(t1 - m1, 0.0)) + math.sqrt(max(t2 - m2, 0.0))


def county_class(counts: dict, total: int):
    """(split class, square-rooted fraction) for one county's per-district unit counts.

    Class 0 is unsplit, 2 is split between two districts, 3 is split
    among three or more.
    """
    k = len(counts)
    if k <= 1:
        return 0, 0.0
    vals = sorted(counts.values(), reverse=True)
    if k == 2:
        return 2, math.sqrt(vals[1] / total)
    return 3, math.sqrt(sum(vals[2:]) / total)


def county_totals(state: PlanState):
    """(count2, W2, count3, W3) summed over every county."""
    n2 = n3 = 0
    w2 = w3 = 0.0
    sizes = _county_sizes(state.g)
    for c, counts in enumerate(state.county_counts):
        cls, term = county_class(counts, sizes[c])
        if cls == 2:
            n2 += 1
            w2 += term
        elif cls == 3:
            n3 += 1
            w3 += term
    return n2, w2, n3, w3


def _county_sizes(g):
    sizes = getattr(g, "_county_sizes", None)
    if sizes is None:
        sizes = [0] * g.num_counties
        for c in g.county_l:
            sizes[c] += 1
        g._county_sizes = sizes
    return sizes


def _county_energy(n2, w2, n3, w3, M_C):
    return n2 * w2 + M_C * n3 * w3


def _bbox_of(g, members):
    bb = g.bbox
    xs0 = min(bb[v, 0] for v in members)
    ys0 = min(bb[v, 1] for v in members)
    xs1 = max(bb[v, 2] for v in members)
    ys1 = max(bb[v, 3] for v in members)
    return (float(xs0), float(ys0), float(xs1), float(ys1))


def _rect_area(r):
    return (r[2] - r[0]) * (r[3] - r[1])


def _require_bbox(g):
    if not g.has_bbox:
        raise ValueError("dispersion energy needs a bounding box on every vtd")


# -- public component scores ---------------------------------------------------

def population_score(state: PlanState) -> float:
    return _pop_energy(state.pop, state.g.total_population / state.num_districts)


def isoperimetric_score(state: PlanState) -> float:
    return _iso_energy(state.boundary, state.area)


def district_isoperimetric_ratios(state: PlanState):
    return [b * b / a for b, a in zip(state.boundary[1:], state.area[1:])]


def county_score(state: PlanState, weights: Optional[ScoreWeights] = None) -> float:
    M_C = (weights or ScoreWeights()).M_C
    return _county_energy(*county_totals(state), M_C)


def minority_score(state: PlanState, weights: Optional[ScoreWeights] = None) -> float:
    w = weights or ScoreWeights()
    return _minority_energy(state.minority, state.pop, w.minority_target_1, w.minority_target_2)


def minority_fractions(state: PlanState):
    return [_minority_fraction(m, p) for m, p in zip(state.minority[1:], state.pop[1:])]


def dispersion_score(state: PlanState) -> float:
    g = state.g
    _require_bbox(g)
    return sum(_rect_area(_bbox_of(g, state.members[k])) / state.area[k]
               for k in range(1, state.num_districts + 1))


def compactness_score(state: PlanState, w: ScoreWeights) -> float:
    return dispersion_score(state) if w.compactness == "dispersion" else isoperimetric_score(state)


def all_contiguous(state: PlanState) -> bool:
    return all(state.count[k] > 0 and state.is_contiguous(k) for k in range(1, state.num_districts + 1))


def total_score(state: PlanState, w: Optional[ScoreWeights] = None, check_contiguity: bool = True) -> ScoreBreakdown:
    """All four components and their weighted total, computed from the state's aggregates."""
    w = w or ScoreWeights()
    jp = population_score(state)
    ji = compactness_score(state, w)
    jc = county_score(state, w)
    jm = minority_score(state, w) if state.num_districts >= 2 else 0.0
    total = combine(w, jp, ji, jc, jm)
    if check_contiguity and not all_contiguous(state):
        total = math.inf
    return ScoreBreakdown(jp, ji, jc, jm, total)


# -- incremental scoring ---------------------------------------------------------

class Move(NamedTuple):
    vtd: int
    new: int
    old: int
    old_agg: tuple
    new_agg: tuple
    dconf: int
    breakdown: ScoreBreakdown
    delta: float
    county_update: tuple
    bbox_update: Optional[tuple]


class Scorer:
    """Prices single-unit flips on a :class:`PlanState` and applies accepted ones.

    The state must only be mutated through :meth:`commit` while a scorer is
    attached, otherwise the cached county totals go stale.
    """

    def __init__(self, state: PlanState, weights: Optional[ScoreWeights] = None):
        self.state = state
        self.w = weights or ScoreWeights()
        g = state.g
        self.ideal = g.total_population / state.num_districts
        self.sizes = _county_sizes(g)
        self.county = county_totals(state)
        self.dispersion = self.w.compactness == "dispersion"
        if self.dispersion:
            _require_bbox(g)
            self.bboxes = [None] + [_bbox_of(g, state.members[k]) for k in range(1, state.num_districts + 1)]
        self.breakdown = self._evaluate(state.pop, state.area, state.minority, state.boundary, self.county,
                                        self.bboxes if self.dispersion else None)

    def _evaluate(self, pops, areas, minorities, boundaries, county, bboxes):
        w = self.w
        jp = _pop_energy(pops, self.ideal)
        if bboxes is not None:
            ji = sum(_rect_area(r) / a for r, a in zip(bboxes[1:], areas[1:]))
        else:
            ji = _iso_energy(boundaries, areas)
        jc = _county_energy(*county, w.M_C)
        jm = _minority_energy(minorities, pops, w.minority_target_1, w.minority_target_2) if len(pops) > 2 else 0.0
        return ScoreBreakdown(jp, ji, jc, jm, combine(w, jp, ji, jc, jm))

    @property
    def total(self) -> float:
        return self.breakdown.j_total

    def propose(self, v: int, new: int) -> Move:
        """Price relabeling ``v`` to ``new`` without mutating the state."""
        st = self.state
        old = st.labels[v]
        if new == old:
            raise PlanError("flip to current label")
        if st.count[old] == 1:
            raise EmptiesDistrictError(f"EmptiesDistrict: moving {st.g.ids[v]!r} empties district {old}")
        old_agg, new_agg, dconf = st.flip_effect(v, new)

        pops, areas, mins, bnds = list(st.pop), list(st.area), list(st.minority), list(st.boundary)
        pops[old], areas[old], mins[old], bnds[old] = old_agg
        pops[new], areas[new], mins[new], bnds[new] = new_agg

        c = st.g.county_l[v]
        counts = st.county_counts[c]
        before = county_class(counts, self.sizes[c])
        after_counts = dict(counts)
        left = after_counts[old] - 1
        if left:
            after_counts[old] = left
        else:
            del after_counts[old]
        after_counts[new] = after_counts.get(new, 0) + 1
        after = county_class(after_counts, self.sizes[c])
        county = self._shift_county(self.county, before, after)

        bbox_update = None
        bboxes = None
        if self.dispersion:
            bboxes = list(self.bboxes)
            vb = tuple(float(x) for x in st.g.bbox[v])
            nb = bboxes[new]
            bboxes[new] = (min(nb[0], vb[0]), min(nb[1], vb[1]), max(nb[2], vb[2]), max(nb[3], vb[3]))
            ob = bboxes[old]
            if vb[0] <= ob[0] or vb[1] <= ob[1] or vb[2] >= ob[2] or vb[3] >= ob[3]:
                bboxes[old] = _bbox_of(st.g, [u for u in st.members[old] if u != v])
            bbox_update = (bboxes[old], bboxes[new])

        bd = self._evaluate(pops, areas, mins, bnds, county, bboxes)
        return Move(v, new, old, old_agg, new_agg, dconf, bd, bd.j_total - self.breakdown.j_total,
                    county, bbox_update)

    @staticmethod
    def _shift_county(totals, before, after):
        n2, w2, n3, w3 = totals
        if before == after:
            return totals
        cls, term = before
        if cls == 2:
            n2 -= 1
            w2 -= term
        elif cls == 3:
            n3 -= 1
            w3 -= term
        cls, term = after
        if cls == 2:
            n2 += 1
            w2 += term
        elif cls == 3:
            n3 += 1
            w3 += term
        if n2 == 0:
            w2 = 0.0
        if n3 == 0:
            w3 = 0.0
        return n2, w2, n3, w3

    def commit(self, move: Move) -> None:
        self.state.apply_flip(move.vtd, move.new)
        self.county = move.county_update
        if move.bbox_update is not None:
            self.bboxes[move.old], self.bboxes[move.new] = move.bbox_update
        self.breakdown = move.breakdown

    def resync(self) -> None:
        """Recompute cached totals from the state (discards rounding drift)."""
        self.county = county_totals(self.state)
        if self.dispersion:
            g, st = self.state.g, self.state
            self.bboxes = [None] + [_bbox_of(g, st.members[k]) for k in range(1, st.num_districts + 1)]
        st = self.state
        self.breakdown = self._evaluate(st.pop, st.area, st.minority, st.boundary, self.county,
                                        self.bboxes if self.dispersion else None)


def score_delta(state: PlanState, flip, w: Optional[ScoreWeights] = None) -> float:
    """J after relabeling ``flip = (vtd, new_label)`` minus J now; the state is left untouched."""
    v, new = flip
    if isinstance(v, str):
        v = state.g.index[v]
    return Scorer(state, w).propose(v, new).delta
