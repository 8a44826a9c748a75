"""Synthetic grid states and brute-force oracles for small instances.

Grid cells are unit squares: area 1, every shared side has length 1 and
border cells carry their exposed sides as outer boundary. Populations,
minority counts and votes come from radial profiles around an "urban"
center so that packing and cracking have something to act on.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass
from typing import List, Optional

import numpy as np

from .graph import Adjacency, DistrictGraph, Vtd
from .plan import Plan, PlanState
from .scores import ScoreWeights, total_score
from .tally import VoteTable

MAX_ENUMERATION_VERTICES = 20


class EnumerationTooLarge(ValueError):
    pass


class InfeasiblePlanError(ValueError):
    pass


@dataclass
class SynthSpec:
    rows: int
    cols: int
    num_districts: int = 2
    population_model: str = "uniform"  # uniform | urban
    base_population: float = 1.0
    urban_peak: float = 1.0  # population multiplier at the urban center
    urban_center: Optional[tuple] = None  # (row, col); grid middle when None
    urban_radius: Optional[float] = None  # gaussian width in cells
    statewide_dem: float = 0.5
    urban_dem_boost: float = 0.0
    turnout: float = 1.0
    county_block: int = 0  # side of square county tiles; 0 puts every cell in one county
    minority_base: float = 0.0
    minority_peak: float = 0.0
    population_jitter: float = 0.0
    vote_noise: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("grid needs at least one row and column")
        if self.rows * self.cols < self.num_districts:
            raise ValueError("fewer cells than districts")
        for name in ("statewide_dem", "minority_base", "minority_peak"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.population_model not in ("uniform", "urban"):
            raise ValueError("population_model must be 'uniform' or 'urban'")

    def to_dict(self):
        return asdict(self)


def urban_cluster_spec(seed: int = 1) -> SynthSpec:
    """10x10 grid, four districts, a dense Democratic city in the middle of an even state.

    Compact plans give the city's surroundings a fair chance at a second
    Democratic seat, which makes packing the city easy to spot.
    """
    return SynthSpec(rows=10, cols=10, num_districts=4, population_model="urban", base_population=100,
                     urban_peak=3.0, urban_radius=3.0, statewide_dem=0.5, urban_dem_boost=0.3,
                     county_block=5, seed=seed)


def cell_id(spec: SynthSpec, r: int, c: int) -> str:
    width = len(str(max(spec.rows, spec.cols) - 1))
    return f"r{r:0{width}d}c{c:0{width}d}"


def _urban_profile(spec: SynthSpec):
    r0, c0 = spec.urban_center if spec.urban_center is not None else ((spec.rows - 1) / 2, (spec.cols - 1) / 2)
    sigma = spec.urban_radius if spec.urban_radius is not None else max(min(spec.rows, spec.cols) / 4, 0.5)
    rr, cc = np.meshgrid(np.arange(spec.rows), np.arange(spec.cols), indexing="ij")
    d2 = (rr - r0) ** 2 + (cc - c0) ** 2
    return np.exp(-d2 / (2 * sigma * sigma))


def _calibrated_shares(base, boost, weights, target):
    """Shares ``clip(a + boost*base)`` whose weighted mean is ``target`` (bisection on ``a``)."""
    lo_clip, hi_clip = 0.02, 0.98
    if boost == 0:
        return np.full_like(base, target)

    def mean(a):
        return float(np.sum(weights * np.clip(a + boost * base, lo_clip, hi_clip)) / np.sum(weights))

    lo, hi = -1.0 - abs(boost), 1.0 + abs(boost)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mean(mid) < target:
            lo = mid
        else:
            hi = mid
    return np.clip(0.5 * (lo + hi) + boost * base, lo_clip, hi_clip)


def make_grid_state(spec: SynthSpec):
    """Build a (DistrictGraph, VoteTable) pair for ``spec``; pure in the spec."""
    rng = np.random.Generator(np.random.Philox(spec.seed))
    rows, cols = spec.rows, spec.cols
    profile = _urban_profile(spec)
    if spec.population_model == "urban":
        pop = spec.base_population * (1.0 + (spec.urban_peak - 1.0) * profile)
    else:
        pop = np.full((rows, cols), float(spec.base_population))
    if spec.population_jitter > 0:
        pop = pop * (1.0 + spec.population_jitter * rng.uniform(-1, 1, size=pop.shape))
    if spec.base_population >= 10:
        pop = np.round(pop)

    minority = pop * np.clip(spec.minority_base + spec.minority_peak * profile, 0.0, 1.0)
    if spec.base_population >= 10:
        minority = np.minimum(np.round(minority), pop)

    shares = _calibrated_shares(profile, spec.urban_dem_boost, pop, spec.statewide_dem)
    if spec.vote_noise > 0:
        shares = np.clip(shares + spec.vote_noise * rng.standard_normal(shares.shape), 0.01, 0.99)
    votes_cast = pop * spec.turnout
    dem = votes_cast * shares
    rep = votes_cast - dem

    vtds, edges = [], []
    dem_map, rep_map = {}, {}
    for r in range(rows):
        for c in range(cols):
            exposed = (r == 0) + (r == rows - 1) + (c == 0) + (c == cols - 1)
            county = f"k{r // spec.county_block}_{c // spec.county_block}" if spec.county_block else "k0"
            vid = cell_id(spec, r, c)
            vtds.append(Vtd(vid, float(pop[r, c]), 1.0, float(minority[r, c]), county, float(exposed),
                            (float(c), float(r), float(c + 1), float(r + 1))))
            dem_map[vid] = float(dem[r, c])
            rep_map[vid] = float(rep[r, c])
            if c + 1 < cols:
                edges.append(Adjacency(vid, cell_id(spec, r, c + 1), 1.0))
            if r + 1 < rows:
                edges.append(Adjacency(vid, cell_id(spec, r + 1, c), 1.0))
    return DistrictGraph(vtds, edges), VoteTable("synthetic", dem_map, rep_map)


def stripe_plan(g: DistrictGraph, spec: SynthSpec, num_districts: Optional[int] = None) -> Plan:
    """Cut the boustrophedon ordering of the grid into population-balanced runs.

    Consecutive cells of a snake ordering are adjacent, so every run is
    connected.
    """
    d = num_districts or spec.num_districts
    order = []
    for r in range(spec.rows):
        cs = range(spec.cols) if r % 2 == 0 else range(spec.cols - 1, -1, -1)
        order.extend(cell_id(spec, r, c) for c in cs)
    total = g.total_population
    assignment = {}
    acc = 0.0
    for vid in order:
        p = g.vtds[g.index[vid]].population
        assignment[vid] = min(d, int((acc + p / 2) * d / total) + 1)
        acc += p
    plan = Plan({i: assignment[i] for i in g.ids}, d)
    PlanState(g, plan)
    return plan


# -- enumeration oracle ----------------------------------------------------------

def _connected_supersets(seed, allowed, nbrs, pop, hi):
    """Every connected subset of ``allowed`` containing ``seed`` with population <= ``hi``, once each."""
    out = []

    def grow(current, cur_pop, ext, banned):
        out.append(current)
        ext = sorted(ext, reverse=True)
        banned = set(banned)
        while ext:
            u = ext.pop()
            banned.add(u)
            p = cur_pop + pop[u]
            if p > hi:
                continue
            nxt = set(ext)
            for w in nbrs[u]:
                if w in allowed and w not in current and w not in banned:
                    nxt.add(w)
            grow(current | {u}, p, nxt, banned)

    start_ext = {w for w in nbrs[seed] if w in allowed}
    if pop[seed] <= hi:
        grow(frozenset([seed]), pop[seed], start_ext, {seed})
    return out


def _is_connected(vertices, nbrs):
    if not vertices:
        return False
    start = min(vertices)
    seen = {start}
    stack = [start]
    while stack:
        u = stack.pop()
        for w in nbrs[u]:
            if w in vertices and w not in seen:
                seen.add(w)
                stack.append(w)
    return len(seen) == len(vertices)


def _num_components(vertices, nbrs):
    left = set(vertices)
    k = 0
    while left:
        k += 1
        start = left.pop()
        stack = [start]
        while stack:
            u = stack.pop()
            for w in nbrs[u]:
                if w in left:
                    left.remove(w)
                    stack.append(w)
    return k


def enumerate_connected_plans(g: DistrictGraph, num_districts: int, balance: Optional[float] = None) -> List[Plan]:
    """All partitions of the vertices into connected, nonempty districts.

    Labels are canonical: the part holding the lowest-index vertex is 1,
    the part holding the lowest remaining vertex is 2, and so on. With
    ``balance`` set, every district's population must lie within that
    fraction of the ideal. Output is sorted by label vector.
    """
    n = g.num_vtds
    if n > MAX_ENUMERATION_VERTICES:
        raise EnumerationTooLarge(f"{n} vertices exceeds the enumeration guard of {MAX_ENUMERATION_VERTICES}")
    if num_districts < 1 or num_districts > n:
        return []
    nbrs = [[w for w, _, _ in g.neighbors[v]] for v in range(n)]
    pop = g.pop_l
    ideal = g.total_population / num_districts
    slack = 1e-12 * max(1.0, ideal)
    if balance is None:
        lo, hi = -math.inf, math.inf
    else:
        lo, hi = ideal * (1 - balance) - slack, ideal * (1 + balance) + slack

    results = []

    def split(remaining, k, prefix):
        if k == 1:
            rest_pop = sum(pop[v] for v in remaining)
            if lo <= rest_pop <= hi and _is_connected(remaining, nbrs):
                results.append(prefix + [remaining])
            return
        seed = min(remaining)
        for part in _connected_supersets(seed, remaining, nbrs, pop, hi):
            if len(part) > len(remaining) - (k - 1):
                continue
            if sum(pop[v] for v in part) < lo:
                continue
            rest = remaining - part
            if _num_components(rest, nbrs) > k - 1:
                continue
            split(rest, k - 1, prefix + [part])

    split(frozenset(range(n)), num_districts, [])
    plans = []
    for parts in results:
        labels = [0] * n
        for lab, part in enumerate(parts, start=1):
            for v in part:
                labels[v] = lab
        plans.append(labels)
    plans.sort()
    return [Plan.from_labels(g, labels, num_districts) for labels in plans]


def canonical_labels(labels) -> tuple:
    """Relabel so parts are numbered by first appearance in vertex order."""
    mapping = {}
    out = []
    for lab in labels:
        if lab not in mapping:
            mapping[lab] = len(mapping) + 1
        out.append(mapping[lab])
    return tuple(out)


@dataclass
class ExactDistribution:
    plans: list
    scores: list
    probabilities: list
    z: float
    log_z: float
    beta: float

    def as_dict(self, g: DistrictGraph) -> dict:
        """Map canonical label tuple -> probability."""
        return {tuple(p.labels_for(g)): q for p, q in zip(self.plans, self.probabilities)}

    def to_json(self, g: DistrictGraph) -> dict:
        return {
            "beta": self.beta,
            "z": self.z,
            "log_z": self.log_z,
            "states": [{"labels": p.labels_for(g), "j": j, "probability": q}
                       for p, j, q in zip(self.plans, self.scores, self.probabilities)],
        }


def exact_distribution(g: DistrictGraph, num_districts: int, w: Optional[ScoreWeights] = None, beta: float = 1.0,
                       balance: Optional[float] = None, plans: Optional[list] = None) -> ExactDistribution:
    """Gibbs probabilities exp(-beta J)/Z over every enumerated plan."""
    w = w or ScoreWeights()
    if plans is None:
        plans = enumerate_connected_plans(g, num_districts, balance)
    if not plans:
        raise ValueError("no plans to weigh")
    scores = [total_score(PlanState(g, p), w, check_contiguity=False).j_total for p in plans]
    logs = [-beta * j for j in scores]
    top = max(logs)
    log_z = top + math.log(math.fsum(math.exp(x - top) for x in logs))
    probs = [math.exp(x - log_z) for x in logs]
    return ExactDistribution(plans, scores, probs, math.exp(log_z), log_z, beta)


def chain_occupancy(chain, n: int, beta: float) -> dict:
    """Steps spent in each partition (canonical labels) over ``n`` fixed-``beta`` steps of ``chain``.

    The state after every step is counted once, so the values sum to ``n``.
    """
    labels = list(chain.state.labels)
    trace: list = []
    chain.run(n, beta, trace=trace)
    counts: dict = {}
    last = 0
    for t, v, new in trace:
        if t > last:
            key = canonical_labels(labels)
            counts[key] = counts.get(key, 0) + (t - last)
        labels[v] = new
        last = t
    key = canonical_labels(labels)
    counts[key] = counts.get(key, 0) + (n - last)
    return counts


def total_variation(p: dict, q: dict) -> float:
    """Half the L1 distance between two distributions given as key -> mass (missing keys are 0)."""
    keys = set(p) | set(q)
    return 0.5 * math.fsum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


def exact_by_partition(exact: "ExactDistribution", g: DistrictGraph) -> dict:
    return {canonical_labels(p.labels_for(g)): q for p, q in zip(exact.plans, exact.probabilities)}


def transition_matrix(g: DistrictGraph, num_districts: int, w: Optional[ScoreWeights] = None, beta: float = 1.0,
                      multiplicity_correction: bool = False):
    """Exact one-step transition matrix of the flip chain over every labeled connected plan.

    Returns ``(states, P, J)`` where ``states`` are label tuples (each
    partition under all D! labelings), ``P`` is row-stochastic and ``J`` holds
    the scores.
    """
    from .sampler import acceptance_probability, proposal_candidates

    states = []
    for p in enumerate_connected_plans(g, num_districts):
        base = p.labels_for(g)
        for perm in itertools.permutations(range(1, num_districts + 1)):
            states.append(tuple(perm[x - 1] for x in base))
    index = {s: i for i, s in enumerate(states)}
    n = len(states)
    P = np.zeros((n, n))
    J = np.empty(n)
    for i, s in enumerate(states):
        state = PlanState(g, Plan.from_labels(g, s, num_districts))
        J[i] = total_score(state, w).j_total
        cands = proposal_candidates(state)
        for v, new in cands:
            a = acceptance_probability(state, (v, new), beta, w, multiplicity_correction=multiplicity_correction)
            if a:
                t = list(s)
                t[v] = new
                P[i, index[tuple(t)]] += a / len(cands)
        P[i, i] = 1.0 - P[i].sum()
    return states, P, J


def stationary_distribution(P) -> np.ndarray:
    vals, vecs = np.linalg.eig(P.T)
    x = np.real(vecs[:, np.argmin(abs(vals - 1))])
    return x / x.sum()


# -- planted gerrymander ---------------------------------------------------------

def _remainder_ok(remaining, candidate, nbrs):
    rest = remaining - {candidate}
    return not rest or _is_connected(rest, nbrs)


def _pick_seed(remaining, nbrs, key):
    """Best unit by ``key`` whose removal leaves the rest connected."""
    for v in sorted(remaining, key=key, reverse=True):
        if _remainder_ok(remaining, v, nbrs):
            return v
    raise InfeasiblePlanError("every candidate seed disconnects the remaining units")


def _grow_district(seed, remaining, target, nbrs, pop, priority):
    """Greedy region growth from ``seed`` by ``priority`` keeping ``remaining`` connected."""
    district = {seed}
    remaining = remaining - {seed}
    total = pop[seed]
    while total < target:
        frontier = {w for u in district for w in nbrs[u] if w in remaining}
        choices = sorted(frontier, key=priority)
        picked = None
        for w in choices:
            if abs(total + pop[w] - target) > abs(total - target) and total > 0:
                break
            if _remainder_ok(remaining, w, nbrs):
                picked = w
                break
        if picked is None:
            break
        district.add(picked)
        remaining = remaining - {picked}
        total += pop[picked]
    return district, remaining


def _bfs_dist(sources, allowed, nbrs):
    dist = {s: 0 for s in sources}
    frontier = list(sources)
    while frontier:
        nxt = []
        for u in frontier:
            for w in nbrs[u]:
                if w in allowed and w not in dist:
                    dist[w] = dist[u] + 1
                    nxt.append(w)
        frontier = nxt
    return dist


def plant_packed_plan(g: DistrictGraph, votes: VoteTable, num_districts: int) -> Plan:
    """Greedy partisan plan: pack the most Democratic units into ceil(D/4) districts.

    Pack districts grow from the highest-share unit toward the highest-share
    neighbors; the rest of the map is then cut into compact districts grown
    from the unit farthest from what is already assigned.
    """
    dem, rep = votes.arrays_for(g)
    tot = dem + rep
    share = np.divide(dem, tot, out=np.full_like(dem, 0.5), where=tot > 0).tolist()
    n = g.num_vtds
    nbrs = [[w for w, _, _ in g.neighbors[v]] for v in range(n)]
    pop = g.pop_l
    target = g.total_population / num_districts
    n_pack = math.ceil(num_districts / 4)

    remaining = set(range(n))
    parts = []
    for _ in range(n_pack):
        seed = _pick_seed(remaining, nbrs, lambda v: (share[v], -v))
        part, remaining = _grow_district(seed, remaining, target, nbrs, pop, lambda v: (-share[v], v))
        parts.append(part)

    assigned = set().union(*parts)
    for _ in range(num_districts - n_pack - 1):
        if not remaining:
            break
        dist = _bfs_dist([v for v in assigned], remaining | assigned, nbrs)
        seed = _pick_seed(remaining, nbrs, lambda v: (dist.get(v, 0), -v))
        from_seed = _bfs_dist([seed], remaining, nbrs)
        part, remaining = _grow_district(seed, remaining, target, nbrs, pop,
                                         lambda v, fs=from_seed: (fs.get(v, n), v))
        parts.append(part)
        assigned |= part
    if remaining:
        parts.append(remaining)
    if len(parts) != num_districts or any(not p for p in parts):
        raise InfeasiblePlanError("could not build a contiguous packed plan")
    labels = [0] * n
    for lab, part in enumerate(parts, start=1):
        for v in part:
            labels[v] = lab
    plan = Plan.from_labels(g, labels, num_districts)
    state = PlanState(g, plan)
    if not all(state.is_contiguous(k) for k in range(1, num_districts + 1)):
        raise InfeasiblePlanError("packed plan is not contiguous")
    return plan
