"""Metropolis-Hastings sampling of district plans with an annealed inverse temperature.

The proposal picks a conflicted edge uniformly and, with probability 1/2
each, moves one endpoint into the other's district. With ``k`` conflicted
edges before and ``k'`` after, a move is accepted with probability

    min(1, k / k' * exp(-beta * (J' - J)))

and refused outright when it would empty or disconnect the donor district
or push a district past the neighborhood limit.

That ratio treats every (edge, endpoint) draw as a distinct proposal. When
a unit touches the receiving district along ``m`` conflicted edges and,
after the move, touches its old district along ``m'`` edges, the true
proposal ratio also carries ``m' / m``. The chain's stationary law is
exactly ``exp(-beta J) / Z`` only with that factor, which
``multiplicity_correction`` switches on. It is off by default.
"""
from __future__ import annotations

import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterator, List, Optional

import numpy as np

from .graph import DistrictGraph
from .plan import Plan, PlanError, PlanState
from .scores import ScoreBreakdown, ScoreWeights, Scorer, county_totals, top_two


class NoConflictedEdges(RuntimeError):
    pass


# -- configuration -----------------------------------------------------------------

@dataclass
class AnnealingSchedule:
    hot_steps: int = 40000
    ramp_steps: int = 60000
    cold_steps: int = 20000
    beta_hot: float = 0.0
    beta_cold: float = 1.0

    def __post_init__(self):
        if min(self.hot_steps, self.ramp_steps, self.cold_steps) < 0:
            raise ValueError("step counts must be non-negative")
        if not self.beta_cold >= self.beta_hot >= 0:
            raise ValueError("need beta_cold >= beta_hot >= 0")

    @property
    def total_steps(self) -> int:
        return self.hot_steps + self.ramp_steps + self.cold_steps

    def beta_at(self, t: int) -> float:
        if t < self.hot_steps:
            return self.beta_hot
        t -= self.hot_steps
        if t < self.ramp_steps:
            return self.beta_hot + (self.beta_cold - self.beta_hot) * (t + 1) / self.ramp_steps
        return self.beta_cold

    def scaled(self, factor: float) -> "AnnealingSchedule":
        """Same temperatures with every phase length multiplied by ``factor``."""
        return AnnealingSchedule(int(self.hot_steps * factor), int(self.ramp_steps * factor),
                                 int(self.cold_steps * factor), self.beta_hot, self.beta_cold)


@dataclass
class ThresholdConfig:
    max_pop_deviation: float = 0.01
    max_district_iso: Optional[float] = 60.0
    forbid_3way_county_splits: bool = True
    minority_floor_1: Optional[float] = 0.40
    minority_floor_2: Optional[float] = 0.335

    def __post_init__(self):
        for name in ("max_pop_deviation", "minority_floor_1", "minority_floor_2"):
            x = getattr(self, name)
            if x is not None and not 0 <= x <= 1:
                raise ValueError(f"{name} must lie in [0, 1]")


@dataclass
class Neighborhood:
    reference: Plan
    max_deviation: int = 40


@dataclass
class SamplerConfig:
    initial_plan: Plan
    weights: ScoreWeights = field(default_factory=ScoreWeights)
    schedule: AnnealingSchedule = field(default_factory=AnnealingSchedule)
    thresholds: ThresholdConfig = field(default_factory=ThresholdConfig)
    num_districts: int = 13
    target_samples: int = 1
    rng_seed: int = 0
    chains: int = 1
    neighborhood: Optional[Neighborhood] = None
    restart: bool = False  # start every cycle from the initial plan instead of the last sample
    multiplicity_correction: bool = False

    def __post_init__(self):
        if self.target_samples < 1:
            raise ValueError("target_samples must be >= 1")
        if self.chains < 1:
            raise ValueError("chains must be >= 1")
        if self.initial_plan.num_districts != self.num_districts:
            raise ValueError("initial plan has a different number of districts")

    def samples_for_chain(self, chain: int) -> int:
        base, extra = divmod(self.target_samples, self.chains)
        return base + (1 if chain < extra else 0)

    def to_dict(self) -> dict:
        out = {
            "weights": self.weights.to_dict(),
            "schedule": asdict(self.schedule),
            "thresholds": asdict(self.thresholds),
            "num_districts": self.num_districts,
            "target_samples": self.target_samples,
            "rng_seed": self.rng_seed,
            "chains": self.chains,
            "restart": self.restart,
            "multiplicity_correction": self.multiplicity_correction,
        }
        if self.neighborhood is not None:
            out["neighborhood"] = {"max_deviation": self.neighborhood.max_deviation}
        return out


# -- random numbers ------------------------------------------------------------------

class UniformStream:
    """Buffered uniform [0, 1) draws from a Philox counter-based generator."""

    def __init__(self, seed: int, block: int = 1 << 15):
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.Philox(self.seed))
        self._block = block
        self._buf: List[float] = []
        self._i = 0

    def next(self) -> float:
        if self._i >= len(self._buf):
            self._buf = self._gen.random(self._block).tolist()
            self._i = 0
        u = self._buf[self._i]
        self._i += 1
        return u

    __call__ = next


def chain_seed(seed: int, chain: int) -> int:
    return int(seed) + int(chain)


# -- proposal and acceptance ------------------------------------------------------------

def _candidate(state: PlanState, u: float):
    k = state.conflicted_count
    if k == 0:
        raise NoConflictedEdges("no conflicted edges; nothing to propose")
    idx = int(u * 2 * k)
    if idx >= 2 * k:
        idx = 2 * k - 1
    e = state.conflicted_edge(idx >> 1)
    a, b = state.g.edge_u[e], state.g.edge_v[e]
    if idx & 1:
        return int(b), state.labels[a]
    return int(a), state.labels[b]


def propose(state: PlanState, rng) -> tuple:
    """Draw (vtd index, new label): a uniform conflicted edge, then one endpoint uniformly."""
    return _candidate(state, rng())


def proposal_candidates(state: PlanState) -> list:
    """Every (vtd, new label) the proposal can emit, with multiplicity, each of probability 1/(2k)."""
    out = []
    for i in range(state.conflicted_count):
        e = state.conflicted_edge(i)
        a, b = int(state.g.edge_u[e]), int(state.g.edge_v[e])
        out.append((a, state.labels[b]))
        out.append((b, state.labels[a]))
    return out


class DeviationTracker:
    """Per-district symmetric-difference sizes against a reference plan, updated per flip."""

    def __init__(self, state: PlanState, neighborhood: Neighborhood):
        g = state.g
        self.ref = neighborhood.reference.labels_for(g)
        self.limit = neighborhood.max_deviation
        self.sd = [0] * (state.num_districts + 1)
        for lab, r in zip(state.labels, self.ref):
            if lab != r:
                self.sd[lab] += 1
                self.sd[r] += 1

    def after(self, v: int, old: int, new: int):
        r = self.ref[v]
        return (self.sd[old] + (1 if r == old else -1), self.sd[new] + (-1 if r == new else 1))

    def allows(self, v: int, old: int, new: int) -> bool:
        a, b = self.after(v, old, new)
        return a <= self.limit and b <= self.limit

    def commit(self, v: int, old: int, new: int):
        self.sd[old], self.sd[new] = self.after(v, old, new)

    @property
    def max_deviation(self) -> int:
        return max(self.sd[1:])


def _log_ratio(k: int, k_new: int, beta: float, delta: float) -> float:
    if not math.isfinite(delta):
        return -math.inf if delta > 0 else math.inf
    return math.log(k / k_new) - beta * delta


def multiplicity_log_ratio(state: PlanState, v: int, old: int, new: int) -> float:
    """log(m'/m): edges from ``v`` into its old district over edges into the receiving one."""
    labels = state.labels
    m = m_back = 0
    for u, _, _ in state.g.neighbors[v]:
        lab = labels[u]
        if lab == new:
            m += 1
        elif lab == old:
            m_back += 1
    if m == 0 or m_back == 0:
        return -math.inf
    return math.log(m_back / m)


def acceptance_probability(state: PlanState, candidate, beta: float, w: Optional[ScoreWeights] = None,
                           neighborhood: Optional[Neighborhood] = None, scorer: Optional[Scorer] = None,
                           multiplicity_correction: bool = False) -> float:
    """Metropolis-Hastings acceptance probability of ``candidate`` = (vtd, new label)."""
    v, new = candidate
    if isinstance(v, str):
        v = state.g.index[v]
    old = state.labels[v]
    if state.count[old] == 1 or not state.removal_keeps_connected(v):
        return 0.0
    if neighborhood is not None and not DeviationTracker(state, neighborhood).allows(v, old, new):
        return 0.0
    scorer = scorer or Scorer(state, w)
    move = scorer.propose(v, new)
    lr = _log_ratio(state.conflicted_count, state.conflicted_count + move.dconf, beta, move.delta)
    if multiplicity_correction:
        lr += multiplicity_log_ratio(state, v, old, new)
    return 1.0 if lr >= 0 else math.exp(lr)


# -- the chain --------------------------------------------------------------------------

class Chain:
    """One Metropolis-Hastings chain: a plan state, its scorer, an RNG stream and counters."""

    def __init__(self, state: PlanState, weights: Optional[ScoreWeights] = None, rng=None,
                 neighborhood: Optional[Neighborhood] = None, seed: int = 0, multiplicity_correction: bool = False):
        self.state = state
        self.multiplicity_correction = multiplicity_correction
        self.weights = weights or ScoreWeights()
        self.scorer = Scorer(state, self.weights)
        self.rng = rng if rng is not None else UniformStream(seed)
        self.tracker = DeviationTracker(state, neighborhood) if neighborhood is not None else None
        if self.tracker is not None and self.tracker.max_deviation > self.tracker.limit:
            raise PlanError("initial plan already violates the neighborhood limit")
        self.steps = 0
        self.accepted = 0

    def step(self, beta: float) -> bool:
        """One proposal plus accept/reject; returns whether the state moved."""
        return self.run(1, beta, beta) == 1

    def run(self, n: int, beta_start: float, beta_end: Optional[float] = None, ramp: bool = False,
            trace: Optional[list] = None) -> int:
        """``n`` steps at constant ``beta_start``, or a linear ramp ending at ``beta_end`` when ``ramp``.

        When ``trace`` is a list, each accepted move is appended to it as
        ``(step, vtd, new label)``.
        """
        state, scorer, rng, tracker = self.state, self.scorer, self.rng, self.tracker
        labels, count = state.labels, state.count
        edge_u, edge_v = state.g.edge_u.tolist(), state.g.edge_v.tolist()
        cedges = state._cedges
        log, exp = math.log, math.exp
        correct = self.multiplicity_correction
        accepted = 0
        for t in range(n):
            if ramp:
                beta = beta_start + (beta_end - beta_start) * (t + 1) / n
            else:
                beta = beta_start
            k = len(cedges)
            if k == 0:
                raise NoConflictedEdges("no conflicted edges; nothing to propose")
            idx = int(rng() * 2 * k)
            if idx == 2 * k:
                idx -= 1
            e = cedges[idx >> 1]
            if idx & 1:
                v, new = edge_v[e], labels[edge_u[e]]
            else:
                v, new = edge_u[e], labels[edge_v[e]]
            u = rng()
            old = labels[v]
            if count[old] == 1:
                continue
            if tracker is not None and not tracker.allows(v, old, new):
                continue
            move = scorer.propose(v, new)
            d = move.delta
            lr = log(k / (k + move.dconf)) - beta * d
            if correct:
                lr += multiplicity_log_ratio(state, v, old, new)
            if lr < 0 and u >= exp(lr):
                continue
            if not state.removal_keeps_connected(v):
                continue
            scorer.commit(move)
            if tracker is not None:
                tracker.commit(v, old, new)
            if trace is not None:
                trace.append((t, v, new))
            accepted += 1
        self.steps += n
        self.accepted += accepted
        return accepted

    def anneal(self, schedule: AnnealingSchedule) -> int:
        acc = 0
        if schedule.hot_steps:
            acc += self.run(schedule.hot_steps, schedule.beta_hot)
        if schedule.ramp_steps:
            acc += self.run(schedule.ramp_steps, schedule.beta_hot, schedule.beta_cold, ramp=True)
        if schedule.cold_steps:
            acc += self.run(schedule.cold_steps, schedule.beta_cold)
        return acc


def mh_step(chain: Chain, beta: float) -> bool:
    return chain.step(beta)


# -- samples and thresholds -----------------------------------------------------------------

POPULATION_DEVIATION = "PopulationDeviation"
COMPACTNESS = "IsoperimetricRatio"
COUNTY_SPLIT_3WAY = "CountySplit3Way"
MINORITY_FLOOR = "MinorityFloor"


@dataclass
class SampleRecord:
    labels: List[int]
    scores: ScoreBreakdown
    districts: List[dict]
    ideal_population: float
    county_splits: dict
    chain: int = 0
    cycle: int = 0
    seed: int = 0
    steps: int = 0
    accepted_steps: int = 0
    passes: bool = False
    reasons: List[str] = field(default_factory=list)

    def plan(self, g: DistrictGraph) -> Plan:
        return Plan.from_labels(g, self.labels, len(self.districts))

    def to_json(self, g: DistrictGraph, plan_ref: Optional[str] = None) -> dict:
        out = {
            "chain": self.chain,
            "cycle": self.cycle,
            "seed": self.seed,
            "steps": self.steps,
            "accepted_steps": self.accepted_steps,
            "scores": self.scores.to_json(),
            "districts": self.districts,
            "ideal_population": self.ideal_population,
            "county_splits": self.county_splits,
            "passes": self.passes,
            "reasons": self.reasons,
        }
        if plan_ref is None:
            out["plan"] = dict(zip(g.ids, self.labels))
        else:
            out["plan_file"] = plan_ref
        return out

    @classmethod
    def from_json(cls, obj: dict, g: DistrictGraph, plan: Optional[Plan] = None) -> "SampleRecord":
        if plan is None:
            plan = Plan(obj["plan"], len(obj["districts"]))
        s = obj["scores"]
        total = math.inf if s["jtotal"] == "inf" else s["jtotal"]
        return cls(plan.labels_for(g), ScoreBreakdown(s["jp"], s["ji"], s["jc"], s["jm"], total),
                   obj["districts"], obj["ideal_population"], obj["county_splits"], obj["chain"], obj["cycle"],
                   obj["seed"], obj.get("steps", 0), obj.get("accepted_steps", 0), obj["passes"], obj["reasons"])


def snapshot(chain: Chain, cycle: int = 0, chain_id: int = 0, seed: int = 0, steps: int = 0,
             accepted: int = 0) -> SampleRecord:
    state = chain.state
    d = state.num_districts
    districts = []
    for k in range(1, d + 1):
        p, a, m, b = state.pop[k], state.area[k], state.minority[k], state.boundary[k]
        districts.append({
            "district": k,
            "population": p,
            "area": a,
            "minority_population": m,
            "minority_fraction": m / p if p > 0 else 0.0,
            "boundary_length": b,
            "isoperimetric_ratio": b * b / a,
            "vtd_count": state.count[k],
        })
    n2, _, n3, _ = county_totals(state)
    return SampleRecord(list(state.labels), chain.scorer.breakdown, districts,
                        state.g.total_population / d, {"two": n2, "three_plus": n3},
                        chain_id, cycle, seed, steps, accepted)


def passes_thresholds(record: SampleRecord, t: ThresholdConfig):
    """(passes, reasons) for the post-hoc filter; reasons name each failed criterion once."""
    reasons = []
    ideal = record.ideal_population
    if t.max_pop_deviation is not None and any(
            abs(d["population"] / ideal - 1.0) > t.max_pop_deviation for d in record.districts):
        reasons.append(POPULATION_DEVIATION)
    if t.max_district_iso is not None and any(
            d["isoperimetric_ratio"] > t.max_district_iso for d in record.districts):
        reasons.append(COMPACTNESS)
    if t.forbid_3way_county_splits and record.county_splits.get("three_plus", 0) > 0:
        reasons.append(COUNTY_SPLIT_3WAY)
    fracs = [d["minority_fraction"] for d in record.districts]
    m1, m2 = top_two(fracs)
    low1 = t.minority_floor_1 is not None and m1 < t.minority_floor_1
    low2 = t.minority_floor_2 is not None and len(fracs) > 1 and m2 < t.minority_floor_2
    if low1 or low2:
        reasons.append(MINORITY_FLOOR)
    return not reasons, reasons


def run_annealing_cycle(chain: Chain, cfg: SamplerConfig, cycle: int = 0, chain_id: int = 0) -> SampleRecord:
    """Anneal from the chain's current plan and emit it as one thresholded sample."""
    steps0, acc0 = chain.steps, chain.accepted
    chain.anneal(cfg.schedule)
    rec = snapshot(chain, cycle, chain_id, chain_seed(cfg.rng_seed, chain_id),
                   chain.steps - steps0, chain.accepted - acc0)
    rec.passes, rec.reasons = passes_thresholds(rec, cfg.thresholds)
    return rec


def run_chain(g: DistrictGraph, cfg: SamplerConfig, chain_id: int, n_samples: Optional[int] = None) -> List[SampleRecord]:
    seed = chain_seed(cfg.rng_seed, chain_id)
    rng = UniformStream(seed)
    n = cfg.samples_for_chain(chain_id) if n_samples is None else n_samples
    def fresh():
        return Chain(PlanState(g, cfg.initial_plan), cfg.weights, rng, cfg.neighborhood,
                     multiplicity_correction=cfg.multiplicity_correction)

    chain = fresh()
    out = []
    for cycle in range(n):
        if cfg.restart and cycle:
            chain = fresh()
        out.append(run_annealing_cycle(chain, cfg, cycle, chain_id))
    return out


def _chain_job(args):
    g, cfg, chain_id = args
    return run_chain(g, cfg, chain_id)


def generate_ensemble(g: DistrictGraph, cfg: SamplerConfig, workers: int = 1) -> Iterator[SampleRecord]:
    """Run ``cfg.chains`` independent chains (seeds ``rng_seed + chain``) and yield records by (chain, cycle)."""
    jobs = [(g, cfg, c) for c in range(cfg.chains) if cfg.samples_for_chain(c) > 0]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_chain_job, jobs))
    else:
        results = [_chain_job(j) for j in jobs]
    for recs in results:
        yield from recs


@dataclass
class RunSummary:
    samples: int
    passing: int
    steps: int
    accepted_steps: int
    seconds: float

    @property
    def acceptance_fraction(self) -> float:
        return self.passing / self.samples if self.samples else 0.0

    @property
    def mh_acceptance_rate(self) -> float:
        return self.accepted_steps / self.steps if self.steps else 0.0

    def to_json(self) -> dict:
        return {"samples": self.samples, "passing": self.passing, "acceptance_fraction": self.acceptance_fraction,
                "steps": self.steps, "accepted_steps": self.accepted_steps,
                "mh_acceptance_rate": self.mh_acceptance_rate, "seconds": self.seconds}


def summarize(records, seconds: float = 0.0) -> RunSummary:
    records = list(records)
    return RunSummary(len(records), sum(r.passes for r in records), sum(r.steps for r in records),
                      sum(r.accepted_steps for r in records), seconds)


def sample_ensemble(g: DistrictGraph, cfg: SamplerConfig, workers: int = 1):
    """Collect the whole ensemble and its summary."""
    t0 = time.perf_counter()
    records = list(generate_ensemble(g, cfg, workers))
    return records, summarize(records, time.perf_counter() - t0)


def dumps_record(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)
