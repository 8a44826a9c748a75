"""Coordinate search for score weights against ensemble-level targets.

Weights are raised one at a time, each to the smallest candidate value
whose short trial ensemble meets its target, in the order population,
compactness, minority, county. When a later weight breaks an earlier
target, the search goes back to that earlier weight and repeats.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence

from .graph import DistrictGraph
from .sampler import SamplerConfig, sample_ensemble
from .scores import ScoreWeights, top_two


@dataclass
class TuneTargets:
    pop_deviation: float = 0.005
    pop_fraction: float = 0.25
    iso_limit: float = 60.0
    iso_fraction: float = 0.10
    minority_floor_1: float = 0.40
    minority_floor_2: float = 0.335
    minority_fraction: float = 0.50
    three_way_fraction: float = 0.05  # "nearly always" only two-way splits
    mean_two_way_splits: float = 25.0


@dataclass
class TuneGrid:
    w_p: Sequence[float] = (0.0, 10.0, 30.0, 100.0, 300.0, 1000.0, 3000.0, 10000.0)
    w_I: Sequence[float] = (0.0, 0.1, 0.3, 1.0, 2.5, 5.0, 10.0)
    w_m: Sequence[float] = (0.0, 10.0, 30.0, 100.0, 300.0, 800.0, 2000.0)
    w_c: Sequence[float] = (0.0, 0.05, 0.1, 0.2, 0.4, 1.0, 2.0)


@dataclass
class TrialResult:
    weights: ScoreWeights
    pop_ok: float
    iso_ok: float
    minority_ok: float
    three_way: float
    mean_two_way: float

    def to_json(self) -> dict:
        return {"weights": self.weights.to_dict(), "pop_ok": self.pop_ok, "iso_ok": self.iso_ok,
                "minority_ok": self.minority_ok, "three_way": self.three_way, "mean_two_way": self.mean_two_way}


@dataclass
class TuneResult:
    weights: ScoreWeights
    satisfied: Dict[str, bool]
    trials: List[TrialResult] = field(default_factory=list)

    def to_json(self) -> dict:
        return {"weights": self.weights.to_dict(), "satisfied": self.satisfied,
                "trials": [t.to_json() for t in self.trials]}


def measure(records, targets: TuneTargets, weights: ScoreWeights) -> TrialResult:
    n = len(records)
    pop_ok = iso_ok = min_ok = three = 0
    two_sum = 0
    for r in records:
        ideal = r.ideal_population
        if all(abs(d["population"] / ideal - 1.0) <= targets.pop_deviation for d in r.districts):
            pop_ok += 1
        if all(d["isoperimetric_ratio"] <= targets.iso_limit for d in r.districts):
            iso_ok += 1
        m1, m2 = top_two([d["minority_fraction"] for d in r.districts])
        if m1 > targets.minority_floor_1 and m2 >= targets.minority_floor_2:
            min_ok += 1
        three += r.county_splits["three_plus"] > 0
        two_sum += r.county_splits["two"]
    return TrialResult(weights, pop_ok / n, iso_ok / n, min_ok / n, three / n, two_sum / n)


def _checks(t: TrialResult, targets: TuneTargets) -> Dict[str, bool]:
    return {
        "population": t.pop_ok >= targets.pop_fraction,
        "compactness": t.iso_ok >= targets.iso_fraction,
        "minority": t.minority_ok >= targets.minority_fraction,
        "county": t.three_way <= targets.three_way_fraction and t.mean_two_way <= targets.mean_two_way_splits,
    }


_ORDER = (("w_p", "population"), ("w_I", "compactness"), ("w_m", "minority"), ("w_c", "county"))


def tune_weights(g: DistrictGraph, base: SamplerConfig, targets: Optional[TuneTargets] = None,
                 grid: Optional[TuneGrid] = None, samples: int = 20, max_rounds: int = 3,
                 skip: Sequence[str] = (), log: Optional[Callable[[str], None]] = None) -> TuneResult:
    """Return the first weight vector (from all-zero upward) meeting every target.

    ``skip`` names targets to leave alone (for example ``"minority"`` on a
    map without minority data); their weights stay at zero.
    """
    targets = targets or TuneTargets()
    grid = grid or TuneGrid()
    weights = replace(base.weights, w_p=0.0, w_I=0.0, w_c=0.0, w_m=0.0)
    trials: List[TrialResult] = []
    cache: Dict[tuple, TrialResult] = {}

    def trial(w: ScoreWeights) -> TrialResult:
        key = (w.w_p, w.w_I, w.w_c, w.w_m)
        if key not in cache:
            cfg = replace(base, weights=w, target_samples=samples, chains=1)
            records, _ = sample_ensemble(g, cfg)
            cache[key] = measure(records, targets, w)
            trials.append(cache[key])
            if log:
                log(f"{key} -> {cache[key].to_json()}")
        return cache[key]

    active = [(name, check) for name, check in _ORDER if check not in skip]
    for _ in range(max_rounds):
        for name, check in active:
            chosen = None
            for value in sorted(v for v in getattr(grid, name) if v >= getattr(weights, name)):
                cand = replace(weights, **{name: value})
                if _checks(trial(cand), targets)[check]:
                    chosen = cand
                    break
            weights = chosen or replace(weights, **{name: max(getattr(grid, name))})
        status = _checks(trial(weights), targets)
        if all(status[c] for _, c in active):
            break
    status = _checks(trial(weights), targets)
    return TuneResult(weights, {c: status[c] for _, c in active}, trials)
