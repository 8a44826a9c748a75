"""Ensemble statistics and the indices that place one plan against the ensemble.

* Gerrymandering index: Euclidean distance from a plan's ranked Democratic
  share vector to the ensemble's per-rank means.
* Representativeness index: distance from a plan's interpolated seat count
  to the ensemble mean of that quantity.
* Efficiency gap: Democratic minus Republican wasted share per district.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Dict, List, Sequence

import numpy as np

from .graph import fmt_number
from .tally import DistrictResult, interpolated_seats, ranked_shares, seat_count, tally_labels


class EmptyEnsembleError(ValueError):
    pass


@dataclass
class EnsembleStats:
    mean: List[float]
    median: List[float]
    q1: List[float]
    q3: List[float]
    lo: List[float]
    hi: List[float]
    size: int
    seat_hist: Dict[int, int] = field(default_factory=dict)
    interpolated: List[float] = field(default_factory=list)

    @property
    def interpolated_mean(self) -> float:
        return math.fsum(self.interpolated) / len(self.interpolated) if self.interpolated else math.nan


def rank_marginal_stats(vectors: Sequence[Sequence[float]]) -> EnsembleStats:
    """Per-rank mean, median, quartiles and whiskers of ranked share vectors.

    Whiskers extend 1.5 IQR past the quartiles, capped at the observed extremes.
    """
    if len(vectors) == 0:
        raise EmptyEnsembleError("empty ensemble")
    arr = np.asarray(vectors, dtype=float)
    if arr.ndim != 2:
        raise ValueError("vectors must share one length")
    mean = [math.fsum(col) / arr.shape[0] for col in arr.T.tolist()]
    q1, med, q3 = np.percentile(arr, [25, 50, 75], axis=0)
    iqr = q3 - q1
    hi = np.minimum(arr.max(axis=0), q3 + 1.5 * iqr)
    lo = np.maximum(arr.min(axis=0), q1 - 1.5 * iqr)
    return EnsembleStats(mean, med.tolist(), q1.tolist(), q3.tolist(), lo.tolist(), hi.tolist(), arr.shape[0])


def gerrymandering_index(ranked: Sequence[float], rank_means: Sequence[float]) -> float:
    if len(ranked) != len(rank_means):
        raise ValueError("ranked shares and rank means differ in length")
    return math.sqrt(math.fsum((m - s) ** 2 for s, m in zip(ranked, rank_means)))


def representativeness_index(value: float, ensemble_mean: float) -> float:
    return abs(value - ensemble_mean)


def _two_shares(r):
    if isinstance(r, DistrictResult):
        t = r.dem_votes + r.rep_votes
        return r.dem_votes / t, r.rep_votes / t
    d = float(r)
    return d, 1.0 - d


def efficiency_gap(results, by_votes: bool = False) -> float:
    """Democratic minus Republican wasted vote, normalized; positive means Democrats wasted more.

    The default works on district shares and divides by the number of
    districts (equal-size districts). ``by_votes`` uses raw counts and the
    statewide two-party total instead. Both party terms are computed the
    same way from their own counts, so swapping parties negates the result
    exactly.
    """
    dem_w = rep_w = 0.0
    if by_votes:
        total = 0.0
        for r in results:
            t = r.dem_votes + r.rep_votes
            total += t
            if r.dem_votes > r.rep_votes:
                dem_w += r.dem_votes - t / 2
                rep_w += r.rep_votes
            elif r.rep_votes > r.dem_votes:
                rep_w += r.rep_votes - t / 2
                dem_w += r.dem_votes
            else:
                dem_w += r.dem_votes
                rep_w += r.rep_votes - t / 2
        return (dem_w - rep_w) / total
    n = 0
    for r in results:
        n += 1
        d, p = _two_shares(r)
        if d > p:
            dem_w += d - 0.5
            rep_w += p
        elif p > d:
            dem_w += d
            rep_w += p - 0.5
        else:
            dem_w += d
            rep_w += p - 0.5
    return (dem_w - rep_w) / n


def complementary_cdf(values: Sequence[float]):
    """Sorted (x, fraction of values strictly greater than x) over distinct x."""
    if len(values) == 0:
        raise EmptyEnsembleError("empty value list")
    xs = np.sort(np.asarray(values, dtype=float))
    n = len(xs)
    uniq = np.unique(xs)
    greater = n - np.searchsorted(xs, uniq, side="right")
    return [(float(x), float(c) / n) for x, c in zip(uniq, greater)]


def quantile_of(value: float, values: Sequence[float]) -> float:
    """Fraction of ``values`` strictly greater than ``value``."""
    if len(values) == 0:
        raise EmptyEnsembleError("empty ensemble")
    xs = np.sort(np.asarray(values, dtype=float))
    return float(len(xs) - np.searchsorted(xs, value, side="right")) / len(xs)


def pearson_correlation(xs: Sequence[float], ys: Sequence[float]) -> float:
    if len(xs) != len(ys):
        raise ValueError("length mismatch")
    n = len(xs)
    if n < 2:
        raise ValueError("need at least two points")
    mx = math.fsum(xs) / n
    my = math.fsum(ys) / n
    dx = [x - mx for x in xs]
    dy = [y - my for y in ys]
    sxy = math.fsum(a * b for a, b in zip(dx, dy))
    sxx = math.fsum(a * a for a in dx)
    syy = math.fsum(b * b for b in dy)
    if sxx == 0 or syy == 0:
        raise ValueError("degenerate variance")
    r = sxy / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


# -- ensemble-level analysis ---------------------------------------------------------

@dataclass
class PlanOutcome:
    ranked: List[float]
    seats: int
    interpolated: float
    efficiency_gap: float


def plan_outcome(labels, dem, rep, num_districts: int, eg_by_votes: bool = False) -> PlanOutcome:
    results = tally_labels(labels, dem, rep, num_districts)
    return PlanOutcome(ranked_shares(results), seat_count(results), interpolated_seats(results),
                       efficiency_gap(results, eg_by_votes))


@dataclass
class IndexReport:
    gerrymandering_index: float
    representativeness_index: float
    efficiency_gap: float
    seats: int
    interpolated_seats: float
    ranked_shares: List[float]
    quantiles: Dict[str, float]

    def to_json(self) -> dict:
        return {
            "gerrymandering_index": self.gerrymandering_index,
            "representativeness_index": self.representativeness_index,
            "efficiency_gap": self.efficiency_gap,
            "seats": self.seats,
            "interpolated_seats": self.interpolated_seats,
            "ranked_shares": self.ranked_shares,
            "quantiles": self.quantiles,
        }


class EnsembleAnalysis:
    """Tallies every ensemble plan under one vote table and caches the per-plan indices.

    ``label_rows`` are label vectors aligned with the graph's vertex order.
    Only the plans given are used; filter to threshold-passing samples first.
    """

    def __init__(self, g, votes, label_rows, num_districts: int, eg_by_votes: bool = False):
        if len(label_rows) == 0:
            raise EmptyEnsembleError("empty ensemble")
        self.g = g
        self.num_districts = num_districts
        self.eg_by_votes = eg_by_votes
        self.dem, self.rep = votes.arrays_for(g)
        self.outcomes = [plan_outcome(l, self.dem, self.rep, num_districts, eg_by_votes) for l in label_rows]
        self.stats = rank_marginal_stats([o.ranked for o in self.outcomes])
        self.stats.interpolated = [o.interpolated for o in self.outcomes]
        hist: Dict[int, int] = {}
        for o in self.outcomes:
            hist[o.seats] = hist.get(o.seats, 0) + 1
        self.stats.seat_hist = dict(sorted(hist.items()))
        self.gerrymandering = [gerrymandering_index(o.ranked, self.stats.mean) for o in self.outcomes]
        self.representativeness = [representativeness_index(o.interpolated, self.stats.interpolated_mean)
                                   for o in self.outcomes]
        self.efficiency = [o.efficiency_gap for o in self.outcomes]

    @property
    def size(self) -> int:
        return len(self.outcomes)

    @property
    def seats(self) -> List[int]:
        return [o.seats for o in self.outcomes]

    def report(self, labels) -> IndexReport:
        o = plan_outcome(labels, self.dem, self.rep, self.num_districts, self.eg_by_votes)
        gi = gerrymandering_index(o.ranked, self.stats.mean)
        ri = representativeness_index(o.interpolated, self.stats.interpolated_mean)
        quantiles = {
            "gerrymandering_index": quantile_of(gi, self.gerrymandering),
            "representativeness_index": quantile_of(ri, self.representativeness),
            "efficiency_gap": quantile_of(abs(o.efficiency_gap), [abs(x) for x in self.efficiency]),
            "seats_at_most": sum(1 for s in self.seats if s <= o.seats) / self.size,
        }
        return IndexReport(gi, ri, o.efficiency_gap, o.seats, o.interpolated, o.ranked, quantiles)


# -- exports ----------------------------------------------------------------------------

def _writer(path):
    f = open(path, "w", newline="", encoding="utf-8")
    return f, csv.writer(f, lineterminator="\n")


def write_boxplot_csv(stats: EnsembleStats, path) -> None:
    f, w = _writer(path)
    with f:
        w.writerow(["rank", "mean", "median", "q1", "q3", "lo", "hi"])
        for i in range(len(stats.mean)):
            w.writerow([i + 1] + [repr(float(x[i])) for x in
                                  (stats.mean, stats.median, stats.q1, stats.q3, stats.lo, stats.hi)])


def write_ccdf_csv(values: Sequence[float], path) -> None:
    f, w = _writer(path)
    with f:
        w.writerow(["value", "fraction_greater"])
        for x, frac in complementary_cdf(values):
            w.writerow([repr(x), repr(frac)])


def interpolated_histogram(values: Sequence[float], width: float = 0.1):
    """(bin start, count) pairs for bins ``[k*width, (k+1)*width)`` covering the values."""
    counts: Dict[int, int] = {}
    for v in values:
        k = math.floor(v / width + 1e-9)
        counts[k] = counts.get(k, 0) + 1
    return [(round(k * width, 10), counts[k]) for k in sorted(counts)]


def write_seats_csv(stats: EnsembleStats, path, width: float = 0.1) -> None:
    """Integer seat histogram followed by the interpolated-seat histogram."""
    f, w = _writer(path)
    with f:
        w.writerow(["kind", "bin", "count"])
        for seats, count in stats.seat_hist.items():
            w.writerow(["seats", seats, count])
        for start, count in interpolated_histogram(stats.interpolated, width):
            w.writerow(["interpolated", fmt_number(start), count])


def write_indices_json(report: IndexReport, path, extra: dict = None) -> None:
    obj = report.to_json()
    if extra:
        obj.update(extra)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(obj, f, sort_keys=True, indent=2)
        f.write("\n")
