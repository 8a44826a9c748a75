"""Re-tallying a fixed two-party vote table under arbitrary plans."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Dict, List, Sequence

import numpy as np

from .graph import _open_text, fmt_number

DEM = "Dem"
REP = "Rep"


class VoteError(ValueError):
    pass


@dataclass
class VoteTable:
    election: str
    dem: Dict[str, float]
    rep: Dict[str, float]
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if set(self.dem) != set(self.rep):
            raise VoteError("dem and rep columns cover different units")
        bad = [k for k in self.dem if self.dem[k] < 0 or self.rep[k] < 0]
        if bad:
            raise VoteError(f"negative vote counts for {bad[:5]}")

    def arrays_for(self, g):
        """(dem, rep) numpy arrays aligned with the graph's vertex order."""
        key = id(g)
        hit = self._cache.get(key)
        if hit is not None and hit[0] is g:
            return hit[1], hit[2]
        missing = [i for i in g.ids if i not in self.dem]
        if missing:
            raise VoteError(f"vote table has no entry for {missing[:5]}{' ...' if len(missing) > 5 else ''}")
        extra = [i for i in self.dem if i not in g.index]
        if extra:
            raise VoteError(f"vote table has units absent from the graph: {extra[:5]}")
        dem = np.array([self.dem[i] for i in g.ids], dtype=float)
        rep = np.array([self.rep[i] for i in g.ids], dtype=float)
        self._cache[key] = (g, dem, rep)
        return dem, rep

    @property
    def total_dem(self) -> float:
        return float(sum(self.dem.values()))

    @property
    def total_rep(self) -> float:
        return float(sum(self.rep.values()))


def read_votes(source, election: str = "") -> VoteTable:
    with _open_text(source) as f:
        reader = csv.DictReader(f)
        if (reader.fieldnames or []) != ["id", "dem", "rep"]:
            raise VoteError("votes header must be id,dem,rep")
        dem, rep = {}, {}
        for row in reader:
            vid = row["id"]
            if vid in dem:
                raise VoteError(f"duplicate id {vid!r} in votes")
            try:
                dem[vid] = float(row["dem"])
                rep[vid] = float(row["rep"])
            except ValueError:
                raise VoteError(f"{vid!r}: non-numeric vote count") from None
    if not election and isinstance(source, str):
        election = source
    return VoteTable(election, dem, rep)


def write_votes(votes: VoteTable, path, order: Sequence[str] = None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["id", "dem", "rep"])
        for vid in (order or votes.dem.keys()):
            w.writerow([vid, fmt_number(votes.dem[vid]), fmt_number(votes.rep[vid])])


@dataclass(frozen=True)
class DistrictResult:
    district: int
    dem_votes: float
    rep_votes: float
    dem_share: float
    winner: str


def _results(dem_tot, rep_tot) -> List[DistrictResult]:
    out = []
    for k, (d, r) in enumerate(zip(dem_tot, rep_tot), start=1):
        total = d + r
        if not total > 0:
            raise VoteError(f"district {k} has no votes; share undefined")
        share = d / total
        # exact ties go to the Republican
        out.append(DistrictResult(k, float(d), float(r), float(share), DEM if share > 0.5 else REP))
    return out


def tally(plan, votes: VoteTable) -> List[DistrictResult]:
    """Per-district two-party totals, shares and winners for ``plan``."""
    d = plan.num_districts
    dem_tot = [0.0] * d
    rep_tot = [0.0] * d
    for vid, lab in plan.assignment.items():
        if vid not in votes.dem:
            raise VoteError(f"vote table has no entry for {vid!r}")
        dem_tot[lab - 1] += votes.dem[vid]
        rep_tot[lab - 1] += votes.rep[vid]
    extra = set(votes.dem) - set(plan.assignment)
    if extra:
        raise VoteError(f"vote table has units absent from the plan: {sorted(extra)[:5]}")
    return _results(dem_tot, rep_tot)


def tally_labels(labels, dem, rep, num_districts: int) -> List[DistrictResult]:
    """Vectorized :func:`tally` for a label array aligned with ``dem``/``rep``."""
    idx = np.asarray(labels, dtype=np.int64) - 1
    dem_tot = np.bincount(idx, weights=dem, minlength=num_districts)
    rep_tot = np.bincount(idx, weights=rep, minlength=num_districts)
    return _results(dem_tot.tolist(), rep_tot.tolist())


def _shares(results) -> List[float]:
    return [r.dem_share if isinstance(r, DistrictResult) else float(r) for r in results]


def ranked_shares(results) -> List[float]:
    """Democratic shares sorted from most Republican to most Democratic district."""
    return sorted(_shares(results))


def seat_count(results) -> int:
    """Democratic seats: districts whose share strictly exceeds one half."""
    return sum(1 for s in _shares(results) if s > 0.5)


def interpolated_seats(results) -> float:
    """Seat count plus the fractional crossing between the two marginal districts.

    The anchors are the Democratic-won district with the lowest share and
    the Republican-won district with the highest share; the fraction is
    where the line through them meets 50%. A sweep returns the seat count.
    """
    shares = _shares(results)
    won = [s for s in shares if s > 0.5]
    lost = [s for s in shares if s <= 0.5]
    if not lost:
        return float(len(shares))
    if not won:
        return 0.0
    d_dem = min(won)
    d_rep = max(lost)
    return len(won) + (d_dem - 0.5) / (d_dem - d_rep)
