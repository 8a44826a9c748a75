"""Sample an ensemble on the urban-cluster grid and place a packed plan against it.

    python3 scripts/desk_gerrymander.py --samples 2000

Prints the seat histogram, the mean ranked-district shares and where the
planted plan falls in the Gerrymandering Index and seat distributions.
"""
import argparse
import time

import numpy as np

from gerryensemble.analytics import EnsembleAnalysis
from gerryensemble.sampler import AnnealingSchedule, SamplerConfig, ThresholdConfig, sample_ensemble
from gerryensemble.scores import ScoreWeights
from gerryensemble.synth import make_grid_state, plant_packed_plan, stripe_plan, urban_cluster_spec


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=11)
    ap.add_argument("--state-seed", type=int, default=1)
    args = ap.parse_args()

    spec = urban_cluster_spec(seed=args.state_seed)
    g, votes = make_grid_state(spec)
    cfg = SamplerConfig(stripe_plan(g, spec), ScoreWeights(w_m=0), AnnealingSchedule(1000, 2000, 1000),
                        ThresholdConfig(0.05, None, False, None, None), num_districts=spec.num_districts,
                        target_samples=args.samples, rng_seed=args.seed)
    t0 = time.perf_counter()
    records, summary = sample_ensemble(g, cfg)
    print(f"{len(records)} samples in {time.perf_counter() - t0:.0f} s, {summary.passing} passing")

    ea = EnsembleAnalysis(g, votes, [r.labels for r in records if r.passes], spec.num_districts)
    print("seat histogram", ea.stats.seat_hist)
    print("mean ranked dem shares", np.round(ea.stats.mean, 3).tolist())
    report = ea.report(plant_packed_plan(g, votes, spec.num_districts).labels_for(g))
    print("planted ranked shares", np.round(report.ranked_shares, 3).tolist())
    print(f"planted GI {report.gerrymandering_index:.4f}, ensemble 95th percentile "
          f"{np.percentile(ea.gerrymandering, 95):.4f}, fraction above planted "
          f"{report.quantiles['gerrymandering_index']:.4f}")
    print(f"planted seats {report.seats}, ensemble 5th percentile {np.percentile(ea.seats, 5):g}, "
          f"fraction at or below {report.quantiles['seats_at_most']:.4f}")


if __name__ == "__main__":
    main()
