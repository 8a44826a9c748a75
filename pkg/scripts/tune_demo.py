"""Run the weight search on a synthetic grid and print each trial.

    python3 scripts/tune_demo.py --rows 10 --cols 10 --districts 4
"""
import argparse
import json

from gerryensemble.sampler import AnnealingSchedule, SamplerConfig
from gerryensemble.scores import ScoreWeights
from gerryensemble.synth import SynthSpec, make_grid_state, stripe_plan
from gerryensemble.tuning import TuneTargets, tune_weights


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=10)
    ap.add_argument("--cols", type=int, default=10)
    ap.add_argument("--districts", type=int, default=4)
    ap.add_argument("--trial-samples", type=int, default=12)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()

    spec = SynthSpec(args.rows, args.cols, num_districts=args.districts, population_model="urban",
                     base_population=100, urban_peak=3, minority_base=0.1, minority_peak=0.6, county_block=5,
                     seed=args.seed)
    g, _ = make_grid_state(spec)
    base = SamplerConfig(stripe_plan(g, spec), ScoreWeights(), AnnealingSchedule(2000, 4000, 2000),
                         num_districts=args.districts, rng_seed=args.seed)
    result = tune_weights(g, base, TuneTargets(), samples=args.trial_samples, log=print)
    print(json.dumps({"weights": result.weights.to_dict(), "satisfied": result.satisfied}, indent=2))


if __name__ == "__main__":
    main()
