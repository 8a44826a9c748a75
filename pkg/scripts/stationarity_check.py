"""Compare the flip chain's stationary law with the Gibbs distribution on a 4x4 grid.

    python3 scripts/stationarity_check.py --beta 0.05 --steps 2000000

For both acceptance rules (bare conflicted-edge ratio, and the same ratio
times the edge-multiplicity correction) this prints the total-variation
distance from Gibbs of the exact stationary vector and of an empirical run.
With ``--default-weights`` the default weights are used, where the
chain cannot leave a balanced start at moderate beta.
"""
import argparse
import time

import numpy as np

from gerryensemble.plan import PlanState
from gerryensemble.sampler import Chain
from gerryensemble.scores import ScoreWeights
from gerryensemble.synth import (SynthSpec, canonical_labels, chain_occupancy, exact_by_partition,
                                 exact_distribution, make_grid_state, stationary_distribution, stripe_plan,
                                 total_variation, transition_matrix)


def by_partition(states, probs):
    out = {}
    for s, p in zip(states, probs):
        key = canonical_labels(s)
        out[key] = out.get(key, 0.0) + float(p)
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=4)
    ap.add_argument("--cols", type=int, default=4)
    ap.add_argument("--beta", type=float, default=0.05)
    ap.add_argument("--steps", type=int, default=1_000_000)
    ap.add_argument("--seed", type=int, default=3)
    ap.add_argument("--default-weights", action="store_true")
    args = ap.parse_args()

    spec = SynthSpec(args.rows, args.cols, num_districts=2)
    g, _ = make_grid_state(spec)
    w = ScoreWeights() if args.default_weights else ScoreWeights(w_p=1.0, w_I=1.0, w_c=0.0, w_m=0.0)
    gibbs = exact_by_partition(exact_distribution(g, 2, w, args.beta), g)
    print(f"{len(gibbs)} connected partitions, beta {args.beta}, weights {w.to_dict()}")
    for correction in (False, True):
        states, P, _ = transition_matrix(g, 2, w, args.beta, multiplicity_correction=correction)
        exact_tv = total_variation(by_partition(states, stationary_distribution(P)), gibbs)
        chain = Chain(PlanState(g, stripe_plan(g, spec)), w, seed=args.seed, multiplicity_correction=correction)
        t0 = time.perf_counter()
        occ = chain_occupancy(chain, args.steps, args.beta)
        emp_tv = total_variation({k: c / args.steps for k, c in occ.items()}, gibbs)
        name = "corrected ratio" if correction else "bare ratio"
        print(f"{name:16s} exact TV {exact_tv:.4f}  empirical TV {emp_tv:.4f}  "
              f"accepted {chain.accepted}/{args.steps}  {time.perf_counter() - t0:.0f} s")


if __name__ == "__main__":
    main()
