"""Command-line entry point.

Exit codes: 0 on success, 1 on a runtime failure, 2 on a usage or input
error. Commands that write several files remove what they wrote when they
fail part way.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import json
import os
import sys
import time
from contextlib import contextmanager
from dataclasses import fields, replace
from pathlib import Path
from typing import List, Optional

from . import __version__
from .analytics import (EmptyEnsembleError, EnsembleAnalysis, write_boxplot_csv, write_ccdf_csv,
                        write_indices_json, write_seats_csv)
from .graph import GraphError, load_graph, write_graph
from .plan import Plan, PlanError, PlanState, max_district_deviation, read_plan, write_plan
from .sampler import (AnnealingSchedule, Neighborhood, SamplerConfig, ThresholdConfig,
                      chain_seed, dumps_record, generate_ensemble, summarize)
from .scores import ScoreWeights
from .synth import (SynthSpec, exact_distribution, make_grid_state, plant_packed_plan, stripe_plan,
                    urban_cluster_spec)
from .tally import VoteError, interpolated_seats, read_votes, seat_count, tally, write_votes
from .tuning import TuneTargets, tune_weights


class InputError(Exception):
    """Bad flags, missing files or malformed input; maps to exit code 2."""


INPUT_ERRORS = (InputError, GraphError, PlanError, VoteError, FileNotFoundError, IsADirectoryError,
                json.JSONDecodeError, EmptyEnsembleError)


# -- file helpers ---------------------------------------------------------------------

def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


class Outputs:
    """Tracks files written by one command so a failure can remove them all."""

    def __init__(self, root: Path):
        self.root = root
        self.written: List[Path] = []
        self.made_root = False

    def path(self, name: str) -> Path:
        p = self.root / name
        p.parent.mkdir(parents=True, exist_ok=True)
        self.written.append(p)
        return p

    @contextmanager
    def atomic(self, name: str, mode: str = "w"):
        """Write to a temporary sibling and rename into place on success."""
        final = self.path(name)
        tmp = final.with_name(final.name + ".part")
        f = open(tmp, mode, encoding="utf-8", newline="")
        try:
            yield f
        except BaseException:
            f.close()
            tmp.unlink(missing_ok=True)
            raise
        f.close()
        os.replace(tmp, final)

    def cleanup(self):
        for p in reversed(self.written):
            p.unlink(missing_ok=True)
            p.with_name(p.name + ".part").unlink(missing_ok=True)
        # remove directories we created that are now empty
        dirs = sorted({p.parent for p in self.written}, key=lambda d: len(d.parts), reverse=True)
        for d in dirs:
            try:
                if d != self.root or self.made_root:
                    d.rmdir()
            except OSError:
                pass

    def listing(self) -> List[str]:
        return [str(p.relative_to(self.root)) for p in self.written if p.exists()]


def _out_dir(args, default_tag: str) -> Outputs:
    if args.out:
        root = Path(args.out)
    else:
        stamp = _dt.datetime.now().strftime("%Y%m%d-%H%M%S")
        root = Path("runs") / f"{stamp}-{default_tag}"
    made = not root.exists()
    root.mkdir(parents=True, exist_ok=True)
    out = Outputs(root)
    out.made_root = made
    return out


def _require(path, what: str) -> Path:
    if not path:
        raise InputError(f"missing {what}")
    p = Path(path)
    if not p.is_file():
        raise InputError(f"{what} not found: {p}")
    return p


def _write_json(f, obj):
    json.dump(obj, f, sort_keys=True, indent=2, allow_nan=False)
    f.write("\n")


# -- config -------------------------------------------------------------------------

def _dataclass_from(cls, obj, what):
    if obj is None:
        return cls()
    if not isinstance(obj, dict):
        raise InputError(f"{what} must be a JSON object")
    known = {f.name for f in fields(cls)}
    unknown = set(obj) - known
    if unknown:
        raise InputError(f"unknown {what} fields: {sorted(unknown)}")
    try:
        return cls(**obj)
    except (TypeError, ValueError) as exc:
        raise InputError(f"{what}: {exc}") from None


def load_config(path: Optional[str]) -> dict:
    """Read a run config; relative paths inside it resolve against its directory."""
    if not path:
        return {}
    p = _require(path, "config file")
    with open(p, encoding="utf-8") as f:
        raw = json.load(f)
    if not isinstance(raw, dict):
        raise InputError("config must be a JSON object")
    base = p.parent
    for key in ("graph_nodes", "graph_edges", "votes", "initial_plan"):
        if isinstance(raw.get(key), str):
            raw[key] = str(base / raw[key])
    nb = raw.get("neighborhood")
    if isinstance(nb, dict) and isinstance(nb.get("reference"), str):
        nb["reference"] = str(base / nb["reference"])
    return raw


def build_sampler_config(args, raw: dict):
    """Merge flags over the config file; returns (graph, SamplerConfig, input paths)."""
    nodes = _require(args.graph_nodes or raw.get("graph_nodes"), "--graph-nodes")
    edges = _require(args.graph_edges or raw.get("graph_edges"), "--graph-edges")
    plan_path = _require(args.plan or raw.get("initial_plan"), "--plan (initial plan)")
    votes_arg = args.votes or raw.get("votes")
    votes_path = _require(votes_arg, "--votes") if votes_arg else None

    g = load_graph(str(nodes), str(edges))
    districts = args.districts or raw.get("num_districts")
    plan = read_plan(str(plan_path), districts)
    PlanState(g, plan)  # validates labels, emptiness and contiguity
    if votes_path is not None:
        read_votes(str(votes_path)).arrays_for(g)

    weights = _dataclass_from(ScoreWeights, raw.get("weights"), "weights")
    if args.compactness:
        weights = replace(weights, compactness=args.compactness)
    if weights.compactness == "dispersion" and not g.has_bbox:
        raise InputError("dispersion compactness needs bounding boxes in the nodes file")
    schedule = _dataclass_from(AnnealingSchedule, raw.get("schedule"), "schedule")
    thresholds = _dataclass_from(ThresholdConfig, raw.get("thresholds"), "thresholds")

    neighborhood = None
    nb_raw = raw.get("neighborhood") or {}
    ref_path = args.neighborhood or nb_raw.get("reference")
    if ref_path:
        ref = read_plan(str(_require(ref_path, "--neighborhood reference plan")), plan.num_districts)
        PlanState(g, ref)
        max_dev = args.max_dev if args.max_dev is not None else nb_raw.get("max_deviation", 40)
        if max_district_deviation(PlanState(g, plan), ref) > max_dev:
            raise InputError("initial plan is already outside the neighborhood")
        neighborhood = Neighborhood(ref, int(max_dev))
    elif args.max_dev is not None:
        raise InputError("--max-dev needs --neighborhood")

    try:
        cfg = SamplerConfig(
            initial_plan=plan,
            weights=weights,
            schedule=schedule,
            thresholds=thresholds,
            num_districts=plan.num_districts,
            target_samples=args.samples if args.samples is not None else raw.get("target_samples", 1),
            rng_seed=args.seed if args.seed is not None else raw.get("rng_seed", 0),
            chains=args.chains if args.chains is not None else raw.get("chains", 1),
            neighborhood=neighborhood,
            restart=bool(raw.get("restart", False)),
            multiplicity_correction=bool(raw.get("multiplicity_correction", False)),
        )
    except ValueError as exc:
        raise InputError(str(exc)) from None
    inputs = {"graph_nodes": nodes, "graph_edges": edges, "initial_plan": plan_path}
    if votes_path:
        inputs["votes"] = votes_path
    if neighborhood is not None:
        inputs["neighborhood"] = Path(ref_path)
    return g, cfg, inputs


# -- commands -------------------------------------------------------------------------

def cmd_synth(args) -> int:
    if args.preset == "urban":
        spec = urban_cluster_spec(seed=args.seed or 0)
        overrides = {k: v for k, v in (("rows", args.rows), ("cols", args.cols),
                                        ("num_districts", args.districts)) if v is not None}
        spec = replace(spec, **overrides)
    else:
        spec = SynthSpec(rows=args.rows or 10, cols=args.cols or 10, num_districts=args.districts or 4,
                         county_block=args.county_block, seed=args.seed or 0)
    g, votes = make_grid_state(spec)
    out = _out_dir(args, f"synth-seed{spec.seed}")
    try:
        write_graph(g, out.path("nodes.csv"), out.path("edges.csv"))
        write_votes(votes, out.path("votes.csv"), g.ids)
        write_plan(stripe_plan(g, spec), out.path("plan.csv"))
        if args.packed:
            write_plan(plant_packed_plan(g, votes, spec.num_districts), out.path("packed_plan.csv"))
        with out.atomic("spec.json") as f:
            _write_json(f, spec.to_dict())
    except BaseException:
        out.cleanup()
        raise
    print(out.root)
    return 0


def _manifest(cfg: SamplerConfig, inputs: dict, started: float, finished: float, outputs: List[str], command: str,
              extra: Optional[dict] = None) -> dict:
    cfg_json = cfg.to_dict()
    cfg_json.update({role: str(p) for role, p in inputs.items()})
    obj = {
        "tool": "gerryensemble",
        "version": __version__,
        "command": command,
        "config": cfg_json,
        "seeds": {str(c): chain_seed(cfg.rng_seed, c) for c in range(cfg.chains)},
        "inputs": {role: {"path": str(p), "sha256": sha256_file(p)} for role, p in inputs.items()},
        "started": _dt.datetime.fromtimestamp(started, _dt.timezone.utc).isoformat(),
        "finished": _dt.datetime.fromtimestamp(finished, _dt.timezone.utc).isoformat(),
        "outputs": outputs,
    }
    if extra:
        obj.update(extra)
    return obj


def cmd_sample(args, command: str = "sample") -> int:
    raw = load_config(args.config)
    g, cfg, inputs = build_sampler_config(args, raw)
    plan_files = args.plan_files or bool(raw.get("plan_files", False))
    workers = min(cfg.chains, os.cpu_count() or 1) if args.workers is None else args.workers
    out = _out_dir(args, f"{command}-seed{cfg.rng_seed}")
    started = time.time()
    t0 = time.perf_counter()
    try:
        records = []
        with out.atomic("ensemble.jsonl") as f:
            for rec in generate_ensemble(g, cfg, workers):
                ref = None
                if plan_files:
                    ref = f"plans/c{rec.chain:03d}_{rec.cycle:06d}.csv"
                    write_plan(rec.plan(g), out.path(ref))
                f.write(dumps_record(rec.to_json(g, ref)) + "\n")
                records.append(rec)
        summary = summarize(records, time.perf_counter() - t0).to_json()
        summary["chains"] = cfg.chains
        if cfg.neighborhood is not None:
            summary["max_district_deviation"] = max(
                max_district_deviation(PlanState(g, r.plan(g)), cfg.neighborhood.reference) for r in records)
        with out.atomic("summary.json") as f:
            _write_json(f, summary)
        listing = out.listing() + ["manifest.json"]
        digests = {name: sha256_file(out.root / name) for name in listing if name != "manifest.json"}
        with out.atomic("manifest.json") as f:
            _write_json(f, _manifest(cfg, inputs, started, time.time(), listing, command,
                                     {"output_digests": digests, "workers": workers}))
    except BaseException:
        out.cleanup()
        raise
    print(out.root)
    return 0


def cmd_neighborhood(args) -> int:
    if not args.neighborhood and not (args.config and (load_config(args.config).get("neighborhood") or {})):
        raise InputError("neighborhood needs --neighborhood <reference plan>")
    if args.max_dev is None:
        args.max_dev = 40
    return cmd_sample(args, command="neighborhood")


def _graph_from(args, ensemble: Optional[Path] = None):
    nodes, edges = args.graph_nodes, args.graph_edges
    if (not nodes or not edges) and ensemble is not None:
        manifest = ensemble.parent / "manifest.json"
        if manifest.is_file():
            with open(manifest, encoding="utf-8") as f:
                inputs = json.load(f).get("inputs", {})
            nodes = nodes or inputs.get("graph_nodes", {}).get("path")
            edges = edges or inputs.get("graph_edges", {}).get("path")
    return load_graph(str(_require(nodes, "--graph-nodes")), str(_require(edges, "--graph-edges")))


def read_ensemble(path: Path, g, include_failing: bool = False) -> List[List[int]]:
    """Label rows of the ensemble records, passing samples only unless asked otherwise."""
    rows = []
    with open(path, encoding="utf-8") as f:
        for n, line in enumerate(f, 1):
            if not line.strip():
                continue
            obj = json.loads(line)
            if not include_failing and not obj.get("passes", False):
                continue
            if "plan" in obj:
                plan = Plan(obj["plan"], len(obj["districts"]))
            elif "plan_file" in obj:
                plan = read_plan(str(path.parent / obj["plan_file"]), len(obj["districts"]))
            else:
                raise InputError(f"{path}:{n}: record has neither plan nor plan_file")
            rows.append(plan.labels_for(g))
    if not rows:
        raise EmptyEnsembleError(f"no {'' if include_failing else 'passing '}samples in {path}")
    return rows


def _analysis(args):
    ens = _require(args.ensemble, "--ensemble")
    g = _graph_from(args, ens)
    votes = read_votes(str(_require(args.votes, "--votes")))
    rows = read_ensemble(ens, g, args.all)
    return g, votes, EnsembleAnalysis(g, votes, rows, max(max(r) for r in rows), args.eg_by_votes)


def cmd_tally(args) -> int:
    g = _graph_from(args)
    plan = read_plan(str(_require(args.plan, "--plan")), args.districts)
    plan.labels_for(g)
    votes = read_votes(str(_require(args.votes, "--votes")))
    results = tally(plan, votes)
    out = _out_dir(args, "tally")
    try:
        with out.atomic("tally.csv") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["district", "dem", "rep", "dem_share", "winner"])
            for r in results:
                w.writerow([r.district, repr(r.dem_votes), repr(r.rep_votes), repr(r.dem_share), r.winner])
    except BaseException:
        out.cleanup()
        raise
    print(f"seats {seat_count(results)} interpolated {interpolated_seats(results):.4f}")
    return 0


def cmd_indices(args) -> int:
    g, votes, ea = _analysis(args)
    plan = read_plan(str(_require(args.plan, "--plan")), ea.num_districts)
    report = ea.report(plan.labels_for(g))
    out = _out_dir(args, "indices")
    try:
        write_indices_json(report, out.path("indices.json"),
                           {"ensemble_size": ea.size, "interpolated_mean": ea.stats.interpolated_mean})
    except BaseException:
        out.cleanup()
        raise
    print(json.dumps(report.to_json(), sort_keys=True))
    return 0


def cmd_boxplot(args) -> int:
    _, _, ea = _analysis(args)
    out = _out_dir(args, "boxplot")
    try:
        write_boxplot_csv(ea.stats, out.path("boxplot.csv"))
    except BaseException:
        out.cleanup()
        raise
    return 0


def cmd_ccdf(args) -> int:
    _, _, ea = _analysis(args)
    out = _out_dir(args, "ccdf")
    try:
        write_ccdf_csv(ea.gerrymandering, out.path("ccdf_gerrymandering_index.csv"))
        write_ccdf_csv(ea.representativeness, out.path("ccdf_representativeness_index.csv"))
        write_ccdf_csv([abs(x) for x in ea.efficiency], out.path("ccdf_efficiency_gap.csv"))
    except BaseException:
        out.cleanup()
        raise
    return 0


def cmd_seats(args) -> int:
    _, _, ea = _analysis(args)
    out = _out_dir(args, "seats")
    try:
        write_seats_csv(ea.stats, out.path("seats_hist.csv"), args.bin_width)
    except BaseException:
        out.cleanup()
        raise
    return 0


def cmd_enumerate(args) -> int:
    g = _graph_from(args)
    if not args.districts:
        raise InputError("enumerate needs --districts")
    weights = ScoreWeights(compactness=args.compactness or "iso")
    if args.config:
        weights = _dataclass_from(ScoreWeights, load_config(args.config).get("weights"), "weights")
    try:
        exact = exact_distribution(g, args.districts, weights, args.beta, args.balance)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    out = _out_dir(args, "enumerate")
    try:
        with out.atomic("plans.csv") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["plan"] + list(g.ids))
            for k, p in enumerate(exact.plans):
                w.writerow([k] + p.labels_for(g))
        with out.atomic("exact.json") as f:
            _write_json(f, exact.to_json(g))
    except BaseException:
        out.cleanup()
        raise
    print(f"{len(exact.plans)} plans")
    return 0


def cmd_tune(args) -> int:
    raw = load_config(args.config)
    g, cfg, _ = build_sampler_config(args, raw)
    targets = _dataclass_from(TuneTargets, raw.get("tune_targets"), "tune_targets")
    skip = tuple(s for s in (args.skip or "").split(",") if s)
    result = tune_weights(g, cfg, targets, samples=args.trial_samples, skip=skip,
                          log=lambda s: print(s, file=sys.stderr))
    out = _out_dir(args, "tune")
    try:
        with out.atomic("tune.json") as f:
            _write_json(f, result.to_json())
    except BaseException:
        out.cleanup()
        raise
    print(json.dumps({"weights": result.weights.to_dict(), "satisfied": result.satisfied}, sort_keys=True))
    return 0


# -- argument parsing ---------------------------------------------------------------------

def _common(p, *groups):
    p.add_argument("--out", help="output directory (default: runs/<timestamp>-<tag>)")
    p.add_argument("--graph-nodes")
    p.add_argument("--graph-edges")
    if "votes" in groups:
        p.add_argument("--votes")
    if "plan" in groups:
        p.add_argument("--plan")
    if "ensemble" in groups:
        p.add_argument("--ensemble")
        p.add_argument("--all", action="store_true", help="include samples that failed the thresholds")
        p.add_argument("--eg-by-votes", action="store_true", help="vote-count efficiency gap")
    if "districts" in groups:
        p.add_argument("--districts", type=int)


def _sampling(p):
    _common(p, "votes", "plan", "districts")
    p.add_argument("--config")
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--chains", type=int)
    p.add_argument("--workers", type=int, help="processes for the chains (default: min(chains, cpus))")
    p.add_argument("--neighborhood", help="reference plan for the neighborhood constraint")
    p.add_argument("--max-dev", type=int)
    p.add_argument("--compactness", choices=("iso", "dispersion"))
    p.add_argument("--plan-files", action="store_true", help="write plans as sidecar CSVs")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gerryensemble", description="Redistricting ensembles by annealed MCMC.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic grid state")
    p.add_argument("--out")
    p.add_argument("--preset", choices=("grid", "urban"), default="grid")
    p.add_argument("--rows", type=int)
    p.add_argument("--cols", type=int)
    p.add_argument("--districts", type=int)
    p.add_argument("--county-block", type=int, default=0)
    p.add_argument("--seed", type=int)
    p.add_argument("--packed", action="store_true", help="also write a packed partisan plan")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("sample", help="generate an ensemble")
    _sampling(p)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("neighborhood", help="sample near a reference plan (max-dev defaults to 40)")
    _sampling(p)
    p.set_defaults(func=cmd_neighborhood)

    p = sub.add_parser("tally", help="tally one plan")
    _common(p, "votes", "plan", "districts")
    p.set_defaults(func=cmd_tally)

    p = sub.add_parser("indices", help="place a plan against an ensemble")
    _common(p, "votes", "plan", "ensemble")
    p.set_defaults(func=cmd_indices)

    for name, func, help_ in (("boxplot", cmd_boxplot, "rank-marginal box statistics"),
                              ("ccdf", cmd_ccdf, "complementary CDFs of the indices"),
                              ("seats", cmd_seats, "seat histograms")):
        p = sub.add_parser(name, help=help_)
        _common(p, "votes", "ensemble")
        if name == "seats":
            p.add_argument("--bin-width", type=float, default=0.1)
        p.set_defaults(func=func)

    p = sub.add_parser("enumerate", help="exact distribution on a small graph")
    _common(p, "districts")
    p.add_argument("--config")
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--balance", type=float, help="max relative population deviation")
    p.add_argument("--compactness", choices=("iso", "dispersion"))
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("tune", help="search score weights against the tuning targets")
    _sampling(p)
    p.add_argument("--trial-samples", type=int, default=20)
    p.add_argument("--skip", help="comma-separated targets to skip: population,compactness,minority,county")
    p.set_defaults(func=cmd_tune)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        return 1
    except Exception as exc:  # noqa: BLE001
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
