"""Command line entry point: ``arpulab {run,sort-demo,infer-check,constants}``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time

import numpy as np

from .core import ConfigError, Hypothesis, RunSeed, Sample
from .harness import RunConfig, check_thresholds, resolve_workers, run_experiment
from .inference import check_inference_dimension
from .learners.gtnc import GtncConfig
from .oracles import MassartModel, OracleState
from .ordering import ComparisonTable, max_displacement, mle_order

EXIT_OK, EXIT_CONFIG, EXIT_CHECK = 0, 2, 3


def _cmd_run(args) -> int:
    cfg = RunConfig.load(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.trials is not None:
        cfg.trials = args.trials
    workers = resolve_workers(args.parallel)
    summary = run_experiment(cfg, args.out, workers)
    for g in summary["groups"]:
        lo, hi = g["mislabel_trial_wilson"]
        print(
            f"{json.dumps(g['params'], sort_keys=True)}  trials={g['trials']}  "
            f"coverage={g['mean_coverage']:.4f}  mislabel_rate={g['mislabel_trial_rate']:.3f} "
            f"[{lo:.3f}, {hi:.3f}]  queries={g['mean_queries']:.4g}"
        )
    if args.check:
        bad = check_thresholds(cfg, summary["groups"])
        for line in bad:
            print(f"CHECK FAILED {line}", file=sys.stderr)
        if bad:
            return EXIT_CHECK
    return EXIT_OK


def _cmd_sort_demo(args) -> int:
    rs = RunSeed(args.seed or 0)
    rng = rs.rng("sampler")
    v = rng.uniform(-1, 1, args.n)
    sample = Sample(np.arange(args.n, dtype=np.int64), v[:, None])
    oracle = OracleState(MassartModel(args.lam), Hypothesis((1.0,), 0.0), rs.key64("oracle"))
    table = ComparisonTable.from_oracle(oracle, sample)
    t0 = time.perf_counter()
    order = mle_order(table, rs.rng("learner"))
    dt = time.perf_counter() - t0
    truth = np.argsort(v, kind="stable")
    print(
        json.dumps(
            {
                "n": args.n, "lam": args.lam, "method": order.method, "score": order.score,
                "truth_score": int(table.T[truth[None, :], truth[:, None]][np.triu_indices(args.n, 1)].sum()),
                "max_displacement": max_displacement(order, truth), "seconds": round(dt, 3),
            }
        )
    )
    return EXIT_OK


def _cmd_infer_check(args) -> int:
    rs = RunSeed(args.seed or 0)
    rng = rs.rng("harness")
    held = 0
    for _ in range(args.samples):
        w = rng.standard_normal(args.d)
        h = Hypothesis(tuple(w / np.linalg.norm(w)), float(rng.uniform(-0.5, 0.5)))
        X = rng.uniform(-1, 1, (args.points, args.d))
        ok, _ = check_inference_dimension(Sample(np.arange(args.points), X).points(), h)
        held += ok
    print(json.dumps({"samples": args.samples, "points": args.points, "d": args.d, "held": held}))
    return EXIT_OK if held == args.samples else EXIT_CHECK


def _cmd_constants(args) -> int:
    cfg = RunConfig.load(args.config)
    out = []
    for params in cfg.groups():
        lc = cfg.learner_config(params)
        out.append(lc.manifest() if isinstance(lc, GtncConfig) else dataclasses.asdict(lc))
    print(json.dumps(out, indent=2, default=str))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="arpulab", description="Reliable active learning experiments")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment from a config file")
    r.add_argument("--config", required=True)
    r.add_argument("--seed", type=int)
    r.add_argument("--trials", type=int)
    r.add_argument("--out")
    r.add_argument("--parallel", type=int, default=1)
    r.add_argument("--check", action="store_true", help="exit 3 when [check] thresholds fail")
    r.set_defaults(func=_cmd_run)

    s = sub.add_parser("sort-demo", help="noisy sorting on a Massart oracle")
    s.add_argument("--n", type=int, default=200)
    s.add_argument("--lam", type=float, default=0.2)
    s.add_argument("--seed", type=int)
    s.set_defaults(func=_cmd_sort_demo)

    i = sub.add_parser("infer-check", help="inference-dimension verifier on random samples")
    i.add_argument("--samples", type=int, default=100)
    i.add_argument("--points", type=int, default=5)
    i.add_argument("--d", type=int, default=2)
    i.add_argument("--seed", type=int)
    i.set_defaults(func=_cmd_infer_check)

    c = sub.add_parser("constants", help="print derived constants for a config")
    c.add_argument("--config", required=True)
    c.set_defaults(func=_cmd_constants)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
