"""Command line entry point: ``cdlcal {metrics,simulate,sweep,fixture}``."""

from __future__ import annotations

import argparse
import json
import sys
from typing import List, Optional

from . import harness
from .adversary import parse_adversary
from .metrics import ALL_METRICS, compute_report
from .predictor import PredictorConfig, run_algorithm1
from .transcript import Grid, TranscriptError, bucketize, read_transcript, write_transcript


def _csv_list(text: str) -> List[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def _T_list(text: str) -> List[int]:
    """``256,1024`` or an exponent range ``2^8..2^14``."""
    if ".." in text:
        lo, hi = text.split("..")
        a, b = int(lo.split("^")[1]), int(hi.split("^")[1])
        return [2 ** k for k in range(a, b + 1)]
    return [int(x) for x in _csv_list(text)]


def cmd_metrics(args) -> int:
    t = read_transcript(sys.stdin if args.transcript == "-" else args.transcript)
    grid = Grid(args.grid) if args.grid else None
    metrics = _csv_list(args.metrics)
    rep = compute_report(t, grid, metrics)
    print(rep.to_json(witness=args.witness, indent=2))
    return 0


def cmd_simulate(args) -> int:
    cfg = PredictorConfig(T=args.T, m=args.m, eps=args.eps, seed=args.seed)
    adv = parse_adversary(args.adversary, seed=[args.seed, 1], T=args.T)
    tr, trace = run_algorithm1(cfg, adv)
    write_transcript(tr, args.out)
    if args.trace:
        with open(args.trace, "w", newline="") as fh:
            trace.write_csv(fh)
    rep = compute_report(tr, cfg.grid, ("ece", "vcdl", "cdl"))
    summary = {"T": cfg.T, "m": cfg.m, "eps": cfg.eps, "seed": cfg.seed, "adversary": args.adversary,
               "max_h_minus_eps": trace.max_h_excess, **rep.to_dict()}
    print(json.dumps(summary, indent=2))
    return 0


def cmd_sweep(args) -> int:
    def progress(rec):
        if args.verbose:
            print(f"T={rec.T} {rec.adversary} seed={rec.seed} cdl={rec.cdl:.5f} {rec.error}", file=sys.stderr)

    sr = harness.sweep(_T_list(args.T), _csv_list(args.adversaries), range(args.seeds), m=args.m, eps=args.eps,
                       progress=progress)
    harness.write_sweep(sr, args.out_dir)
    report = harness.rate_report(sr)
    print(json.dumps({k: report[k] for k in ("T", "envelope_cdl", "normalized", "slope", "normalized_ratio",
                                             "checks")}, indent=2))
    if args.check and not harness.rate_passed(report):
        return 1
    return 0


def cmd_fixture(args) -> int:
    t = harness.fixture(args.name, T=args.T, eps=args.eps)
    write_transcript(t, sys.stdout if args.out == "-" else args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cdlcal", description="Calibration decision loss metrics and online predictor")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("metrics", help="metric panel for a transcript CSV")
    p.add_argument("transcript", help="t,p,theta CSV, or - for stdin")
    p.add_argument("--grid", type=int, default=None, help="bucket on the grid i/m")
    p.add_argument("--metrics", default=",".join(ALL_METRICS))
    p.add_argument("--witness", action="store_true", help="include the optimal rule and worst kink")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("simulate", help="run the online predictor against an adversary")
    p.add_argument("--T", type=int, required=True)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--adversary", default="iid:0.5", help="iid:<rho>, script:<path>, alternate or greedy")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--trace", default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="rate sweep over T, adversaries and seeds")
    p.add_argument("--T", default="2^8..2^14", help="comma list or 2^a..2^b")
    p.add_argument("--adversaries", default=",".join(harness.DEFAULT_ADVERSARIES))
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--check", action="store_true", help="exit nonzero if a rate check fails")
    p.add_argument("-v", "--verbose", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("fixture", help="write a worked-example transcript")
    p.add_argument("name", choices=sorted(harness.FIXTURES))
    p.add_argument("--T", type=int, default=None)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_fixture)
    return ap


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (TranscriptError, harness.FixtureError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
