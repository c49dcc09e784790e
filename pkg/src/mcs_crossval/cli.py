"""Command-line entry point: ``python -m mcs_crossval <command> ...``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

from .incentives import PAYMENT_FUNCTIONS, IncentiveReport, rate_reputations, read_contributions_csv, revise_payments
from .pacap import read_ratings_csv
from .profiling import build_profile, read_profile_json, read_readings_csv, write_profile_csv, write_profile_json
from .registry import WorkerRegistry
from .reshaping import RatingScale, ReshapedProfile, reshape, tally_ratings
from .sampling import SamplingStrategy
from .simulator import load_spec, run_scenario

log = logging.getLogger("mcs_crossval")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_FAIL = 3


class UsageError(Exception):
    """Bad input or configuration; reported and mapped to exit code 2."""


def _existing(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"no such file: {path}")
    return p


def _parse_scale(text: str) -> RatingScale:
    try:
        return RatingScale.from_scores([int(s) for s in text.split(",")])
    except ValueError as exc:
        raise UsageError(f"bad --scale {text!r}: {exc}") from exc


def cmd_profile(args) -> int:
    readings = read_readings_csv(_existing(args.input))
    profile = build_profile(readings, args.bin_width)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_profile_json(profile, out)
    if args.csv:
        write_profile_csv(profile, args.csv)
    return EXIT_OK


def cmd_simulate(args) -> int:
    spec = load_spec(_existing(args.spec))
    spec = replace(spec, seed=args.seed)
    campaign = spec.campaign
    if args.strategy:
        campaign = replace(campaign, strategy=SamplingStrategy.parse(args.strategy))
    if args.eta is not None:
        campaign = replace(campaign, eta=args.eta)
    spec = replace(spec, campaign=campaign)
    if args.budget_mode:
        spec = replace(spec, budget_mode=True)
    report = run_scenario(spec)
    report.write(args.out)
    summary = report.summary()
    print(f"{summary['outcome']}: {summary['n_effective']} effective ratings, p'/p at truth = {summary['posterior_ratio_at_truth']:.4g}")
    return EXIT_OK if report.primary.campaign.success else EXIT_FAIL


def cmd_reshape(args) -> int:
    profile = read_profile_json(_existing(args.input))
    ratings = read_ratings_csv(_existing(args.ratings))
    scale = _parse_scale(args.scale)
    tally = tally_ratings(ratings, scale, len(profile))
    reshaped = reshape(profile, tally, len(ratings), args.eta)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    reshaped.write_csv(out)
    return EXIT_OK


def cmd_incentives(args) -> int:
    reshaped = ReshapedProfile.read_csv(_existing(args.input))
    contributions = read_contributions_csv(_existing(args.contributions))
    for cid, (_, i) in contributions.items():
        if not 0 <= i < len(reshaped):
            raise UsageError(f"contributor {cid}: value_index {i} outside the profile")
    if args.payment not in PAYMENT_FUNCTIONS:
        raise UsageError(f"unknown payment function {args.payment!r}")
    payments = revise_payments(
        PAYMENT_FUNCTIONS[args.payment], contributions, reshaped.interim, reshaped.posterior, args.budget_mode
    )
    changes = []
    if args.ratings:
        ratings = read_ratings_csv(_existing(args.ratings))
        reputations: dict[str, float] = {}
        if args.registry:
            registry = WorkerRegistry.load(_existing(args.registry))
            reputations = {wid: float(registry.reputation[i]) for i, wid in enumerate(registry.ids)}
        scale = _parse_scale(args.scale)
        changes = rate_reputations(ratings, reshaped.interim, reshaped.posterior, scale.max_score, reputations)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report = IncentiveReport(changes, payments)
    report.write_contributors_csv(out / "incentives_contributors.csv")
    report.write_raters_csv(out / "incentives_raters.csv")
    return EXIT_OK


def cmd_report(args) -> int:
    """Side-by-side posterior columns of every strategy found in a report directory."""
    src = Path(args.input)
    if not src.is_dir():
        raise UsageError(f"no such report directory: {args.input}")
    columns = {}
    for s in SamplingStrategy:
        path = src / f"reshaped_{s.value}.csv"
        if path.is_file():
            columns[s.value] = ReshapedProfile.read_csv(path)
    if not columns:
        raise UsageError(f"{args.input}: no reshaped_<strategy>.csv files found")
    first = next(iter(columns.values()))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["v", "p_interim"] + [f"p_{name}" for name in columns])
        for i in range(len(first)):
            w.writerow([repr(float(first.values[i])), repr(float(first.interim[i]))] + [repr(float(r.posterior[i])) for r in columns.values()])
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mcs-crossval", description="Crowd cross-validation of sensed data.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("profile", help="histogram readings into a profile")
    p.add_argument("--in", dest="input", required=True, help="readings CSV (contributor_id,value)")
    p.add_argument("--bin-width", type=float, required=True)
    p.add_argument("--out", required=True, help="profile JSON")
    p.add_argument("--csv", help="also write the profile as CSV")
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("simulate", help="run a full scenario and write a report directory")
    p.add_argument("--spec", required=True, help="scenario spec JSON")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--strategy", choices=[s.value for s in SamplingStrategy])
    p.add_argument("--eta", type=float)
    p.add_argument("--budget-mode", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("reshape", help="update a profile with collected ratings")
    p.add_argument("--in", dest="input", required=True, help="profile JSON")
    p.add_argument("--ratings", required=True, help="ratings CSV")
    p.add_argument("--out", required=True, help="reshaped CSV")
    p.add_argument("--eta", type=float, default=1.0)
    p.add_argument("--scale", default="-1,0,1", help="comma-separated rating scores")
    p.set_defaults(func=cmd_reshape)

    p = sub.add_parser("incentives", help="revise payments and reputations from a reshaped profile")
    p.add_argument("--in", dest="input", required=True, help="reshaped CSV")
    p.add_argument("--contributions", required=True, help="contributor_id,value_index[,quality] CSV")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--ratings", help="ratings CSV, for rater reputation changes")
    p.add_argument("--registry", help="worker registry JSON with current reputations")
    p.add_argument("--payment", default="linear", choices=sorted(PAYMENT_FUNCTIONS))
    p.add_argument("--budget-mode", action="store_true")
    p.add_argument("--scale", default="-1,0,1")
    p.set_defaults(func=cmd_incentives)

    p = sub.add_parser("report", help="per-strategy posterior table from a report directory")
    p.add_argument("--in", dest="input", required=True, help="report directory written by simulate")
    p.add_argument("--out", required=True, help="table CSV")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except json.JSONDecodeError as exc:
        print(f"error: malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}", file=sys.stderr)
    except FileNotFoundError as exc:
        print(f"error: no such file: {exc.filename}", file=sys.stderr)
    except (UsageError, ValueError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
