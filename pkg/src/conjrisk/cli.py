"""Command-line interface: ``conjrisk <subcommand> ...``.

Exit codes: 0 success, 1 property violation (``theorem-check``), 2 usage or
input error.  Reports are JSON and plot data is comma-separated text; every
float is written with 17 significant digits (``%.16e``) and ``log10(0)`` as
the token ``-inf``, so identical inputs give byte-identical files.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys

import numpy as np

from . import catalog, experiments, montecarlo
from .collision import dilution_curve, pc_max
from .errors import ConjRiskError, DegenerateCovarianceError, DegenerateGeometryError, PropertyViolationError
from .geometry import EncounterFrame

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_INPUT = 2


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------
# serialization


def fmt(value):
    """Text form of a report value: floats as ``%.16e``, non-finite as tokens."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return format(value, ".16e")
    return str(value)


def to_json(value, indent=0):
    """JSON text with fixed float formatting; non-finite floats become strings."""
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {to_json(v, indent + 1)}" for k, v in value.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(value, (list, tuple)):
        if not value:
            return "[]"
        return "[\n" + ",\n".join(pad + to_json(v, indent + 1) for v in value) + "\n" + end + "]"
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        text = fmt(value)
        return text if math.isfinite(float(value)) else json.dumps(text)
    return json.dumps(str(value))


def write_json(path, value):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(to_json(value) + "\n")


def write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(header)
        for row in rows:
            out.writerow([fmt(v) for v in row])


def assessment_dict(a):
    return {
        "frame": {"x1": a.frame.x1, "x2": a.frame.x2, "d1": a.frame.d1, "d2": a.frame.d2, "hbr": a.frame.hbr},
        "psi0": a.psi0,
        "psi_hat": a.psi_hat,
        "pc_foster": a.pc_foster,
        "pc_chan": a.pc_chan,
        "r": a.r,
        "w": a.w,
        "p_obs": a.p_obs,
        "ci": {"lower": a.ci.lower, "upper": a.ci.upper, "level": a.ci.level, "lower_truncated": a.ci.lower_truncated},
    }


def summary_dict(s):
    return {
        "count": s.count,
        "mean": s.mean,
        "min": s.min,
        "max": s.max,
        "quantiles": {f"{q}%": v for q, v in s.quantiles.items()},
        "threshold_counts": {fmt(t): {"count": c, "fraction": f} for t, (c, f) in s.threshold_counts.items()},
    }


# --------------------------------------------------------------------------
# argument checks


def _positive(text):
    value = _finite(text)
    if not value > 0.0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {text}")
    return value


def _finite(text):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not math.isfinite(value):
        raise argparse.ArgumentTypeError(f"must be finite, got {text}")
    return value


def _probability(text):
    value = _finite(text)
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"must be in (0, 1), got {text}")
    return value


def _count(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {text}")
    return value


def _seed(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {text}")
    return value


def _frame(args):
    return EncounterFrame(args.x1, args.x2, args.d1, args.d2, args.hbr)


def _add_frame(p, required=True):
    p.add_argument("--x1", type=_finite, required=required, help="observed position, major axis (km)")
    p.add_argument("--x2", type=_finite, required=required, help="observed position, minor axis (km)")
    p.add_argument("--d1", type=_finite, required=required, help="standard deviation, major axis (km)")
    p.add_argument("--d2", type=_finite, required=required, help="standard deviation, minor axis (km)")
    p.add_argument("--hbr", type=_finite, required=required, help="combined hard-body radius (km)")


# --------------------------------------------------------------------------
# subcommands


def cmd_assess(args, out):
    if args.catalog is not None:
        if args.line is None or args.hbr is None:
            raise UsageError("--catalog needs --line and --hbr")
        parsed = catalog.parse_catalog(args.catalog, _schema(args))
        rejected = {r.line: r.reason for r in parsed.rejects}
        if args.line in rejected:
            raise UsageError(f"line {args.line} was rejected: {rejected[args.line]}")
        matches = [m for m in parsed.messages if m.line == args.line]
        if not matches:
            raise UsageError(f"line {args.line} is not a data row of {args.catalog}")
        message = matches[0]
        frame = catalog.message_frame(message, args.hbr)
    else:
        missing = [n for n in ("x1", "x2", "d1", "d2", "hbr") if getattr(args, n) is None]
        if missing:
            raise UsageError("missing frame parameter(s): " + ", ".join("--" + n for n in missing))
        frame = _frame(args)
    result = experiments.assess(frame, args.psi0, args.level)
    out.write(to_json(assessment_dict(result)) + "\n")
    return EXIT_OK


def _schema(args):
    return catalog.CatalogSchema.from_json(args.schema) if args.schema else catalog.DEFAULT_SCHEMA


def _scale_tag(c):
    return "c" + format(c, "g")


def cmd_batch(args, out):
    parsed = catalog.parse_catalog(args.catalog, _schema(args))
    os.makedirs(args.out, exist_ok=True)
    write_csv(os.path.join(args.out, "rejects.csv"), ["line", "reason"], [(r.line, r.reason) for r in parsed.rejects])
    if not parsed.messages:
        raise catalog.EmptyCatalogError(f"{args.catalog}: no valid messages")
    groups = catalog.group_events(parsed.messages)
    horizon = int(round(args.horizon_hours * catalog.HOUR))
    selected = [(g, catalog.select_decision_epoch(g, horizon)) for g in groups]

    feature_rows, frames, keys = [], [], []
    for group, message in selected:
        key = (group.key[0], group.key[1], catalog.format_timestamp(group.key[2]))
        ident = key + (catalog.format_timestamp(message.creation_time), len(group.messages))
        try:
            frame = catalog.message_frame(message, args.hbr)
        except (DegenerateCovarianceError, DegenerateGeometryError) as exc:
            feature_rows.append(ident + (None,) * (5 + len(catalog.Features.NAMES)) + (str(exc),))
            continue
        feats = catalog.frame_features(frame)
        feature_rows.append(ident + (frame.x1, frame.x2, frame.d1, frame.d2, frame.hbr) + feats.as_tuple() + ("",))
        frames.append(frame)
        keys.append(ident)
    write_csv(
        os.path.join(args.out, "features.csv"),
        ["primary_id", "secondary_id", "event_tca", "creation_time", "messages", "x1", "x2", "d1", "d2", "hbr"]
        + list(catalog.Features.NAMES)
        + ["flag"],
        feature_rows,
    )

    report = {
        "catalog_messages": len(parsed.messages),
        "rejected_rows": len(parsed.rejects),
        "events": len(groups),
        "assessed": len(frames),
        "flagged": len(groups) - len(frames),
        "scales": {},
    }
    for c in args.scale:
        tag = _scale_tag(c)
        scaled_frames = [experiments.scale_covariance(f, c) for f in frames]
        results = experiments.assess_many(scaled_frames, level=args.level, workers=args.workers)
        write_csv(
            os.path.join(args.out, f"assessments_{tag}.csv"),
            ["primary_id", "secondary_id", "event_tca", "creation_time", "messages", "psi_hat", "pc_foster", "pc_chan",
             "r", "p_obs", "ci_lower", "ci_upper", "log10_pc", "log10_p_obs"],
            [
                k + (a.psi_hat, a.pc_foster, a.pc_chan, a.r, a.p_obs, a.ci.lower, a.ci.upper,
                     experiments._log10(a.pc_foster), experiments._log10(a.p_obs))
                for k, a in zip(keys, results)
            ],
        )
        entry = {"confusion": [], "summary_pc": None, "summary_p_obs": None}
        if results:
            entry["summary_pc"] = summary_dict(catalog.summarize([a.pc_foster for a in results], args.threshold))
            entry["summary_p_obs"] = summary_dict(catalog.summarize([a.p_obs for a in results], args.threshold))
            entry["confusion"] = [
                experiments.confusion_matrix(results, alpha, args.pc_threshold).as_dict() for alpha in args.alpha
            ]
        report["scales"][tag] = entry
    write_json(os.path.join(args.out, "report.json"), report)
    out.write(to_json(report) + "\n")
    return EXIT_OK


def cmd_simulate(args, out):
    base = experiments.decaying_timeline(days=args.days, step_hours=args.step_hours, hbr=args.hbr)
    hit, miss = experiments.synthesize_hit_miss(base, args.kappa, args.seed)
    os.makedirs(args.out, exist_ok=True)
    final = {}
    for series in (hit, miss):
        rows = experiments.timeline_report(series)
        write_csv(
            os.path.join(args.out, f"timeline_{series.label}.csv"),
            ["lead_time_hours", "x1", "x2", "d1", "d2", "psi_hat", "log10_pc", "log10_p_obs"],
            [
                (r.lead_time, f.x1, f.x2, f.d1, f.d2, r.psi_hat, r.log10_pc, r.log10_p_obs)
                for r, f in zip(rows, series.frames)
            ],
        )
        last = rows[-1]
        final[series.label] = {"psi_hat": last.psi_hat, "log10_pc": last.log10_pc, "log10_p_obs": last.log10_p_obs}
    report = {"kappa": args.kappa, "seed": args.seed, "epochs": len(base), "final_epoch": final}
    out.write(to_json(report) + "\n")
    return EXIT_OK


def cmd_dilution(args, out):
    frame = _frame(args)
    lo, hi = args.log_c_min, args.log_c_max
    if not lo < hi:
        raise UsageError("--log-c-min must be below --log-c-max")
    scales = np.logspace(lo, hi, args.grid).tolist()
    curve = dilution_curve(frame, scales)
    best = pc_max(frame, (lo, hi), args.grid)
    if args.out:
        write_csv(args.out, ["c", "log10_c", "pc_hat"], [(c, math.log10(c), p) for c, p in curve])
    report = {"c_star": best.c_star, "pc_max": best.pc_max, "on_boundary": best.on_boundary, "points": len(curve)}
    out.write(to_json(report) + "\n")
    return EXIT_OK


def cmd_theorem_check(args, out):
    try:
        report = montecarlo.theorem_sweep(args.configs, args.seed)
        code = EXIT_OK
    except PropertyViolationError as exc:
        report = exc.report
        code = EXIT_VIOLATION
    out.write(to_json(report.as_dict()) + "\n")
    return code


def cmd_calibrate(args, out):
    d1 = args.d1 if args.d1 is not None else args.d
    d2 = args.d2 if args.d2 is not None else args.d
    if d1 is None or d2 is None:
        raise UsageError("give --d or both --d1 and --d2")
    cal = montecarlo.calibration_study(d1, d2, args.psi0, args.lambda_grid, args.replicates, args.seed)
    cov = montecarlo.coverage_study(d1, d2, args.psi0, args.level, args.replicates, args.seed, args.lambda_grid)
    report = {
        "d1": d1,
        "d2": d2,
        "psi0": args.psi0,
        "replicates": cal.replicates,
        "seed": args.seed,
        "ks_statistic": cal.ks_statistic,
        "critical_value_1pct": cal.critical_value,
        "calibrated": cal.calibrated,
        "empirical_quantiles": cal.empirical_quantiles,
        "coverage": {"level": cov.level, "coverage": cov.coverage, "covered": cov.covered},
    }
    out.write(to_json(report) + "\n")
    return EXIT_OK


def cmd_make_catalog(args, out):
    rows = catalog.synthetic_catalog_rows(args.events, args.seed)
    catalog.write_rows(args.out, rows)
    out.write(to_json({"events": args.events, "rows": len(rows) - 1, "path": args.out}) + "\n")
    return EXIT_OK


# --------------------------------------------------------------------------
# parser


def build_parser():
    parser = argparse.ArgumentParser(prog="conjrisk", description="Conjunction risk assessment.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("assess", help="assess one frame or one catalog row (JSON to stdout)")
    _add_frame(p, required=False)
    p.add_argument("--psi0", type=_finite, help="hypothesized miss distance (default: hbr)")
    p.add_argument("--level", type=_probability, default=0.95, help="confidence level")
    p.add_argument("--catalog", help="catalog file; assess the row at --line")
    p.add_argument("--line", type=int, help="1-based line number of the row (header is line 1)")
    p.add_argument("--schema", help="JSON column map for the catalog")
    p.set_defaults(func=cmd_assess)

    p = sub.add_parser("batch", help="run the catalog pipeline")
    p.add_argument("catalog")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--hbr", type=_positive, required=True, help="hard-body radius for rows without one (km)")
    p.add_argument("--alpha", type=_probability, action="append", help="significance level (repeatable)")
    p.add_argument("--scale", type=_positive, action="append", help="covariance scale c (repeatable)")
    p.add_argument("--pc-threshold", type=_probability, default=experiments.DEFAULT_PC_THRESHOLD)
    p.add_argument("--threshold", type=_probability, action="append", help="summary exceedance threshold")
    p.add_argument("--level", type=_probability, default=0.95)
    p.add_argument("--horizon-hours", type=_positive, default=12.0)
    p.add_argument("--schema", help="JSON column map")
    p.add_argument("--workers", type=_count, default=1)
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("simulate", help="hit/miss timeline study")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--kappa", type=_finite, default=experiments.DEFAULT_KAPPA)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--days", type=_positive, default=7.0)
    p.add_argument("--step-hours", type=_positive, default=6.0)
    p.add_argument("--hbr", type=_positive, default=0.02)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("dilution", help="pc_hat against covariance scale")
    _add_frame(p)
    p.add_argument("--log-c-min", type=_finite, default=-6.0)
    p.add_argument("--log-c-max", type=_finite, default=6.0)
    p.add_argument("--grid", type=_count, default=121)
    p.add_argument("--out", help="curve CSV path")
    p.set_defaults(func=cmd_dilution)

    p = sub.add_parser("theorem-check", help="random check of pc_hat <= p_obs")
    p.add_argument("--configs", type=_count, default=10_000)
    p.add_argument("--seed", type=_seed, default=0)
    p.set_defaults(func=cmd_theorem_check)

    p = sub.add_parser("calibrate", help="calibration and interval coverage study")
    p.add_argument("--d", type=_positive, help="isotropic standard deviation (km)")
    p.add_argument("--d1", type=_positive)
    p.add_argument("--d2", type=_positive)
    p.add_argument("--psi0", type=_positive, required=True)
    p.add_argument("--replicates", type=_count, default=10_000)
    p.add_argument("--lambda-grid", type=_count, default=36)
    p.add_argument("--level", type=_probability, default=0.95)
    p.add_argument("--seed", type=_seed, default=0)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("make-catalog", help="write a synthetic catalog")
    p.add_argument("--events", type=int, required=True)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_make_catalog)
    return parser


def main(argv=None, out=None):
    out = out if out is not None else sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    if args.command == "batch":
        args.alpha = args.alpha or [1e-4, 1e-1]
        args.scale = args.scale or [1.0]
        args.threshold = args.threshold or list(catalog.DEFAULT_THRESHOLDS)
    try:
        return args.func(args, out)
    except PropertyViolationError as exc:
        print(f"conjrisk {args.command}: property violation: {exc}", file=sys.stderr)
        return EXIT_VIOLATION
    except (UsageError, ConjRiskError, OSError) as exc:
        print(f"conjrisk {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
