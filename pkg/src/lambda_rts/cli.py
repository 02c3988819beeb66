"""Command-line entry point: ``lambda-rts {estimate,efficiency,summarize,plotdata}``.

Exit codes: 0 on success, 1 when ``--strict`` finds invalid rows, 2 on
I/O or file-format errors.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from . import panel
from .core import DomainError, ProductionUnit, unit_violations
from .efficiency import Gamma, fdh_gamma_input_efficiency
from .technology import member_global, phi_extrapolation, phi_global

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2

log = logging.getLogger("lambda_rts")


def _period_arg(p: str) -> str | None:
    return None if p == "" else p


def cmd_estimate(args: argparse.Namespace) -> int:
    ing = panel.ingest_csv(args.data)
    if ing.rejections and args.strict:
        for r in ing.rejections:
            print(f"line {r.line}: {r.reason}", file=sys.stderr)
        return EXIT_INVALID
    periods = tuple(_period_arg(p) for p in args.period) if args.period else None
    config = panel.RunConfig(epsilon=args.epsilon, periods=periods)
    run = panel.run_panel(ing.datasets, config, ing.rejections)
    for path in panel.emit_report(run, args.out, args.format):
        print(path)
    if args.plot_data:
        print(panel.emit_plot_data(run, Path(args.out) / "plot_data.csv"))
    return EXIT_OK


def _read_points(path: str, n: int, p: int) -> list[tuple[str, list[float], list[float]]]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        xcols = [c for c in header if c.startswith("x_")]
        ycols = [c for c in header if c.startswith("y_")]
        if len(xcols) != n or len(ycols) != p:
            raise panel.IngestError(f"{path}: expected {n} x_ and {p} y_ columns")
        pts = []
        for i, rec in enumerate(reader, start=1):
            pid = rec.get("id") or rec.get("dmu_id") or str(i)
            pts.append((pid, [float(rec[c]) for c in xcols], [float(rec[c]) for c in ycols]))
    return pts


def cmd_efficiency(args: argparse.Namespace) -> int:
    run = panel.load_run(args.run)
    if not run.datasets:
        raise panel.IngestError(f"{args.run}: point scoring needs a run.json with the input data")
    period = _period_arg(args.period) if args.period is not None else run.periods[0]
    d = run.datasets[period]
    lc = panel.lambdas_for_period(run, period)
    cols = ["id", "phi_global", "phi_lower", "phi_upper", "phi_crs", "phi_nirs", "phi_ndrs", "phi_vrs", "member"]
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(cols)
        for pid, x, y in _read_points(args.points, d.n, d.p):
            problems = unit_violations(ProductionUnit(pid, x, y))
            if problems:
                log.warning("point %s skipped: %s", pid, "; ".join(problems))
                continue
            row = [
                pid,
                phi_global(d, lc, x, y),
                phi_extrapolation(d, lc, "lower", x, y),
                phi_extrapolation(d, lc, "upper", x, y),
            ]
            row += [fdh_gamma_input_efficiency(d, x, y, g) for g in (Gamma.CRS, Gamma.NIRS, Gamma.NDRS, Gamma.VRS)]
            w.writerow([row[0]] + [panel.fmt_number(v) for v in row[1:]] + [int(member_global(d, lc, x, y))])
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


def cmd_summarize(args: argparse.Namespace) -> int:
    run = panel.load_run(args.run)
    windows = None
    if args.window:
        windows = {}
        for spec in args.window:
            start, sep, end = spec.partition(":")
            if not sep:
                start = end = spec
            windows[spec] = panel.window_periods(run.periods, start, end)
    sums = panel.summarize_distribution(run, windows)
    if args.out:
        print(panel.emit_summary(sums, args.out))
    else:
        print("window,n,share_irs,share_drs,share_crs")
        for s in sums:
            print(f"{s.label},{s.n},{panel.fmt_number(s.share_irs)},{panel.fmt_number(s.share_drs)},{panel.fmt_number(s.share_crs)}")
    return EXIT_OK


def cmd_plotdata(args: argparse.Namespace) -> int:
    run = panel.load_run(args.run)
    print(panel.emit_plot_data(run, args.out))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lambda-rts", description="Estimate individual alpha-returns to scale on FDH-type technologies.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    est = sub.add_parser("estimate", help="estimate alpha intervals, classes and scores for a panel CSV")
    est.add_argument("data", help="CSV with dmu_id, optional period, x_* and y_* columns")
    est.add_argument("--out", default=".", help="output directory (default: current)")
    est.add_argument("--format", choices=("csv", "json"), default="csv")
    est.add_argument("--epsilon", type=float, default=1e-6, help="classification tolerance around 1")
    est.add_argument("--strict", action="store_true", help="fail (exit 1) on any invalid row")
    est.add_argument("--period", action="append", help="only run this period (repeatable)")
    est.add_argument("--plot-data", action="store_true", help="also write plot_data.csv")
    est.set_defaults(func=cmd_estimate)

    eff = sub.add_parser("efficiency", help="score arbitrary points against a saved run.json")
    eff.add_argument("run", help="run.json written by 'estimate --format json'")
    eff.add_argument("points", help="CSV with optional id and the run's x_*/y_* columns")
    eff.add_argument("--period", help="period of the run to score against (default: first)")
    eff.add_argument("--out", help="output CSV (default: stdout)")
    eff.set_defaults(func=cmd_efficiency)

    summ = sub.add_parser("summarize", help="IRS/DRS/CRS shares per period or window")
    summ.add_argument("run", help="run.json or report.csv")
    summ.add_argument("--window", action="append", help="START:END period range, inclusive (repeatable)")
    summ.add_argument("--out", help="output CSV (default: stdout)")
    summ.set_defaults(func=cmd_summarize)

    plot = sub.add_parser("plotdata", help="long-format alpha interval table for plotting")
    plot.add_argument("run", help="run.json or report.csv")
    plot.add_argument("--out", default="plot_data.csv")
    plot.set_defaults(func=cmd_plotdata)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (OSError, panel.IngestError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
