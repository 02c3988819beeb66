"""Panel ingestion, per-period estimation runs and report emission."""

from __future__ import annotations

import csv
import json
import logging
import math
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .core import (
    INF,
    Dataset,
    ProductionUnit,
    input_ratio_matrix,
    log_ratio_matrices,
    ratio_matrix,
    unit_violations,
    validate_dataset,
)
from .efficiency import Gamma, gamma_scores
from .rts import AlphaInterval, LogRatioRow, RtsClass, envelope, estimate_row
from .technology import from_estimates, gauge_from_logs, lambda_star

log = logging.getLogger(__name__)

THREADS_ENV = "LAMBDA_RTS_THREADS"
REPORT_COLUMNS = [
    "dmu_id",
    "alpha_lo",
    "alpha_hi",
    "rts_class",
    "lambda_star",
    "phi_union",
    "phi_global",
    "phi_vrs",
    "phi_crs",
]
PLOT_COLUMNS = ["period", "dmu_id", "alpha_lo", "alpha_hi", "class"]


class IngestError(ValueError):
    pass


def natural_key(s: str | None) -> tuple:
    """Sort key ordering embedded integers numerically ("2" < "10")."""
    if s is None:
        return ()
    return tuple((0, int(t), "") if t.isdigit() else (1, 0, t) for t in re.findall(r"\d+|\D+", s))


def fmt_number(v: float) -> str:
    """Table formatting: 9 significant digits, ``inf`` for infinity."""
    if v == INF:
        return "inf"
    if v == -INF:
        return "-inf"
    if v == 0:
        return "0"
    return f"{v:.9g}"


def parse_number(s: str) -> float:
    return float(s)


# ------------------------------------------------------------------ ingestion


@dataclass(frozen=True)
class Rejection:
    period: str | None
    dmu_id: str
    line: int
    reason: str


@dataclass
class Ingested:
    datasets: dict[str | None, Dataset]
    rejections: list[Rejection]
    rows_in: dict[str | None, int]


def ingest_csv(path: str | os.PathLike) -> Ingested:
    """Read a panel CSV into one validated :class:`Dataset` per period.

    Columns: ``dmu_id``, optional ``period``, inputs ``x_*`` and outputs
    ``y_*``. Invalid rows are logged and skipped; they appear in
    ``rejections``. Without a period column the file is one cross-section
    (period ``None``).
    """
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        if "dmu_id" not in header:
            raise IngestError(f"{path}: missing dmu_id column")
        xcols = [c for c in header if c.startswith("x_")]
        ycols = [c for c in header if c.startswith("y_")]
        if not xcols or not ycols:
            raise IngestError(f"{path}: need at least one x_ and one y_ column")
        has_period = "period" in header
        units: dict[str | None, list[ProductionUnit]] = {}
        seen: dict[str | None, set[str]] = {}
        rows_in: dict[str | None, int] = {}
        rejections: list[Rejection] = []
        for line, rec in enumerate(reader, start=2):
            period = (rec.get("period") or "").strip() if has_period else None
            dmu = (rec.get("dmu_id") or "").strip()
            rows_in[period] = rows_in.get(period, 0) + 1

            def reject(reason: str) -> None:
                log.warning("line %d (dmu %r, period %r) rejected: %s", line, dmu, period, reason)
                rejections.append(Rejection(period, dmu, line, reason))

            if not dmu:
                reject("empty dmu_id")
                continue
            try:
                x = [float(rec[c]) for c in xcols]
                y = [float(rec[c]) for c in ycols]
            except (TypeError, ValueError):
                reject("non-numeric quantity")
                continue
            if dmu in seen.setdefault(period, set()):
                reject(f"duplicate dmu_id {dmu!r} in period {period!r}")
                continue
            unit = ProductionUnit(dmu, x, y, period)
            problems = unit_violations(unit)
            if problems:
                reject("; ".join(problems))
                continue
            seen[period].add(dmu)
            units.setdefault(period, []).append(unit)
    datasets = {p: validate_dataset(us) for p, us in units.items()}
    return Ingested(datasets, rejections, rows_in)


# ------------------------------------------------------------------- pipeline


@dataclass(frozen=True)
class RunConfig:
    epsilon: float = 1e-6
    periods: tuple[str | None, ...] | None = None
    orientation: str = "input"


@dataclass(frozen=True)
class DmuResult:
    period: str | None
    dmu_id: str
    lambda_star: float
    beta_lo: float
    beta_hi: float
    beta_star: float
    alpha_lo: float
    alpha_hi: float
    rts_class: RtsClass
    phi_union: float
    phi_global: float
    phi_vrs: float
    phi_crs: float

    @property
    def alpha(self) -> AlphaInterval:
        return AlphaInterval(self.alpha_lo, self.alpha_hi)


@dataclass
class PanelRun:
    config: RunConfig
    results: list[DmuResult]
    datasets: dict[str | None, Dataset] = field(default_factory=dict)
    rejections: list[Rejection] = field(default_factory=list)

    @property
    def periods(self) -> list[str | None]:
        return sorted({r.period for r in self.results}, key=natural_key)

    def for_period(self, period: str | None) -> list[DmuResult]:
        return [r for r in self.results if r.period == period]


def thread_cap(default: int | None = None) -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            log.warning("ignoring non-integer %s=%r", THREADS_ENV, raw)
    return default or (os.cpu_count() or 1)


def run_period(d: Dataset, period: str | None, eps: float) -> list[DmuResult]:
    """Solve, bound, classify and score every unit of one cross-section."""
    F, G = log_ratio_matrices(d)
    estimates = [estimate_row(LogRatioRow(j, F[j], G[j]), eps) for j in range(d.J)]
    lc = from_estimates(estimates)
    Ry = ratio_matrix(d.Y, d.Y)
    Rx = input_ratio_matrix(d.X)
    np.fill_diagonal(Ry, 1.0)
    np.fill_diagonal(Rx, 1.0)
    vrs = gamma_scores(Ry, Rx, Gamma.VRS).min(axis=1)
    crs = gamma_scores(Ry, Rx, Gamma.CRS).min(axis=1)
    out = []
    for j, e in enumerate(estimates):
        s = e.solver
        out.append(
            DmuResult(
                period=period,
                dmu_id=d.units[j].id,
                lambda_star=s.lambda_star,
                beta_lo=e.beta.lo,
                beta_hi=e.beta.hi,
                beta_star=s.beta_star,
                alpha_lo=e.alpha.lo,
                alpha_hi=e.alpha.hi,
                rts_class=e.rts,
                phi_union=math.exp(envelope(F[j], G[j], s.beta_star)),
                phi_global=gauge_from_logs(F[j], G[j], lc.beta_union),
                phi_vrs=float(vrs[j]),
                phi_crs=float(crs[j]),
            )
        )
    return out


def run_panel(
    datasets: Mapping[str | None, Dataset],
    config: RunConfig = RunConfig(),
    rejections: Sequence[Rejection] = (),
    threads: int | None = None,
) -> PanelRun:
    """Run the full pipeline on each period; output order is deterministic."""
    periods = sorted(datasets, key=natural_key)
    if config.periods is not None:
        wanted = set(config.periods)
        periods = [p for p in periods if p in wanted]
    workers = min(threads or thread_cap(), max(1, len(periods)))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(lambda p: run_period(datasets[p], p, config.epsilon), periods))
    else:
        chunks = [run_period(datasets[p], p, config.epsilon) for p in periods]
    results = [r for chunk in chunks for r in chunk]
    kept = {p: datasets[p] for p in periods}
    rej = [r for r in rejections if config.periods is None or r.period in set(config.periods)]
    return PanelRun(config, results, kept, list(rej))


# -------------------------------------------------------------- serialization


def _enc(v):
    if isinstance(v, float) and math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def _dec(v):
    if v in ("inf", "-inf"):
        return float(v)
    return v


_FLOAT_FIELDS = frozenset(
    ("lambda_star", "beta_lo", "beta_hi", "beta_star", "alpha_lo", "alpha_hi", "phi_union", "phi_global", "phi_vrs", "phi_crs")
)


def run_to_dict(run: PanelRun) -> dict:
    results = []
    for r in run.results:
        rec = {k: _enc(v) for k, v in asdict(r).items()}
        rec["rts_class"] = r.rts_class.value
        results.append(rec)
    periods = []
    for p in sorted(run.datasets, key=natural_key):
        units = [{"id": u.id, "x": list(u.x), "y": list(u.y)} for u in run.datasets[p].units]
        periods.append({"period": p, "units": units})
    return {
        "format": "lambda-rts-run",
        "version": 1,
        "config": {
            "epsilon": run.config.epsilon,
            "periods": None if run.config.periods is None else list(run.config.periods),
            "orientation": run.config.orientation,
        },
        "datasets": periods,
        "results": results,
        "rejections": [asdict(r) for r in run.rejections],
    }


def run_from_dict(doc: dict) -> PanelRun:
    cfg = doc["config"]
    config = RunConfig(
        epsilon=cfg["epsilon"],
        periods=None if cfg["periods"] is None else tuple(cfg["periods"]),
        orientation=cfg.get("orientation", "input"),
    )
    datasets = {}
    for block in doc["datasets"]:
        p = block["period"]
        datasets[p] = validate_dataset(ProductionUnit(u["id"], u["x"], u["y"], p) for u in block["units"])
    results = []
    for rec in doc["results"]:
        rec = {k: (_dec(v) if k in _FLOAT_FIELDS else v) for k, v in rec.items()}
        rec["rts_class"] = RtsClass(rec["rts_class"])
        results.append(DmuResult(**rec))
    rejections = [Rejection(**r) for r in doc.get("rejections", [])]
    return PanelRun(config, results, datasets, rejections)


def _has_periods(run: PanelRun) -> bool:
    return any(r.period is not None for r in run.results)


def report_rows(run: PanelRun) -> tuple[list[str], list[list[str]]]:
    cols = (["period"] if _has_periods(run) else []) + REPORT_COLUMNS
    rows = []
    for r in run.results:
        row = [] if "period" not in cols else [r.period or ""]
        row += [
            r.dmu_id,
            fmt_number(r.alpha_lo),
            fmt_number(r.alpha_hi),
            r.rts_class.value,
            fmt_number(r.lambda_star),
            fmt_number(r.phi_union),
            fmt_number(r.phi_global),
            fmt_number(r.phi_vrs),
            fmt_number(r.phi_crs),
        ]
        rows.append(row)
    return cols, rows


def emit_report(run: PanelRun, out_dir: str | os.PathLike, fmt: str = "csv") -> list[Path]:
    """Write the run as ``report.csv`` (table) or ``run.json`` (complete run).

    The CSV table holds one row per unit and period, with a leading
    ``period`` column when the panel has periods. JSON keeps full float
    precision and the input data so the run can be reloaded and reused.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if fmt == "csv":
        path = out / "report.csv"
        cols, rows = report_rows(run)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            w.writerows(rows)
        return [path]
    if fmt == "json":
        path = out / "run.json"
        with open(path, "w") as fh:
            json.dump(run_to_dict(run), fh, indent=1, allow_nan=False)
            fh.write("\n")
        return [path]
    raise ValueError(f"unknown report format {fmt!r}")


def load_report_csv(path: str | os.PathLike) -> list[dict]:
    """Parse a ``report.csv`` back into typed records."""
    with open(path, newline="") as fh:
        out = []
        for rec in csv.DictReader(fh):
            item = {
                "period": rec.get("period") or None,
                "dmu_id": rec["dmu_id"],
                "rts_class": RtsClass(rec["rts_class"]),
            }
            for c in REPORT_COLUMNS:
                if c not in ("dmu_id", "rts_class"):
                    item[c] = parse_number(rec[c])
            out.append(item)
    return out


def load_run(path: str | os.PathLike) -> PanelRun:
    """Load a run from ``run.json`` or, with reduced content, a ``report.csv``."""
    path = Path(path)
    if path.is_dir():
        path = path / "run.json" if (path / "run.json").exists() else path / "report.csv"
    if path.suffix == ".json":
        with open(path) as fh:
            return run_from_dict(json.load(fh))
    results = []
    for rec in load_report_csv(path):
        lo, hi = rec["alpha_lo"], rec["alpha_hi"]
        results.append(
            DmuResult(
                period=rec["period"],
                dmu_id=rec["dmu_id"],
                lambda_star=rec["lambda_star"],
                beta_lo=1.0 / hi if hi else INF,
                beta_hi=1.0 / lo if lo else INF,
                beta_star=math.nan,
                alpha_lo=lo,
                alpha_hi=hi,
                rts_class=rec["rts_class"],
                phi_union=rec["phi_union"],
                phi_global=rec["phi_global"],
                phi_vrs=rec["phi_vrs"],
                phi_crs=rec["phi_crs"],
            )
        )
    return PanelRun(RunConfig(), results)


# ------------------------------------------------------------------ summaries


@dataclass(frozen=True)
class DistributionSummary:
    label: str
    n: int
    share_irs: float
    share_drs: float
    share_crs: float


def window_periods(periods: Iterable[str | None], start: str, end: str) -> list[str | None]:
    """Periods between ``start`` and ``end`` inclusive in natural order."""
    lo, hi = natural_key(start), natural_key(end)
    return [p for p in periods if lo <= natural_key(p) <= hi]


def summarize_distribution(
    run: PanelRun, windows: Mapping[str, Sequence[str | None]] | None = None
) -> list[DistributionSummary]:
    """Shares of IRS / DRS / CRS-not-rejected units per period or per window."""
    if windows is None:
        windows = {("" if p is None else p): [p] for p in run.periods}
    out = []
    for label, members in windows.items():
        members = set(members)
        classes = [r.rts_class for r in run.results if r.period in members]
        if not classes:
            raise ValueError(f"window {label!r} contains no results")
        n = len(classes)
        irs = sum(c is RtsClass.IRS for c in classes)
        drs = sum(c is RtsClass.DRS for c in classes)
        out.append(DistributionSummary(label, n, irs / n, drs / n, (n - irs - drs) / n))
    return out


def emit_summary(summaries: Sequence[DistributionSummary], path: str | os.PathLike) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["window", "n", "share_irs", "share_drs", "share_crs"])
        for s in summaries:
            w.writerow([s.label, s.n, fmt_number(s.share_irs), fmt_number(s.share_drs), fmt_number(s.share_crs)])
    return path


def emit_plot_data(run: PanelRun, path: str | os.PathLike) -> Path:
    """Long-format interval table for external plotting, sorted by unit then period."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = sorted(run.results, key=lambda r: (natural_key(r.dmu_id), natural_key(r.period)))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PLOT_COLUMNS)
        for r in rows:
            w.writerow([r.period or "", r.dmu_id, fmt_number(r.alpha_lo), fmt_number(r.alpha_hi), r.rts_class.value])
    return path


# ------------------------------------------------------------- point scoring


def lambdas_for_period(run: PanelRun, period: str | None):
    recs = run.for_period(period)
    if not recs:
        raise ValueError(f"run has no results for period {period!r}")
    return lambda_star({i: r.alpha for i, r in enumerate(recs)})
