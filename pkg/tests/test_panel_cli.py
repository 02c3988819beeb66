import csv
import json
import math

import numpy as np
import pytest

from lambda_rts import cli, panel
from lambda_rts.core import INF, ProductionUnit, validate_dataset
from lambda_rts.panel import (
    DmuResult,
    PanelRun,
    RunConfig,
    emit_plot_data,
    emit_report,
    fmt_number,
    ingest_csv,
    load_report_csv,
    load_run,
    parse_number,
    run_from_dict,
    run_panel,
    run_to_dict,
    summarize_distribution,
    thread_cap,
    window_periods,
)
from lambda_rts.rts import RtsClass

EX1_CSV = "dmu_id,x_1,y_1\n1,1,1\n2,4,2\n3,2.5,1.5\n4,3,5\n"


def write(path, text):
    path.write_text(text)
    return path


def panel_csv(path, periods=3, units=6, seed=0, extra=""):
    rng = np.random.default_rng(seed)
    lines = ["period,dmu_id,x_1,x_2,y_1"]
    for t in range(periods):
        for i in range(units):
            x = rng.uniform(1, 5, 2)
            y = (x[0] * x[1]) ** rng.uniform(0.3, 0.8)
            lines.append(f"{2000 + t},u{i},{float(x[0])!r},{float(x[1])!r},{float(y)!r}")
    return write(path, "\n".join(lines) + "\n" + extra)


def test_fmt_and_parse_numbers():
    assert fmt_number(INF) == "inf"
    assert fmt_number(0.0) == "0"
    assert fmt_number(math.log(5) / math.log(3)) == "1.46497352"
    assert parse_number("inf") == INF
    assert parse_number("1.46497352") == 1.46497352


def test_ingest_example1(tmp_path):
    ing = ingest_csv(write(tmp_path / "ex1.csv", EX1_CSV))
    assert list(ing.datasets) == [None]
    assert ing.datasets[None].J == 4
    assert ing.rejections == []


def test_ingest_rejects_bad_rows(tmp_path):
    text = EX1_CSV + "5,-1,2\n6,abc,1\n,1,1\n2,9,9\n7,0,1\n"
    ing = ingest_csv(write(tmp_path / "bad.csv", text))
    assert ing.datasets[None].J == 4
    assert [r.line for r in ing.rejections] == [6, 7, 8, 9, 10]
    assert "negative" in ing.rejections[0].reason
    assert "duplicate" in ing.rejections[3].reason


def test_ingest_schema_errors(tmp_path):
    with pytest.raises(panel.IngestError):
        ingest_csv(write(tmp_path / "a.csv", "dmu_id,x_1\n1,1\n"))
    with pytest.raises(panel.IngestError):
        ingest_csv(write(tmp_path / "b.csv", "id,x_1,y_1\n1,1,1\n"))
    with pytest.raises(OSError):
        ingest_csv(tmp_path / "missing.csv")


def test_conservation(tmp_path):
    path = panel_csv(tmp_path / "p.csv", extra="2001,bad,-1,1,1\n2001,u0,1,1,1\n")
    ing = ingest_csv(path)
    run = run_panel(ing.datasets, RunConfig(), ing.rejections)
    for p, n_in in ing.rows_in.items():
        out = len(run.for_period(p))
        rej = sum(r.period == p for r in run.rejections)
        assert n_in == out + rej
    assert ing.rows_in["2001"] == 8


def test_example1_report_row(tmp_path):
    ing = ingest_csv(write(tmp_path / "ex1.csv", EX1_CSV))
    run = run_panel(ing.datasets)
    (path,) = emit_report(run, tmp_path / "out")
    rows = list(csv.reader(path.open()))
    assert rows[0] == panel.REPORT_COLUMNS
    assert rows[1][:7] == ["1", "1.46497352", "inf", "IRS", "0", "1", "1"]
    assert rows[2][1] == rows[2][2] and rows[3][1] == rows[3][2]
    assert rows[4][:4] == ["4", "0", "1.46497352", "CRS"]
    assert len(rows) == 5


def test_empty_period_set():
    run = run_panel({})
    assert run.results == [] and run.periods == []


def test_period_filter(tmp_path):
    ing = ingest_csv(panel_csv(tmp_path / "p.csv"))
    run = run_panel(ing.datasets, RunConfig(periods=("2001",)))
    assert run.periods == ["2001"]


def test_json_round_trip_bit_exact(tmp_path):
    ing = ingest_csv(panel_csv(tmp_path / "p.csv"))
    run = run_panel(ing.datasets, RunConfig(), ing.rejections)
    assert len(run.results) == 18
    (path,) = emit_report(run, tmp_path / "out", "json")
    back = load_run(path)
    assert back.results == run.results
    assert back.config == run.config
    assert {p: d.units for p, d in back.datasets.items()} == {p: d.units for p, d in run.datasets.items()}
    assert run_to_dict(back) == run_to_dict(run)


def test_json_keeps_string_ids():
    d = validate_dataset([ProductionUnit("inf", (1.0,), (1.0,)), ProductionUnit("2", (2.0,), (1.0,))])
    run = run_panel({None: d})
    back = run_from_dict(json.loads(json.dumps(run_to_dict(run))))
    assert back.results[0].dmu_id == "inf"


def test_csv_round_trip_to_nine_digits(tmp_path):
    ing = ingest_csv(panel_csv(tmp_path / "p.csv"))
    run = run_panel(ing.datasets)
    (path,) = emit_report(run, tmp_path / "out")
    recs = load_report_csv(path)
    assert len(recs) == len(run.results) == 18
    for rec, r in zip(recs, run.results):
        assert rec["dmu_id"] == r.dmu_id and rec["period"] == r.period
        assert rec["rts_class"] is r.rts_class
        for c in ("alpha_lo", "alpha_hi", "lambda_star", "phi_union", "phi_global", "phi_vrs", "phi_crs"):
            assert rec[c] == pytest.approx(getattr(r, c), rel=1e-8, abs=1e-300)
    again = tmp_path / "again"
    emit_report(load_run(path), again)
    assert (again / "report.csv").read_bytes() == path.read_bytes()


def test_deterministic_reports(tmp_path):
    path = panel_csv(tmp_path / "p.csv", periods=4)
    outs = []
    for i, threads in enumerate((1, 4)):
        ing = ingest_csv(path)
        run = run_panel(ing.datasets, RunConfig(), ing.rejections, threads=threads)
        emit_report(run, tmp_path / f"o{i}", "csv")
        emit_report(run, tmp_path / f"o{i}", "json")
        outs.append(((tmp_path / f"o{i}" / "report.csv").read_bytes(), (tmp_path / f"o{i}" / "run.json").read_bytes()))
    assert outs[0] == outs[1]


def test_thread_cap_env(monkeypatch):
    monkeypatch.setenv(panel.THREADS_ENV, "3")
    assert thread_cap() == 3
    monkeypatch.setenv(panel.THREADS_ENV, "zero")
    assert thread_cap(5) == 5


def _fake_run(classes_by_period):
    results = []
    for p, classes in classes_by_period.items():
        for i, c in enumerate(classes):
            results.append(DmuResult(p, f"d{i}", 0.0, 0.0, INF, 0.0, 0.0, INF, c, 1.0, 1.0, 1.0, 1.0))
    return PanelRun(RunConfig(), results)


def test_summary_shares():
    I, D, C = RtsClass.IRS, RtsClass.DRS, RtsClass.CRS_NOT_REJECTED
    (s,) = summarize_distribution(_fake_run({"1": [I, I, D, C]}))
    assert (s.share_irs, s.share_drs, s.share_crs) == (0.5, 0.25, 0.25)
    (s,) = summarize_distribution(_fake_run({"1": [C, C, C]}))
    assert (s.share_irs, s.share_drs, s.share_crs) == (0, 0, 1)


def test_two_window_split():
    I, D, C = RtsClass.IRS, RtsClass.DRS, RtsClass.CRS_NOT_REJECTED
    run = _fake_run({"1987": [I, I], "2002": [I, D], "2003": [D, C], "2018": [C, C]})
    windows = {
        "1987-2002": window_periods(run.periods, "1987", "2002"),
        "2003-2018": window_periods(run.periods, "2003", "2018"),
    }
    early, late = summarize_distribution(run, windows)
    assert (early.n, early.share_irs, early.share_drs) == (4, 0.75, 0.25)
    assert (late.n, late.share_drs, late.share_crs) == (4, 0.25, 0.75)
    with pytest.raises(ValueError):
        summarize_distribution(run, {"none": window_periods(run.periods, "1990", "1999")})


def test_all_crs_synthetic_panel():
    # y = x on a line: every unit is consistent with alpha = 1
    d = validate_dataset([ProductionUnit(str(i), (float(i),), (float(i),)) for i in range(1, 8)])
    run = run_panel({None: d})
    (s,) = summarize_distribution(run)
    assert s.share_crs == 1.0


def test_plot_data_sorted_and_inf(tmp_path):
    ing = ingest_csv(panel_csv(tmp_path / "p.csv", periods=3, units=12))
    run = run_panel(ing.datasets)
    rows = list(csv.reader(emit_plot_data(run, tmp_path / "plot.csv").open()))
    assert rows[0] == panel.PLOT_COLUMNS
    keys = [(r[1], r[0]) for r in rows[1:]]
    assert keys[:3] == [("u0", "2000"), ("u0", "2001"), ("u0", "2002")]
    assert [k[0] for k in keys].index("u10") > [k[0] for k in keys].index("u2")
    assert any("inf" in (r[2], r[3]) for r in rows[1:])


def test_plot_data_example1(tmp_path):
    ing = ingest_csv(write(tmp_path / "ex1.csv", EX1_CSV))
    rows = list(csv.reader(emit_plot_data(run_panel(ing.datasets), tmp_path / "plot.csv").open()))
    assert len(rows) == 5
    assert rows[1] == ["", "1", "1.46497352", "inf", "IRS"]


# CLI ------------------------------------------------------------------------


def test_cli_estimate_and_efficiency(tmp_path, capsys):
    data = write(tmp_path / "ex1.csv", EX1_CSV)
    out = tmp_path / "out"
    assert cli.main(["estimate", str(data), "--out", str(out), "--format", "json", "--plot-data"]) == 0
    assert (out / "run.json").exists() and (out / "plot_data.csv").exists()
    pts = write(tmp_path / "pts.csv", "id,x_1,y_1\np,4,2\nq,-1,1\n")
    res = tmp_path / "scores.csv"
    assert cli.main(["efficiency", str(out / "run.json"), str(pts), "--out", str(res)]) == 0
    rows = list(csv.DictReader(res.open()))
    assert len(rows) == 1
    assert rows[0]["id"] == "p"
    assert float(rows[0]["phi_global"]) == pytest.approx(0.25 * 2 ** (math.log(3) / math.log(5)), rel=1e-8)
    assert (rows[0]["phi_crs"], rows[0]["phi_ndrs"], rows[0]["phi_vrs"]) == ("0.3", "0.5", "0.75")
    assert rows[0]["member"] == "1"


def test_cli_strict_exit_code(tmp_path):
    data = write(tmp_path / "bad.csv", EX1_CSV + "5,-1,1\n")
    assert cli.main(["estimate", str(data), "--out", str(tmp_path / "o"), "--strict"]) == 1
    assert cli.main(["estimate", str(data), "--out", str(tmp_path / "o")]) == 0


def test_cli_io_errors(tmp_path):
    assert cli.main(["estimate", str(tmp_path / "nope.csv")]) == 2
    bad = write(tmp_path / "bad.csv", "a,b\n1,2\n")
    assert cli.main(["estimate", str(bad)]) == 2
    blocker = write(tmp_path / "file", "")
    assert cli.main(["estimate", str(write(tmp_path / "ex1.csv", EX1_CSV)), "--out", str(blocker / "sub")]) == 2


def test_cli_summarize_and_plotdata(tmp_path, capsys):
    data = panel_csv(tmp_path / "p.csv", periods=4)
    out = tmp_path / "out"
    assert cli.main(["estimate", str(data), "--out", str(out)]) == 0
    capsys.readouterr()
    assert cli.main(["summarize", str(out / "report.csv"), "--window", "2000:2001", "--window", "2002:2003"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "window,n,share_irs,share_drs,share_crs"
    assert [ln.split(",")[:2] for ln in lines[1:]] == [["2000:2001", "12"], ["2002:2003", "12"]]
    for ln in lines[1:]:
        # printed at nine significant digits
        assert sum(float(v) for v in ln.split(",")[2:]) == pytest.approx(1.0, abs=1e-8)
    assert cli.main(["summarize", str(out), "--window", "1990:1991"]) == 1
    plot = tmp_path / "plot.csv"
    assert cli.main(["plotdata", str(out / "report.csv"), "--out", str(plot)]) == 0
    assert len(plot.read_text().splitlines()) == 1 + 4 * 6


def test_cli_efficiency_needs_json(tmp_path):
    data = write(tmp_path / "ex1.csv", EX1_CSV)
    assert cli.main(["estimate", str(data), "--out", str(tmp_path / "o")]) == 0
    pts = write(tmp_path / "pts.csv", "x_1,y_1\n4,2\n")
    assert cli.main(["efficiency", str(tmp_path / "o" / "report.csv"), str(pts)]) == 2
