"""Checks the plotted data layer against series derived straight from the
CSVs with the csv module, so a drift anywhere in the pipeline (parsing,
bucketing, ordering, labeling) shows up as a data mismatch, not a pixel
diff. Rendering itself is covered by byte-comparing repeated outputs."""

import csv
import statistics
import subprocess
import sys
from pathlib import Path

import pytest

from figgen import FiggenError, FigureSpec, build_figure, render
from figgen.figures import TRACE_COLUMNS

HEADER_LINE = "flow_id,t_us,rtt_us,cwnd_seg,inflight_seg,mode,delivered_cum_seg,event"


# -- independent series derivations (csv module only, no figgen code) -------

def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def derive_cdf(path, warmup_us):
    samples = sorted(int(r["rtt_us"]) for r in read_rows(path)
                     if int(r["t_us"]) > warmup_us)
    n = len(samples)
    return [s / 1000.0 for s in samples], [(i + 1) / n for i in range(n)]


def derive_rates(path, bucket_us, mss_bytes):
    rows = read_rows(path)
    horizon = max(int(r["t_us"]) for r in rows)
    n_buckets = -(-horizon // bucket_us)
    per_flow = {}
    prev_cum = {}
    for r in rows:
        fid = int(r["flow_id"])
        deltas = per_flow.setdefault(fid, [0] * n_buckets)
        cum = int(r["delivered_cum_seg"])
        deltas[(int(r["t_us"]) - 1) // bucket_us] += cum - prev_cum.get(fid, 0)
        prev_cum[fid] = cum
    out = {}
    for fid, deltas in per_flow.items():
        xs = [(k + 1) * bucket_us / 1e6 for k in range(n_buckets)]
        ys = [deltas[k] * mss_bytes * 8 / bucket_us for k in range(n_buckets)]
        out[fid] = (xs, ys)
    return out


def derive_rtts(path):
    out = {}
    for r in read_rows(path):
        xs, ys = out.setdefault(int(r["flow_id"]), ([], []))
        xs.append(int(r["t_us"]) / 1e6)
        ys.append(int(r["rtt_us"]) / 1000.0)
    return out


def line_data(line):
    return [float(v) for v in line.get_xdata()], [float(v) for v in line.get_ydata()]


# -- figure data layer -------------------------------------------------------

def test_cdf_panel_four_algorithms(cdf_inputs, tmp_path):
    spec = FigureSpec(kind="cdf_panel", inputs=tuple(cdf_inputs),
                      output=tmp_path / "cdf.png", warmup_us=5_000_000)
    fig = build_figure(spec)
    lines = fig.axes[0].get_lines()
    assert [ln.get_label() for ln in lines] == [
        "netem_1flow", "netem_1flow_reno", "netem_1flow_vegas", "netem_1flow_bbr"]
    for line, path in zip(lines, cdf_inputs):
        xs, ys = line_data(line)
        want_x, want_y = derive_cdf(path, 5_000_000)
        assert xs == want_x and ys == want_y
    # CDFs are nondecreasing and end at 1
    for line in lines:
        _, ys = line_data(line)
        assert ys == sorted(ys) and ys[-1] == 1.0


def test_cdf_of_constant_rtt_is_a_vertical_step(tmp_path):
    path = tmp_path / "flat.csv"
    rows = [f"0,{1000 * (i + 1)},30000,10,5,FIXED,{i + 1},ack" for i in range(5)]
    path.write_text(HEADER_LINE + "\n" + "\n".join(rows) + "\n")
    spec = FigureSpec(kind="cdf_panel", inputs=(path,), output=tmp_path / "f.png")
    (line,) = build_figure(spec).axes[0].get_lines()
    xs, ys = line_data(line)
    assert xs == [30.0] * 5
    assert ys == [0.2, 0.4, 0.6, 0.8, 1.0]


def test_rate_timeseries_shows_flow1_arriving_at_10s(diff_rtt_csv, tmp_path):
    spec = FigureSpec(kind="timeseries_rate", inputs=(diff_rtt_csv,),
                      output=tmp_path / "rate.png")
    lines = build_figure(spec).axes[0].get_lines()
    assert [ln.get_label() for ln in lines] == ["flow 0", "flow 1"]
    want = derive_rates(diff_rtt_csv, 100_000, 1500)
    for fid, line in enumerate(lines):
        xs, ys = line_data(line)
        assert (xs, ys) == want[fid]
    xs1, ys1 = line_data(lines[1])
    first_active = next(x for x, y in zip(xs1, ys1) if y > 0)
    assert all(y == 0 for x, y in zip(xs1, ys1) if x <= 10.0)
    assert 10.0 < first_active <= 10.3
    xs0, ys0 = line_data(lines[0])
    assert any(y > 0 for x, y in zip(xs0, ys0) if x <= 1.0)


def test_rtt_timeseries_settles_near_both_base_rtts(diff_rtt_csv, tmp_path):
    spec = FigureSpec(kind="timeseries_rtt", inputs=(diff_rtt_csv,),
                      output=tmp_path / "rtt.png")
    lines = build_figure(spec).axes[0].get_lines()
    assert [ln.get_label() for ln in lines] == ["flow 0", "flow 1"]
    want = derive_rtts(diff_rtt_csv)
    for fid, line in enumerate(lines):
        xs, ys = line_data(line)
        assert (xs, ys) == want[fid]
    xs1, _ = line_data(lines[1])
    assert xs1[0] >= 10.0, "second flow must not appear before its start time"
    for fid, (base, slack) in enumerate([(30.0, 6.0), (60.0, 12.0)]):
        xs, ys = line_data(lines[fid])
        tail = [y for x, y in zip(xs, ys) if x > 45.0]
        assert abs(statistics.median(tail) - base) <= slack


def test_multi_input_timeseries_labels_carry_the_run_name(diff_rtt_csv,
                                                          cdf_inputs, tmp_path):
    spec = FigureSpec(kind="timeseries_rtt",
                      inputs=(diff_rtt_csv, cdf_inputs[0]),
                      output=tmp_path / "multi.png")
    lines = build_figure(spec).axes[0].get_lines()
    assert [ln.get_label() for ln in lines] == [
        "diff_rtt flow 0", "diff_rtt flow 1", "netem_1flow flow 0"]


# -- determinism --------------------------------------------------------------

def test_rendering_is_deterministic(diff_rtt_csv, tmp_path):
    out_a = tmp_path / "a.png"
    out_b = tmp_path / "b.png"
    for out in (out_a, out_b):
        spec = FigureSpec(kind="timeseries_rate", inputs=(diff_rtt_csv,),
                          output=out)
        assert render(spec) == out
    a, b = out_a.read_bytes(), out_b.read_bytes()
    assert len(a) > 1000
    assert a == b


# -- errors --------------------------------------------------------------------

def test_header_mismatch_names_the_columns(tmp_path):
    path = tmp_path / "renamed.csv"
    path.write_text(HEADER_LINE.replace("rtt_us", "latency_us") + "\n"
                    + "0,1000,30000,10,5,FIXED,1,ack\n")
    spec = FigureSpec(kind="cdf_panel", inputs=(path,), output=tmp_path / "x.png")
    with pytest.raises(FiggenError) as err:
        build_figure(spec)
    assert "rtt_us" in str(err.value) and "latency_us" in str(err.value)


def test_reordered_columns_are_rejected(tmp_path):
    cols = TRACE_COLUMNS[::-1]
    path = tmp_path / "shuffled.csv"
    path.write_text(",".join(cols) + "\n")
    spec = FigureSpec(kind="cdf_panel", inputs=(path,), output=tmp_path / "x.png")
    with pytest.raises(FiggenError, match="out of order"):
        build_figure(spec)


def test_empty_and_missing_inputs(tmp_path):
    header_only = tmp_path / "empty.csv"
    header_only.write_text(HEADER_LINE + "\n")
    with pytest.raises(FiggenError, match="no data rows"):
        build_figure(FigureSpec(kind="cdf_panel", inputs=(header_only,),
                                output=tmp_path / "x.png"))
    with pytest.raises(FiggenError, match="file not found"):
        build_figure(FigureSpec(kind="cdf_panel",
                                inputs=(tmp_path / "absent.csv",),
                                output=tmp_path / "x.png"))


def test_warmup_cutoff_beyond_data_is_an_error(tmp_path):
    path = tmp_path / "short.csv"
    path.write_text(HEADER_LINE + "\n0,1000,30000,10,5,FIXED,1,ack\n")
    spec = FigureSpec(kind="cdf_panel", inputs=(path,),
                      output=tmp_path / "x.png", warmup_us=10_000)
    with pytest.raises(FiggenError, match="warmup"):
        build_figure(spec)


def test_spec_validation():
    with pytest.raises(FiggenError, match="unknown figure kind"):
        FigureSpec(kind="scatter", inputs=(Path("a.csv"),), output=Path("x.png"))
    with pytest.raises(FiggenError, match="at least one input"):
        FigureSpec(kind="cdf_panel", inputs=(), output=Path("x.png"))
    with pytest.raises(FiggenError, match="bucket"):
        FigureSpec(kind="timeseries_rate", inputs=(Path("a.csv"),),
                   output=Path("x.png"), bucket_us=0)
    with pytest.raises(FiggenError, match="mss"):
        FigureSpec(kind="timeseries_rate", inputs=(Path("a.csv"),),
                   output=Path("x.png"), mss_bytes=0)
    with pytest.raises(FiggenError, match="warmup"):
        FigureSpec(kind="cdf_panel", inputs=(Path("a.csv"),),
                   output=Path("x.png"), warmup_us=-1)


# -- command line ---------------------------------------------------------------

def run_figgen(*args):
    return subprocess.run([sys.executable, "-m", "figgen.cli", *args],
                          capture_output=True, text=True)


def test_cli_renders_and_reports_the_path(diff_rtt_csv, tmp_path):
    out = tmp_path / "fig.png"
    proc = run_figgen("timeseries_rtt", str(diff_rtt_csv), "-o", str(out),
                      "--warmup-us", "1000000")
    assert proc.returncode == 0, proc.stderr
    assert proc.stdout.strip() == str(out)
    assert out.exists() and out.stat().st_size > 1000


def test_cli_schema_error_exits_2(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,2\n")
    proc = run_figgen("cdf_panel", str(bad), "-o", str(tmp_path / "x.png"))
    assert proc.returncode == 2
    assert "missing columns" in proc.stderr


def test_cli_rejects_unknown_kind(tmp_path):
    proc = run_figgen("pie", str(tmp_path / "a.csv"), "-o", str(tmp_path / "x.png"))
    assert proc.returncode == 2
