"""Build figures from cclab trace CSVs.

Consumes only the documented eight-column trace schema; no simulator
internals. Figures are constructed as plain ``matplotlib.figure.Figure``
objects (no pyplot, no backend state), so building is a pure function of
the CSV bytes and the spec: the same inputs always produce the same plot
data layer and the same image bytes.
"""

import csv
from dataclasses import dataclass, field
from pathlib import Path

from matplotlib.figure import Figure

TRACE_COLUMNS = ["flow_id", "t_us", "rtt_us", "cwnd_seg", "inflight_seg",
                 "mode", "delivered_cum_seg", "event"]

KINDS = ("cdf_panel", "timeseries_rate", "timeseries_rtt")


class FiggenError(ValueError):
    """Bad spec or input the caller can fix; the CLI maps this to exit 2."""


@dataclass(frozen=True)
class FigureSpec:
    kind: str
    inputs: tuple[Path, ...]
    output: Path
    warmup_us: int = 0
    bucket_us: int = 100_000
    mss_bytes: int = 1500

    def __post_init__(self):
        if self.kind not in KINDS:
            raise FiggenError(f"unknown figure kind {self.kind!r} "
                              f"(known: {', '.join(KINDS)})")
        if not self.inputs:
            raise FiggenError("at least one input csv is required")
        if self.warmup_us < 0:
            raise FiggenError("warmup cutoff must be >= 0")
        if self.bucket_us < 1:
            raise FiggenError("bucket width must be >= 1 us")
        if self.mss_bytes < 1:
            raise FiggenError("mss must be >= 1 byte")


@dataclass
class FlowSeries:
    t_us: list[int] = field(default_factory=list)
    rtt_us: list[int] = field(default_factory=list)
    delivered_cum: list[int] = field(default_factory=list)


def load_trace(path: Path) -> dict[int, FlowSeries]:
    """Read one trace CSV into per-flow columns, validating the header."""
    if not path.exists():
        raise FiggenError(f"{path}: file not found")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise FiggenError(f"{path}: empty file, expected a header row")
        if header != TRACE_COLUMNS:
            missing = sorted(set(TRACE_COLUMNS) - set(header))
            extra = sorted(set(header) - set(TRACE_COLUMNS))
            if missing or extra:
                parts = []
                if missing:
                    parts.append(f"missing columns: {', '.join(missing)}")
                if extra:
                    parts.append(f"unexpected columns: {', '.join(extra)}")
                raise FiggenError(f"{path}: csv header mismatch; {'; '.join(parts)}")
            raise FiggenError(f"{path}: csv columns out of order, expected "
                              f"{','.join(TRACE_COLUMNS)}")
        flows: dict[int, FlowSeries] = {}
        for line_no, row in enumerate(reader, start=2):
            try:
                flow_id, t_us, rtt_us = int(row[0]), int(row[1]), int(row[2])
                delivered = int(row[6])
            except (IndexError, ValueError):
                raise FiggenError(f"{path}: malformed row {line_no}") from None
            series = flows.setdefault(flow_id, FlowSeries())
            series.t_us.append(t_us)
            series.rtt_us.append(rtt_us)
            series.delivered_cum.append(delivered)
    if not flows:
        raise FiggenError(f"{path}: no data rows")
    return flows


def cdf_series(flows: dict[int, FlowSeries], warmup_us: int,
               label: str) -> tuple[list[float], list[float]]:
    """Pooled empirical RTT CDF of every flow in one trace, in milliseconds."""
    samples = sorted(rtt for series in flows.values()
                     for t, rtt in zip(series.t_us, series.rtt_us)
                     if t > warmup_us)
    if not samples:
        raise FiggenError(f"{label}: no rtt samples after the warmup cutoff")
    n = len(samples)
    xs = [rtt / 1000.0 for rtt in samples]
    ys = [(i + 1) / n for i in range(n)]
    return xs, ys


def rate_series(series: FlowSeries, horizon_us: int, bucket_us: int,
                mss_bytes: int, warmup_us: int) -> tuple[list[float], list[float]]:
    """Delivered rate per fixed bucket, in Mbps, at the bucket's end time.

    Buckets cover (k*bucket, (k+1)*bucket] from t = 0 to the trace horizon,
    so a late-starting flow shows an explicit zero-rate lead-in.
    """
    n_buckets = -(-horizon_us // bucket_us)
    deltas = [0] * n_buckets
    prev_cum = 0
    for t, cum in zip(series.t_us, series.delivered_cum):
        deltas[(t - 1) // bucket_us] += cum - prev_cum
        prev_cum = cum
    xs, ys = [], []
    for k in range(n_buckets):
        end_us = (k + 1) * bucket_us
        if end_us <= warmup_us:
            continue
        xs.append(end_us / 1e6)
        # segments * bytes * 8 bits over bucket_us microseconds is exactly Mbps
        ys.append(deltas[k] * mss_bytes * 8 / bucket_us)
    return xs, ys


def rtt_series(series: FlowSeries, warmup_us: int) -> tuple[list[float], list[float]]:
    xs = [t / 1e6 for t in series.t_us if t > warmup_us]
    ys = [rtt / 1000.0 for t, rtt in zip(series.t_us, series.rtt_us)
          if t > warmup_us]
    return xs, ys


def _input_label(path: Path) -> str:
    # the cclab cli always names the file trace.csv; the run directory is
    # the distinguishing name then
    if path.name == "trace.csv" and path.parent.name:
        return path.parent.name
    return path.stem


def _flow_label(path: Path, flow_id: int, single_input: bool) -> str:
    if single_input:
        return f"flow {flow_id}"
    return f"{_input_label(path)} flow {flow_id}"


def build_figure(spec: FigureSpec) -> Figure:
    """Assemble the figure without touching any global matplotlib state."""
    fig = Figure(figsize=(8.0, 4.5), dpi=120)
    ax = fig.add_subplot()
    loaded = [(path, load_trace(path)) for path in spec.inputs]
    single = len(loaded) == 1

    if spec.kind == "cdf_panel":
        for path, flows in loaded:
            xs, ys = cdf_series(flows, spec.warmup_us, str(path))
            ax.plot(xs, ys, drawstyle="steps-post", label=_input_label(path))
        ax.set_xlabel("RTT (ms)")
        ax.set_ylabel("cumulative fraction")
        ax.set_title("RTT distribution")
        ax.set_ylim(0.0, 1.02)
        ax.legend(loc="lower right")
    elif spec.kind == "timeseries_rate":
        for path, flows in loaded:
            horizon = max(series.t_us[-1] for series in flows.values())
            for flow_id in sorted(flows):
                xs, ys = rate_series(flows[flow_id], horizon, spec.bucket_us,
                                     spec.mss_bytes, spec.warmup_us)
                if not xs:
                    raise FiggenError(f"{path}: no buckets after the warmup cutoff")
                ax.plot(xs, ys, label=_flow_label(path, flow_id, single))
        ax.set_xlabel("time (s)")
        ax.set_ylabel("delivered rate (Mbps)")
        ax.set_title("per-flow throughput")
        ax.legend(loc="upper right")
    else:  # timeseries_rtt
        for path, flows in loaded:
            for flow_id in sorted(flows):
                xs, ys = rtt_series(flows[flow_id], spec.warmup_us)
                if not xs:
                    raise FiggenError(f"{path}: flow {flow_id} has no samples "
                                      f"after the warmup cutoff")
                ax.plot(xs, ys, label=_flow_label(path, flow_id, single))
        ax.set_xlabel("time (s)")
        ax.set_ylabel("RTT (ms)")
        ax.set_title("per-flow round-trip time")
        ax.legend(loc="upper right")

    ax.grid(True, alpha=0.3)
    return fig


def render(spec: FigureSpec) -> Path:
    fig = build_figure(spec)
    spec.output.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(spec.output)
    return spec.output
