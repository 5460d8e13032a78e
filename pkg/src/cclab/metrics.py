"""Summary statistics over simulation traces.

Rates and fairness values are computed with exact rational arithmetic and
only converted to float at the edges (JSON, plots), so identical runs yield
identical summaries. The default measurement warmup is 5 s, shortened for
runs too brief to afford it.
"""
from __future__ import annotations

from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple, Sequence

from cclab.netsim import FlowTrace, Scenario
from cclab.core import TimeUs, US_PER_S

DEFAULT_WARMUP_US = 5 * US_PER_S
DEFAULT_BUCKET_US = 100_000


def default_warmup_us(sim_duration_us: TimeUs) -> TimeUs:
    return min(DEFAULT_WARMUP_US, sim_duration_us // 4)


class SeriesPoint(NamedTuple):
    t_us: TimeUs  # bucket start
    value: Fraction


@dataclass(slots=True)
class FairnessReport:
    per_flow_rate_bps: list[Fraction]
    jain: Fraction


def jain_index(values: Sequence[Fraction | int | float]) -> Fraction:
    """Jain's fairness index: (sum x)^2 / (n * sum x^2), in (0, 1]."""
    if not values:
        raise ValueError("undefined fairness: no values")
    xs = [Fraction(v) for v in values]
    if any(x < 0 for x in xs):
        raise ValueError("undefined fairness: negative value")
    square_sum = sum(x * x for x in xs)
    if square_sum == 0:
        raise ValueError("undefined fairness: all values are zero")
    total = sum(xs)
    return total * total / (len(xs) * square_sum)


def throughput_series(trace: FlowTrace, bucket_us: TimeUs = DEFAULT_BUCKET_US) -> list[SeriesPoint]:
    """Delivered throughput in bits/s per fixed time bucket (bucket origin 0).

    Empty interior buckets are emitted as zeros; the series conserves bytes:
    sum(value * bucket) / 8 equals the bytes acknowledged in the traced span.
    """
    if bucket_us <= 0:
        raise ValueError(f"bucket must be positive, got {bucket_us}")
    ts = trace.t_us
    if not ts:
        return []
    first = ts[0] // bucket_us
    last = ts[-1] // bucket_us
    counts = [0] * (last - first + 1)
    for t in ts:
        counts[t // bucket_us - first] += 1
    bits = trace.mss_bytes * 8
    return [
        SeriesPoint((first + i) * bucket_us, Fraction(c * bits * US_PER_S, bucket_us))
        for i, c in enumerate(counts)
    ]


def rtt_cdf(traces: Sequence[FlowTrace], after_us: TimeUs = 0) -> list[tuple[TimeUs, Fraction]]:
    """Empirical RTT distribution over all samples later than ``after_us``.

    Returns (rtt, cumulative fraction) step points; monotone in both
    coordinates and ending at fraction 1.
    """
    samples: list[TimeUs] = []
    for tr in traces:
        ts = tr.t_us
        lo = bisect_right(ts, after_us)
        samples.extend(tr.rtt_us[lo:])
    if not samples:
        raise ValueError("no rtt samples after cutoff")
    samples.sort()
    n = len(samples)
    points: list[tuple[TimeUs, Fraction]] = []
    for i, v in enumerate(samples):
        if i + 1 == n or samples[i + 1] != v:
            points.append((v, Fraction(i + 1, n)))
    return points


def percentile(samples: Sequence[TimeUs], q: float) -> TimeUs:
    """Nearest-rank percentile (q in (0, 100]) of a non-empty sample set."""
    if not samples:
        raise ValueError("no samples")
    if not 0 < q <= 100:
        raise ValueError(f"percentile must be in (0, 100], got {q}")
    ordered = sorted(samples)
    rank = -(-int(q * len(ordered)) // 100)  # ceil without floats on the grid
    return ordered[max(rank, 1) - 1]


def rtt_percentiles(trace: FlowTrace, after_us: TimeUs, qs: Sequence[float]) -> list[TimeUs]:
    lo = bisect_right(trace.t_us, after_us)
    window = trace.rtt_us[lo:]
    if not window:
        raise ValueError("no rtt samples after cutoff")
    ordered = sorted(window)
    out = []
    for q in qs:
        rank = -(-int(q * len(ordered)) // 100)
        out.append(ordered[max(rank, 1) - 1])
    return out


def delivered_in_window(trace: FlowTrace, t0: TimeUs, t1: TimeUs) -> int:
    """Segments acknowledged in (t0, t1]."""
    lo = bisect_right(trace.t_us, t0)
    hi = bisect_right(trace.t_us, t1)
    return hi - lo


def mean_rate_bps(trace: FlowTrace, t0: TimeUs, t1: TimeUs) -> Fraction:
    if t1 <= t0:
        raise ValueError("empty window")
    segs = delivered_in_window(trace, t0, t1)
    return Fraction(segs * trace.mss_bytes * 8 * US_PER_S, t1 - t0)


def utilization(traces: Sequence[FlowTrace], scenario: Scenario,
                t0: TimeUs, t1: TimeUs) -> Fraction:
    """Fraction of the bottleneck's capacity delivered during (t0, t1]."""
    if t1 <= t0:
        raise ValueError("empty window")
    total_bits = sum(delivered_in_window(tr, t0, t1) * tr.mss_bytes * 8 for tr in traces)
    capacity_bits = Fraction(scenario.bottleneck_rate_bps * (t1 - t0), US_PER_S)
    return Fraction(total_bits) / capacity_bits


def fairness(traces: Sequence[FlowTrace], t0: TimeUs, t1: TimeUs) -> FairnessReport:
    rates = [mean_rate_bps(tr, t0, t1) for tr in traces]
    return FairnessReport(per_flow_rate_bps=rates, jain=jain_index(rates))


class WindowStats(NamedTuple):
    acks: int
    mean_rtt_us: Fraction          # per-ack average
    time_avg_inflight: Fraction    # piecewise-constant time average
    rate_pps: Fraction             # delivered / window length


def window_stats(trace: FlowTrace, t0: TimeUs, t1: TimeUs) -> WindowStats:
    """Per-window trace summary for comparisons against the queueing model.

    In-flight is held piecewise constant from one ack to the next; the value
    in force at ``t0`` comes from the last ack before the window.
    """
    if t1 <= t0:
        raise ValueError("empty window")
    ts = trace.t_us
    lo = bisect_right(ts, t0)
    hi = bisect_right(ts, t1)
    acks = hi - lo
    if acks == 0:
        raise ValueError("no samples in window")
    rtts = trace.rtt_us[lo:hi]
    mean_rtt = Fraction(sum(rtts), acks)
    infl = trace.inflight_seg
    weighted = 0
    prev_t = t0
    prev_v = infl[lo - 1] if lo > 0 else 0
    for i in range(lo, hi):
        t = ts[i]
        weighted += prev_v * (t - prev_t)
        prev_t = t
        prev_v = infl[i]
    weighted += prev_v * (t1 - prev_t)
    return WindowStats(
        acks=acks,
        mean_rtt_us=mean_rtt,
        time_avg_inflight=Fraction(weighted, t1 - t0),
        rate_pps=Fraction(acks * US_PER_S, t1 - t0),
    )
