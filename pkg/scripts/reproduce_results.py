#!/usr/bin/env python3
"""Reproduce the headline numbers for the bundled experiment set.

Runs every bundled scenario in-process and prints one block per experiment:
post-warmup latency percentiles, per-flow throughput, fairness, utilization,
and the controller events the scenario exists to demonstrate.  Everything is
deterministic, so the printed numbers are stable across machines.

    python scripts/reproduce_results.py            # full set, a few minutes
    python scripts/reproduce_results.py --quick    # skip the four slow runs
"""

import argparse
import dataclasses
import sys
import time
from fractions import Fraction

from cclab.cli import parse_scenario, resolve_scenario
from cclab.metrics import (default_warmup_us, fairness, rtt_percentiles,
                           utilization, window_stats)
from cclab.netsim import SimObserver, run

SLOW_SCENARIOS = {"netem_32", "netem_128"}


def load(name):
    return parse_scenario(resolve_scenario(name))


def timed_run(scenario, observer=None):
    start = time.perf_counter()
    traces = run(scenario, observer=observer)
    return traces, time.perf_counter() - start


def header(title, wall):
    print(f"\n== {title}  ({wall:.1f} s wall)")


def latency_line(trace, after_us, label="rtt"):
    p50, p95, p99 = rtt_percentiles(trace, after_us, [50.0, 95.0, 99.0])
    print(f"   flow {trace.flow_id} ({trace.algorithm:5s}) {label} p50/p95/p99 = "
          f"{p50 / 1000:.2f} / {p95 / 1000:.2f} / {p99 / 1000:.2f} ms, "
          f"losses={trace.losses_detected} rtos={trace.rtos}")


def single_flow_block():
    scenario = load("netem_1flow")
    traces, wall = timed_run(scenario)
    trace = traces[0]
    header("netem_1flow: one dstar flow on a 500 Mbps / 30 ms path", wall)
    warmup = 5_000_000
    worst = Fraction(0)
    for k in range((scenario.sim_duration_us - warmup) // 1_000_000):
        t0 = warmup + k * 1_000_000
        stats = window_stats(trace, t0, t0 + 1_000_000)
        predicted = stats.time_avg_inflight * 1_000_000 / stats.rate_pps
        worst = max(worst, abs(predicted - stats.mean_rtt_us))
    util = utilization(traces, scenario, warmup, scenario.sim_duration_us)
    latency_line(trace, warmup)
    print(f"   utilization = {float(util):.4f}, worst 1 s window "
          f"|inflight/rate - rtt| = {float(worst):.2f} us")
    return scenario


def reno_contrast_block(base):
    scenario = dataclasses.replace(
        base, name="netem_1flow_reno", sim_duration_us=70_000_000,
        flows=[dataclasses.replace(base.flows[0], algorithm="reno", params={})])
    scenario.validate()
    traces, wall = timed_run(scenario)
    header("reno contrast: same path, 70 s so one full sawtooth fits", wall)
    latency_line(traces[0], 5_000_000)


def many_flow_block(name):
    scenario = load(name)
    traces, wall = timed_run(scenario)
    t0 = 10_000_000 if name == "netem_32" else 20_000_000
    t1 = scenario.sim_duration_us
    report = fairness(traces, t0, t1)
    util = utilization(traces, scenario, t0, t1)
    rates = sorted(float(r) / 1e6 for r in report.per_flow_rate_bps)
    losses = sum(tr.losses_detected for tr in traces)
    rtos = sum(tr.rtos for tr in traces)
    header(f"{name}: {len(traces)} dstar flows share one bottleneck", wall)
    print(f"   window [{t0 / 1e6:.0f}, {t1 / 1e6:.0f}] s: jain = {float(report.jain):.5f}, "
          f"utilization = {float(util):.4f}")
    print(f"   per-flow rate min/median/max = {rates[0]:.2f} / "
          f"{rates[len(rates) // 2]:.2f} / {rates[-1]:.2f} Mbps, "
          f"losses={losses} rtos={rtos}")


def rtt_mix_block():
    scenario = load("diff_rtt")
    traces, wall = timed_run(scenario)
    t0, t1 = 20_000_000, 50_000_000
    rates = fairness(traces, t0, t1).per_flow_rate_bps
    header("diff_rtt: 30 ms and 60 ms dstar flows on 100 Mbps", wall)
    print(f"   co-active window [{t0 / 1e6:.0f}, {t1 / 1e6:.0f}] s: "
          f"rate short = {float(rates[0]) / 1e6:.2f} Mbps, "
          f"long = {float(rates[1]) / 1e6:.2f} Mbps, "
          f"long/short = {float(rates[1] / rates[0]):.3f}")
    for trace in traces:
        latency_line(trace, t0)


def drain_block():
    scenario = load("drain_timeout")
    traces, wall = timed_run(scenario)
    trace = traces[0]
    modes = [trace.mode_table[c] for c in trace.mode_codes]
    onsets = []
    last = None
    for i, mode in enumerate(modes):
        if mode == "DRAIN":
            if last is None or trace.t_us[i] - last > 1_000_000:
                onsets.append(trace.t_us[i])
            last = trace.t_us[i]
    header("drain_timeout: min-RTT filter goes stale every 10 s", wall)
    print(f"   drain onsets at {[f'{t / 1e6:.2f}' for t in onsets]} s, "
          f"cwnd floor during drain = "
          f"{min(trace.cwnd_seg[i] for i, m in enumerate(modes) if m == 'DRAIN')}")


def slow_start_block():
    scenario = load("slowstart_exit")
    traces, wall = timed_run(scenario)
    trace = traces[0]
    modes = [trace.mode_table[c] for c in trace.mode_codes]
    idx = next(i for i, mode in enumerate(modes) if mode != "SLOW_START")
    bdp = scenario.path_bdp_segments(scenario.flows[0])
    header("slowstart_exit: doubling stops once the pipe estimate flattens", wall)
    print(f"   exit at t = {trace.t_us[idx] / 1e6:.3f} s with cwnd = {trace.cwnd_seg[idx]} "
          f"(path BDP {bdp}), drops={trace.segments_dropped} rtos={trace.rtos}")


class OccupancySampler(SimObserver):
    def __init__(self):
        self.samples = []

    def on_enqueue(self, t, flow_id, seq, result, occupancy):
        self.samples.append((t, occupancy))


def vegas_block():
    scenario = load("vegas_queue")
    sampler = OccupancySampler()
    traces, wall = timed_run(scenario, observer=sampler)
    late = [occ for t, occ in sampler.samples if t > 10_000_000]
    header("vegas_queue: backlog-targeting baseline on 20 Mbps", wall)
    print(f"   queue occupancy after 10 s in [{min(late)}, {max(late)}] segments")
    latency_line(traces[0], 10_000_000)


def head_to_head_block(name):
    scenario = load(name)
    traces, wall = timed_run(scenario)
    warmup = default_warmup_us(scenario.sim_duration_us)
    t1 = scenario.sim_duration_us
    rates = fairness(traces, warmup, t1).per_flow_rate_bps
    header(f"{name}: dstar vs {traces[1].algorithm} on 100 Mbps / 30 ms", wall)
    for trace, rate in zip(traces, rates):
        print(f"   flow {trace.flow_id} ({trace.algorithm:5s}) "
              f"rate = {float(rate) / 1e6:6.2f} Mbps")
        latency_line(trace, warmup)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--quick", action="store_true",
                        help="skip the slow runs (netem_32, netem_128, 70 s reno)")
    args = parser.parse_args(argv)

    start = time.perf_counter()
    base = single_flow_block()
    if not args.quick:
        reno_contrast_block(base)
        for name in sorted(SLOW_SCENARIOS):
            many_flow_block(name)
    rtt_mix_block()
    drain_block()
    slow_start_block()
    vegas_block()
    for name in ("hth_reno", "hth_vegas", "hth_bbr"):
        head_to_head_block(name)
    print(f"\ntotal wall time {time.perf_counter() - start:.1f} s")
    return 0


if __name__ == "__main__":
    sys.exit(main())
