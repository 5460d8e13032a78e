"""Command-line front end.

Subcommands:

* ``cclab run <scenario> [--out DIR] [--seed N] [--repeat K] [--jobs J]``
  simulate a scenario (bundled name or JSON file path) and write
  ``trace.csv`` and ``summary.json`` under the output directory.
* ``cclab list-scenarios`` lists the bundled scenario library.
* ``cclab validate <scenario>`` parses and validates without running.

Exit codes: 0 success, 2 scenario/validation error, 3 I/O error. Output
files are written to a temporary name and atomically renamed, so a crashed
run never leaves a partial file behind. The default output directory is
``$CCLAB_OUT`` (falling back to ``./out``).
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from heapq import merge
from importlib import resources
from pathlib import Path

from cclab import metrics
from cclab.cca import ALGORITHMS
from cclab.netsim import FlowSpec, FlowTrace, Scenario, ScenarioError, run
from cclab.core import US_PER_S, round_half_up
from fractions import Fraction

CSV_HEADER = "flow_id,t_us,rtt_us,cwnd_seg,inflight_seg,mode,delivered_cum_seg,event"
OUT_DIR_ENV = "CCLAB_OUT"

_TOP_KEYS = {
    "name", "bottleneck_rate_bps", "mss_bytes", "prop_delay_fwd_us", "prop_delay_rev_us",
    "queue_capacity_segments", "queue_capacity_bytes", "ecn_threshold_segments",
    "sim_duration_us", "seed", "start_jitter_us", "flows",
}
_FLOW_KEYS = {
    "algorithm", "start_time_us", "duration_us",
    "prop_delay_fwd_us", "prop_delay_rev_us", "params",
}


def _need_int(obj: dict, key: str, where: str, *, default=None, minimum=None, required=False):
    if key not in obj:
        if required:
            raise ScenarioError(f"{where}{key}", "required field is missing")
        return default
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioError(f"{where}{key}", f"must be an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ScenarioError(f"{where}{key}", f"must be >= {minimum}, got {value}")
    return value


def parse_scenario(path: str | Path) -> Scenario:
    """Load and validate a scenario JSON file.

    Unknown keys are rejected; errors name the offending field. Defaults:
    mss 1500 bytes, ECN off, seed 0, no jitter, flow start at 0 running to
    the end of the simulation, per-flow propagation delays falling back to
    the scenario-level values, and queue capacity defaulting to one
    bandwidth-delay product of the scenario-level path.
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError("<file>", f"not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ScenarioError("<file>", "top level must be a JSON object")
    for key in raw:
        if key not in _TOP_KEYS:
            raise ScenarioError(key, "unknown field")

    name = raw.get("name", path.stem)
    if not isinstance(name, str) or not name:
        raise ScenarioError("name", "must be a non-empty string")
    rate = _need_int(raw, "bottleneck_rate_bps", "", required=True, minimum=1)
    mss = _need_int(raw, "mss_bytes", "", default=1500, minimum=1)
    duration = _need_int(raw, "sim_duration_us", "", required=True, minimum=1)
    seed = _need_int(raw, "seed", "", default=0, minimum=0)
    jitter = _need_int(raw, "start_jitter_us", "", default=0, minimum=0)
    default_fwd = _need_int(raw, "prop_delay_fwd_us", "", minimum=0)
    default_rev = _need_int(raw, "prop_delay_rev_us", "", minimum=0)
    ecn = _need_int(raw, "ecn_threshold_segments", "", minimum=1)

    flows_raw = raw.get("flows")
    if not isinstance(flows_raw, list):
        raise ScenarioError("flows", "must be a list of flow objects")
    flows: list[FlowSpec] = []
    for i, fr in enumerate(flows_raw):
        where = f"flows[{i}]."
        if not isinstance(fr, dict):
            raise ScenarioError(f"flows[{i}]", "must be an object")
        for key in fr:
            if key not in _FLOW_KEYS:
                raise ScenarioError(f"{where}{key}", "unknown field")
        algorithm = fr.get("algorithm")
        if not isinstance(algorithm, str) or algorithm not in ALGORITHMS:
            known = ", ".join(sorted(ALGORITHMS))
            raise ScenarioError(f"{where}algorithm", f"must be one of: {known}")
        fwd = _need_int(fr, "prop_delay_fwd_us", where, default=default_fwd, minimum=0)
        rev = _need_int(fr, "prop_delay_rev_us", where, default=default_rev, minimum=0)
        if fwd is None or rev is None:
            raise ScenarioError(f"{where}prop_delay_fwd_us",
                                "no per-flow delay and no scenario-level default")
        params = fr.get("params", {})
        if not isinstance(params, dict):
            raise ScenarioError(f"{where}params", "must be an object")
        flows.append(FlowSpec(
            algorithm=algorithm,
            start_time_us=_need_int(fr, "start_time_us", where, default=0, minimum=0),
            duration_us=_need_int(fr, "duration_us", where, minimum=1),
            prop_delay_fwd_us=fwd,
            prop_delay_rev_us=rev,
            params=params,
        ))

    if "queue_capacity_segments" in raw and "queue_capacity_bytes" in raw:
        raise ScenarioError("queue_capacity_bytes",
                            "give queue capacity in segments or bytes, not both")
    capacity = _need_int(raw, "queue_capacity_segments", "", minimum=1)
    cap_bytes = _need_int(raw, "queue_capacity_bytes", "", minimum=1)
    if capacity is None and cap_bytes is not None:
        capacity = max(1, cap_bytes // mss)
    if capacity is None:
        if default_fwd is None or default_rev is None:
            raise ScenarioError("queue_capacity_segments",
                                "required when scenario-level propagation delays are absent")
        # default: one bandwidth-delay product of the scenario-level path
        capacity = max(1, round_half_up(
            Fraction(rate * (default_fwd + default_rev), 8 * mss * US_PER_S)))

    scenario = Scenario(
        name=name,
        bottleneck_rate_bps=rate,
        mss_bytes=mss,
        queue_capacity_segments=capacity,
        ecn_threshold_segments=ecn,
        sim_duration_us=duration,
        seed=seed,
        start_jitter_us=jitter,
        flows=flows,
    )
    scenario.validate()
    return scenario


def bundled_scenarios() -> dict[str, Path]:
    root = resources.files("cclab").joinpath("scenarios")
    found = {}
    for entry in sorted(root.iterdir(), key=lambda e: e.name):
        if entry.name.endswith(".json"):
            found[entry.name[:-5]] = Path(str(entry))
    return found


def resolve_scenario(ref: str) -> Path:
    """A scenario reference is a file path or a bundled scenario name."""
    p = Path(ref)
    if p.exists():
        return p
    bundled = bundled_scenarios()
    if ref in bundled:
        return bundled[ref]
    raise ScenarioError("<scenario>", f"{ref!r} is neither a file nor a bundled scenario "
                                      f"(bundled: {', '.join(sorted(bundled))})")


@dataclass(slots=True)
class RunConfig:
    scenario_path: Path
    out_dir: Path
    seed: int | None = None
    repeat: int = 1
    jobs: int = 1
    write_csv: bool = True
    write_json: bool = True


def trace_rows(traces: list[FlowTrace]):
    """All flows' ack records merged into global (time, flow, index) order."""
    def one(tr: FlowTrace):
        table = tr.mode_table
        fid = tr.flow_id
        for i in range(len(tr.t_us)):
            yield (tr.t_us[i], fid, i, tr.rtt_us[i], tr.cwnd_seg[i], tr.inflight_seg[i],
                   table[tr.mode_codes[i]], tr.delivered_cum_seg[i],
                   "ack_ce" if tr.ce_flags[i] else "ack")
    return merge(*(one(tr) for tr in traces))


def write_trace_csv(traces: list[FlowTrace], path: Path) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="") as fh:
        fh.write(CSV_HEADER + "\n")
        for t, fid, _, rtt, cwnd, infl, mode, dlv, event in trace_rows(traces):
            fh.write(f"{fid},{t},{rtt},{cwnd},{infl},{mode},{dlv},{event}\n")
    os.replace(tmp, path)


def read_trace_csv(path: Path) -> list[dict]:
    """Parse a trace CSV back into row dicts (schema round-trip helper)."""
    with open(path, newline="") as fh:
        header = fh.readline().rstrip("\n")
        if header != CSV_HEADER:
            raise ValueError(f"unexpected csv header {header!r}, want {CSV_HEADER!r}")
        names = header.split(",")
        rows = []
        for line in fh:
            parts = line.rstrip("\n").split(",")
            row = dict(zip(names, parts))
            for key in ("flow_id", "t_us", "rtt_us", "cwnd_seg", "inflight_seg",
                        "delivered_cum_seg"):
                row[key] = int(row[key])
            rows.append(row)
    return rows


def build_summary(scenario: Scenario, traces: list[FlowTrace]) -> dict:
    warmup = metrics.default_warmup_us(scenario.sim_duration_us)
    t0, t1 = warmup, scenario.sim_duration_us
    flows = []
    rates = []
    for tr in traces:
        rate = metrics.mean_rate_bps(tr, t0, t1)
        rates.append(rate)
        try:
            p50, p95, p99 = metrics.rtt_percentiles(tr, t0, (50, 95, 99))
        except ValueError:
            p50 = p95 = p99 = None
        flows.append({
            "flow_id": tr.flow_id,
            "algorithm": tr.algorithm,
            "mean_rate_bps": float(rate),
            "rtt_p50_us": p50,
            "rtt_p95_us": p95,
            "rtt_p99_us": p99,
            "segments_sent": tr.segments_sent,
            "segments_delivered": tr.segments_delivered,
            "segments_dropped": tr.segments_dropped,
            "losses_detected": tr.losses_detected,
            "retransmits": tr.retransmits,
            "rtos": tr.rtos,
        })
    summary = {
        "scenario": scenario.name,
        "seed": scenario.seed,
        "measurement_window_us": [t0, t1],
        "flows": flows,
        "utilization": float(metrics.utilization(traces, scenario, t0, t1)) if traces else None,
        "jain_index": None,
        "losses_total": sum(tr.losses_detected for tr in traces),
    }
    nonzero = [r for r in rates if r > 0]
    if nonzero and len(nonzero) == len(rates):
        summary["jain_index"] = float(metrics.jain_index(rates))
    return summary


def write_summary_json(summary: dict, path: Path) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


def _run_once(scenario: Scenario, out_dir: Path, write_csv: bool, write_json: bool) -> dict:
    traces = run(scenario)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = build_summary(scenario, traces)
    if write_csv:
        write_trace_csv(traces, out_dir / "trace.csv")
    if write_json:
        write_summary_json(summary, out_dir / "summary.json")
    return summary


def _repeat_worker(args) -> dict:
    scenario, rep_dir, write_csv, write_json = args
    return _run_once(scenario, rep_dir, write_csv, write_json)


def run_command(config: RunConfig) -> int:
    try:
        scenario = parse_scenario(config.scenario_path)
        if config.seed is not None:
            scenario.seed = config.seed
            scenario.validate()
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    base = config.out_dir / scenario.name
    try:
        if config.repeat <= 1:
            summary = _run_once(scenario, base, config.write_csv, config.write_json)
            summaries = [summary]
        else:
            work = [(scenario, base / f"rep{k}", config.write_csv, config.write_json)
                    for k in range(config.repeat)]
            if config.jobs > 1:
                with ProcessPoolExecutor(max_workers=config.jobs) as pool:
                    summaries = list(pool.map(_repeat_worker, work))
            else:
                summaries = [_repeat_worker(w) for w in work]
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    for k, summary in enumerate(summaries):
        flows = summary["flows"]
        rate = sum(f["mean_rate_bps"] for f in flows)
        tag = f" rep{k}" if config.repeat > 1 else ""
        print(f"{scenario.name}{tag}: flows={len(flows)} "
              f"aggregate_rate={rate / 1e6:.3f} Mbps "
              f"utilization={summary['utilization']} jain={summary['jain_index']} "
              f"losses={summary['losses_total']}")
    print(f"wrote {base}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="cclab",
        description="deterministic congestion-control simulation laboratory",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    runp = sub.add_parser("run", help="simulate a scenario and write trace/summary files")
    runp.add_argument("scenario", help="bundled scenario name or path to a scenario JSON file")
    runp.add_argument("--out", type=Path,
                      default=Path(os.environ.get(OUT_DIR_ENV, "out")),
                      help=f"output directory (default: ${OUT_DIR_ENV} or ./out)")
    runp.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    runp.add_argument("--repeat", type=int, default=1, help="run the scenario K times")
    runp.add_argument("--jobs", type=int, default=1, help="parallel workers for --repeat")
    runp.add_argument("--no-csv", action="store_true", help="skip trace.csv")
    runp.add_argument("--no-json", action="store_true", help="skip summary.json")

    sub.add_parser("list-scenarios", help="list bundled scenarios")

    valp = sub.add_parser("validate", help="validate a scenario file without running it")
    valp.add_argument("scenario", help="bundled scenario name or path to a scenario JSON file")

    args = parser.parse_args(argv)

    if args.command == "list-scenarios":
        for name, path in bundled_scenarios().items():
            sc = parse_scenario(path)
            algos = ",".join(sorted({f.algorithm for f in sc.flows})) or "-"
            print(f"{name}: {len(sc.flows)} flow(s) [{algos}] "
                  f"{sc.bottleneck_rate_bps / 1e6:g} Mbps, "
                  f"{sc.sim_duration_us / 1e6:g} s")
        return 0

    if args.command == "validate":
        try:
            sc = parse_scenario(resolve_scenario(args.scenario))
        except ScenarioError as exc:
            print(f"invalid: {exc}", file=sys.stderr)
            return 2
        except OSError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 3
        print(f"ok: {sc.name} ({len(sc.flows)} flows)")
        return 0

    # run
    if args.repeat < 1:
        print("error: --repeat must be >= 1", file=sys.stderr)
        return 2
    if args.jobs < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return 2
    try:
        path = resolve_scenario(args.scenario)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    config = RunConfig(
        scenario_path=path,
        out_dir=args.out,
        seed=args.seed,
        repeat=args.repeat,
        jobs=args.jobs,
        write_csv=not args.no_csv,
        write_json=not args.no_json,
    )
    return run_command(config)


if __name__ == "__main__":
    sys.exit(main())
