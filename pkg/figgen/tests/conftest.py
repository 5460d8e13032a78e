"""Session fixtures: generate trace CSVs by driving the cclab CLI as a
black box. figgen itself never imports cclab, and neither do these tests."""

import json
import subprocess
import sys

import pytest

# the single-flow 500 Mbps / 30 ms / 1 BDP-queue path, replicated so the
# same experiment can run under each algorithm
SINGLE_FLOW_PATH = {
    "bottleneck_rate_bps": 500_000_000,
    "mss_bytes": 1500,
    "prop_delay_fwd_us": 15_000,
    "prop_delay_rev_us": 15_000,
    "queue_capacity_segments": 1250,
    "sim_duration_us": 20_000_000,
    "seed": 1,
}

CDF_RUNS = ["netem_1flow", "netem_1flow_reno", "netem_1flow_vegas",
            "netem_1flow_bbr"]


def cclab_run(scenario, out_dir):
    subprocess.run(
        [sys.executable, "-m", "cclab", "run", str(scenario),
         "--out", str(out_dir), "--no-json"],
        check=True, capture_output=True, text=True)


@pytest.fixture(scope="session")
def trace_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("traces")
    cclab_run("diff_rtt", root)
    cclab_run("netem_1flow", root)
    for algo in ("reno", "vegas", "bbr"):
        doc = dict(SINGLE_FLOW_PATH)
        doc["name"] = f"netem_1flow_{algo}"
        doc["flows"] = [{"algorithm": algo}]
        scenario_path = root / f"{doc['name']}.json"
        scenario_path.write_text(json.dumps(doc))
        cclab_run(scenario_path, root)
    return root


@pytest.fixture(scope="session")
def diff_rtt_csv(trace_dir):
    return trace_dir / "diff_rtt" / "trace.csv"


@pytest.fixture(scope="session")
def cdf_inputs(trace_dir):
    return [trace_dir / name / "trace.csv" for name in CDF_RUNS]
