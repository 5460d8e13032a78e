"""Deterministic discrete-event laboratory for congestion control experiments.

The package simulates window- and pacing-controlled bulk flows sharing a
single drop-tail bottleneck, with integer-microsecond timestamps and exact
rational arithmetic wherever a rate or a bandwidth-delay product is computed,
so every run is bit-reproducible.
"""

from cclab.core import (
    AckSample,
    BdpEstimate,
    MinRttFilter,
    compute_bdp,
    delivery_rate,
    update_min_rtt,
)
from cclab.netsim import FlowSpec, FlowTrace, Scenario, ScenarioError, model_rtt, run

__version__ = "0.1.0"

__all__ = [
    "AckSample",
    "BdpEstimate",
    "MinRttFilter",
    "compute_bdp",
    "delivery_rate",
    "update_min_rtt",
    "FlowSpec",
    "FlowTrace",
    "Scenario",
    "ScenarioError",
    "model_rtt",
    "run",
    "__version__",
]
