"""Shared generators and checkers used by both the unit and acceptance suites.

The controller checkers accumulate one count per assertion actually
evaluated, so property suites can report how many cases they covered.
"""
from __future__ import annotations

import math
import random
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction

from hypothesis import strategies as st

from cclab.core import AckSample
from cclab.dstar import DstarConfig, DstarMode, DstarState, initial_state, on_ack, on_rto
from cclab.netsim import EnqueueResult, FlowSpec, Scenario, SimObserver, run

LEGAL_TRANSITIONS = {
    DstarMode.SLOW_START: {DstarMode.SLOW_START, DstarMode.GAIN_1},
    DstarMode.GAIN_1: {DstarMode.GAIN_1, DstarMode.GAIN_2},
    DstarMode.GAIN_2: {DstarMode.GAIN_2, DstarMode.GAIN_1, DstarMode.DRAIN},
    DstarMode.DRAIN: {DstarMode.DRAIN, DstarMode.GAIN_1},
}


def ack_stream_strategy(max_len: int = 80, min_len: int = 1):
    """Streams of (kind, rtt, gap, ecn) controller inputs.

    Gaps are mostly a fraction of an RTT with occasional multi-second jumps
    so minimum-RTT staleness paths get exercised; 'rto' entries interleave
    timeout restarts.
    """
    event = st.one_of(
        st.tuples(
            st.just("ack"),
            st.integers(min_value=1, max_value=200_000),
            st.one_of(
                st.integers(min_value=1, max_value=60_000),
                st.integers(min_value=1, max_value=12_000_000),
            ),
            st.booleans(),
        ),
        st.tuples(st.just("rto"), st.just(0), st.integers(min_value=1, max_value=2_000_000),
                  st.just(False)),
    )
    return st.lists(event, min_size=min_len, max_size=max_len)


@dataclass
class ControllerCheck:
    """Replays an input stream through the controller and asserts the
    published invariants after every step."""

    config: DstarConfig = field(default_factory=DstarConfig)
    grammar_checks: int = 0
    clamp_checks: int = 0
    window_law_checks: int = 0

    def replay(self, stream) -> DstarState:
        state = initial_state(0, self.config)
        now = 0
        floor = self.config.cwnd_floor
        timeout = self.config.min_rtt_timeout_us
        prev_mode = state.mode
        for kind, rtt, gap, ecn in stream:
            now += gap
            if kind == "rto":
                on_rto(state, now)
                assert state.mode is DstarMode.SLOW_START
                assert state.snd_cwnd == floor
                prev_mode = state.mode
                continue
            stale_before = state.min_rtt.is_stale(now, timeout)
            on_ack(state, AckSample(rtt=rtt, newly_delivered=1, now=now, ecn_ce=ecn))

            assert state.mode in LEGAL_TRANSITIONS[prev_mode], (
                f"illegal transition {prev_mode} -> {state.mode}")
            if prev_mode is not DstarMode.GAIN_2:
                assert state.mode is not DstarMode.DRAIN or prev_mode is DstarMode.DRAIN
            if state.mode is DstarMode.DRAIN and prev_mode is DstarMode.GAIN_2:
                assert stale_before, "drain entered while the min-RTT filter was fresh"
            self.grammar_checks += 1

            assert floor <= state.gain_cwnd <= max(floor, state.bdp.bdp)
            self.clamp_checks += 1

            if state.mode is DstarMode.DRAIN:
                assert state.snd_cwnd == floor
            else:
                assert state.snd_cwnd == state.bdp.bdp + state.gain_cwnd
            self.window_law_checks += 1

            prev_mode = state.mode
        return state


@dataclass
class InvariantCounts:
    """How many individual assertions each simulator property suite ran."""

    fifo: int = 0
    work_conservation: int = 0
    conservation: int = 0
    admission: int = 0
    trace_rows: int = 0

    def __iadd__(self, other: "InvariantCounts") -> "InvariantCounts":
        self.fifo += other.fifo
        self.work_conservation += other.work_conservation
        self.conservation += other.conservation
        self.admission += other.admission
        self.trace_rows += other.trace_rows
        return self


class InvariantObserver(SimObserver):
    """Checks queue-level invariants on every event.

    * admission: occupancy stays in [0, capacity]; drops happen only against
      a full queue; congestion marks appear exactly when the pre-admission
      occupancy reaches the threshold.
    * FIFO: segments leave the queue in exactly the order they were admitted.
    * work conservation: while the queue stays occupied, completions are one
      service time apart (within the microsecond rounding of a fractional
      service time).
    """

    def __init__(self, scenario: Scenario):
        self.capacity = scenario.queue_capacity_segments
        self.threshold = scenario.ecn_threshold_segments
        self.service = scenario.serialization_time_us()
        self.fifo: deque[tuple[int, int]] = deque()
        self.occupancy = 0
        self.last_dequeue_at: int | None = None
        self.nonempty_since_last_dequeue = False
        self.sends: dict[int, int] = {}
        self.drops: dict[int, int] = {}
        self.arrivals: dict[int, int] = {}
        self.stale_arrivals: dict[int, int] = {}
        self.dequeues: dict[int, int] = {}
        self.counts = InvariantCounts()

    def _check_flow_ledger(self, flow_id):
        # every send is either dropped, still queued, or dequeued; every
        # arrival was dequeued first
        queued = (self.sends.get(flow_id, 0) - self.drops.get(flow_id, 0)
                  - self.dequeues.get(flow_id, 0))
        assert queued >= 0, "more dequeues than admitted sends"
        propagating = self.dequeues.get(flow_id, 0) - self.arrivals.get(flow_id, 0)
        assert propagating >= 0, "ack without a prior dequeue"
        self.counts.conservation += 2

    def on_enqueue(self, t, flow_id, seq, result, occupancy):
        self.sends[flow_id] = self.sends.get(flow_id, 0) + 1
        before = self.occupancy
        if result is EnqueueResult.DROPPED:
            assert before == self.capacity, "drop against a non-full queue"
            assert occupancy == before
            self.drops[flow_id] = self.drops.get(flow_id, 0) + 1
        else:
            assert before < self.capacity
            if self.threshold is None:
                assert result is EnqueueResult.ACCEPTED
            elif before >= self.threshold:
                assert result is EnqueueResult.ACCEPTED_CE
            else:
                assert result is EnqueueResult.ACCEPTED
            self.occupancy = before + 1
            assert occupancy == self.occupancy
            self.fifo.append((flow_id, seq))
        assert 0 <= self.occupancy <= self.capacity
        self.counts.admission += 1
        self._check_flow_ledger(flow_id)

    def on_dequeue(self, t, flow_id, seq, occupancy):
        assert self.fifo, "dequeue from an empty queue"
        assert self.fifo.popleft() == (flow_id, seq), "FIFO order violated"
        self.occupancy -= 1
        assert occupancy == self.occupancy >= 0
        self.counts.fifo += 1
        if self.last_dequeue_at is not None and self.nonempty_since_last_dequeue:
            gap = t - self.last_dequeue_at
            assert abs(gap - self.service) <= 1, (
                f"busy queue served a segment {gap} us after the previous one, "
                f"expected {self.service}")
            self.counts.work_conservation += 1
        self.last_dequeue_at = t
        self.nonempty_since_last_dequeue = self.occupancy > 0
        self.dequeues[flow_id] = self.dequeues.get(flow_id, 0) + 1
        self._check_flow_ledger(flow_id)

    def on_ack(self, t, flow_id, seq, stale):
        self.arrivals[flow_id] = self.arrivals.get(flow_id, 0) + 1
        if stale:
            self.stale_arrivals[flow_id] = self.stale_arrivals.get(flow_id, 0) + 1
        self._check_flow_ledger(flow_id)


def check_scenario_invariants(scenario: Scenario) -> InvariantCounts:
    """Run one scenario under the invariant observer and verify per-flow
    segment conservation and per-row trace sanity afterwards."""
    obs = InvariantObserver(scenario)
    traces = run(scenario, observer=obs)
    counts = obs.counts
    min_ser = math.floor(scenario.serialization_time_us())
    for tr in traces:
        fid = tr.flow_id
        sent = obs.sends.get(fid, 0)
        dropped = obs.drops.get(fid, 0)
        arrived = obs.arrivals.get(fid, 0)
        dequeued = obs.dequeues.get(fid, 0)
        assert tr.segments_sent == sent
        assert tr.segments_dropped == dropped
        assert tr.segments_delivered == arrived
        # sent = dropped + still queued + dequeued; dequeued = arrived + in
        # propagation at the end of the run
        assert sent - dropped - dequeued >= 0
        assert dequeued - arrived >= 0
        assert tr.rtos >= 0 and tr.retransmits >= 0 and tr.losses_detected >= 0
        counts.conservation += 5
        spec = scenario.flows[fid]
        floor_rtt = spec.prop_delay_fwd_us + spec.prop_delay_rev_us + min_ser
        prev_t = 0
        prev_del = 0
        for rec in tr.records():
            assert rec.t_us >= prev_t
            assert rec.t_us <= scenario.sim_duration_us
            assert rec.rtt_us >= floor_rtt
            assert rec.cwnd_seg >= 1
            assert rec.inflight_seg >= 0
            assert rec.delivered_cum_seg == prev_del + 1
            assert rec.event in ("ack", "ack_ce")
            prev_t = rec.t_us
            prev_del = rec.delivered_cum_seg
            counts.trace_rows += 7
    # whatever was admitted and never served must still fit in the queue
    assert len(obs.fifo) == obs.occupancy <= scenario.queue_capacity_segments
    return counts


_ALGO_POOL = ("dstar", "dstar", "reno", "vegas", "bbr", "fixed")


def random_mini_scenario(rng: random.Random, idx: int) -> Scenario:
    """Small randomized scenario exercising drops, marks, mixed algorithms,
    staggered starts, and fractional service times."""
    rate = rng.choice((3_000_000, 7_000_000, 10_000_000, 25_000_000, 50_000_000))
    n_flows = rng.randint(1, 4)
    flows = []
    for _ in range(n_flows):
        algo = rng.choice(_ALGO_POOL)
        params = {"cwnd": rng.randint(1, 80)} if algo == "fixed" else {}
        flows.append(FlowSpec(
            algorithm=algo,
            start_time_us=rng.choice((0, 0, rng.randrange(300_000))),
            prop_delay_fwd_us=rng.randrange(500, 30_000),
            prop_delay_rev_us=rng.randrange(500, 30_000),
            params=params,
        ))
    return Scenario(
        name=f"mini_{idx}",
        bottleneck_rate_bps=rate,
        queue_capacity_segments=rng.randint(4, 120),
        sim_duration_us=rng.randrange(300_000, 1_500_000),
        flows=flows,
        ecn_threshold_segments=rng.choice((None, None, rng.randint(2, 40))),
        seed=rng.randrange(1 << 16),
        start_jitter_us=rng.choice((0, rng.randrange(100_000))),
    )


def run_invariant_suite(n_scenarios: int, seed: int = 20260818) -> InvariantCounts:
    rng = random.Random(seed)
    total = InvariantCounts()
    for idx in range(n_scenarios):
        total += check_scenario_invariants(random_mini_scenario(rng, idx))
    return total
