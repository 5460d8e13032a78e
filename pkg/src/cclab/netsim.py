"""Deterministic discrete-event simulator: window/pacing-controlled bulk
flows sharing one drop-tail (optionally ECN-marking) bottleneck queue.

Model
-----
A flow's segment is enqueued at the bottleneck the instant the sender emits
it; the queue serves FIFO at the bottleneck rate (one serialization time per
segment), after which the segment propagates to the receiver and the
acknowledgment returns, so an unqueued round trip is
``serialization + prop_fwd + prop_rev``. Each delivered segment produces
exactly one acknowledgment; there are no delayed acks and the return path is
uncongested. A dropped segment is detected by the sender once three acks for
later-sent segments have arrived (classic triple-signal rule) or on a
retransmission timeout of ``max(4 * srtt, 200 ms)``, whichever comes first.

Event times are integer microseconds. Ties are broken by schedule order, so
reruns of the same scenario are bit-identical. The only randomness is the
optional seeded start-time jitter.
"""
from __future__ import annotations

import enum
import random
from array import array
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from heapq import heappop, heappush
from itertools import count
from typing import NamedTuple, Sequence

from cclab.cca import make_cca
from cclab.core import AckSample, SegmentCount, TimeUs, US_PER_S, round_half_up

DUP_ACK_THRESHOLD = 3
RTO_MIN_US = 200_000
RTO_INITIAL_US = 1_000_000


class ScenarioError(ValueError):
    """Scenario validation failure, naming the offending field."""

    def __init__(self, fieldpath: str, message: str):
        self.field = fieldpath
        self.message = message
        super().__init__(f"{fieldpath}: {message}")


class EventKind(enum.IntEnum):
    SEND_ELIGIBLE = 0
    ENQUEUE = 1  # synchronous with the send; appears in observer records
    DEQUEUE_COMPLETE = 2
    ACK_ARRIVAL = 3
    RTO_FIRE = 4
    FLOW_START = 5


class EnqueueResult(enum.Enum):
    ACCEPTED = "ACCEPTED"
    ACCEPTED_CE = "ACCEPTED_CE"
    DROPPED = "DROPPED"


@dataclass(slots=True)
class FlowSpec:
    algorithm: str
    start_time_us: TimeUs = 0
    duration_us: TimeUs | None = None
    prop_delay_fwd_us: TimeUs = 15_000
    prop_delay_rev_us: TimeUs = 15_000
    params: dict = field(default_factory=dict)


@dataclass(slots=True)
class Scenario:
    name: str
    bottleneck_rate_bps: int
    queue_capacity_segments: SegmentCount
    sim_duration_us: TimeUs
    flows: list[FlowSpec]
    mss_bytes: int = 1500
    ecn_threshold_segments: SegmentCount | None = None
    seed: int = 0
    start_jitter_us: TimeUs = 0

    def serialization_time_us(self) -> Fraction:
        return Fraction(self.mss_bytes * 8 * US_PER_S, self.bottleneck_rate_bps)

    def path_bdp_segments(self, flow: FlowSpec) -> SegmentCount:
        """True bandwidth-delay product of one flow's path, in segments."""
        rtt = flow.prop_delay_fwd_us + flow.prop_delay_rev_us
        return round_half_up(Fraction(self.bottleneck_rate_bps * rtt, 8 * self.mss_bytes * US_PER_S))

    def validate(self) -> None:
        if not self.name:
            raise ScenarioError("name", "must be a non-empty string")
        if self.bottleneck_rate_bps <= 0:
            raise ScenarioError("bottleneck_rate_bps", f"must be > 0, got {self.bottleneck_rate_bps}")
        if self.mss_bytes <= 0:
            raise ScenarioError("mss_bytes", f"must be > 0, got {self.mss_bytes}")
        if self.queue_capacity_segments < 1:
            raise ScenarioError(
                "queue_capacity_segments", f"must be >= 1, got {self.queue_capacity_segments}"
            )
        if self.ecn_threshold_segments is not None and self.ecn_threshold_segments < 1:
            raise ScenarioError(
                "ecn_threshold_segments", f"must be >= 1 or absent, got {self.ecn_threshold_segments}"
            )
        if self.sim_duration_us <= 0:
            raise ScenarioError("sim_duration_us", f"must be > 0, got {self.sim_duration_us}")
        if self.seed < 0:
            raise ScenarioError("seed", f"must be >= 0, got {self.seed}")
        if self.start_jitter_us < 0:
            raise ScenarioError("start_jitter_us", f"must be >= 0, got {self.start_jitter_us}")
        for i, fl in enumerate(self.flows):
            where = f"flows[{i}]"
            if fl.start_time_us < 0:
                raise ScenarioError(f"{where}.start_time_us", "must be >= 0")
            if fl.duration_us is not None and fl.duration_us <= 0:
                raise ScenarioError(f"{where}.duration_us", "must be > 0 or absent")
            if fl.prop_delay_fwd_us < 0 or fl.prop_delay_rev_us < 0:
                raise ScenarioError(f"{where}.prop_delay_fwd_us", "propagation delays must be >= 0")
            try:
                make_cca(fl.algorithm, start_time=fl.start_time_us, **fl.params)
            except (ValueError, TypeError) as exc:
                raise ScenarioError(f"{where}.algorithm", str(exc)) from None


class BottleneckQueue:
    """FIFO drop-tail queue serving one segment per serialization time.

    ``busy_until`` is kept exact (a rational when the serialization time is
    not a whole number of microseconds), so back-to-back service never
    drifts; completion events are rounded half-up to the microsecond grid.
    """

    __slots__ = ("capacity", "ecn_threshold", "occupancy", "busy_until",
                 "_ser", "_int_service", "serviced", "dropped")

    def __init__(self, capacity: SegmentCount, service_time_us: Fraction,
                 ecn_threshold: SegmentCount | None = None):
        if capacity < 1:
            raise ValueError(f"queue capacity must be >= 1, got {capacity}")
        if service_time_us <= 0:
            raise ValueError("service time must be positive")
        self.capacity = capacity
        self.ecn_threshold = ecn_threshold
        self.occupancy = 0
        self._int_service = service_time_us.denominator == 1
        self._ser = int(service_time_us) if self._int_service else service_time_us
        self.busy_until = 0 if self._int_service else Fraction(0)
        self.serviced = 0
        self.dropped = 0

    def enqueue(self, now: TimeUs) -> tuple[EnqueueResult, TimeUs | None]:
        """Admit one segment; returns the result and, when accepted, the
        microsecond at which its service completes."""
        occ = self.occupancy
        if occ >= self.capacity:
            self.dropped += 1
            return EnqueueResult.DROPPED, None
        thresh = self.ecn_threshold
        result = (EnqueueResult.ACCEPTED_CE
                  if thresh is not None and occ >= thresh else EnqueueResult.ACCEPTED)
        busy = self.busy_until
        end = (busy if busy > now else now) + self._ser
        self.busy_until = end
        self.occupancy = occ + 1
        return result, (end if self._int_service else round_half_up(end))

    def dequeue_complete(self) -> None:
        self.occupancy -= 1
        self.serviced += 1


class TraceRecord(NamedTuple):
    t_us: TimeUs
    rtt_us: TimeUs
    cwnd_seg: SegmentCount
    inflight_seg: SegmentCount
    mode: str
    delivered_cum_seg: SegmentCount
    event: str


class FlowTrace:
    """Column-oriented per-acknowledgment record of one flow, plus end-of-run
    loss/retransmission counters."""

    __slots__ = ("flow_id", "algorithm", "mss_bytes", "t_us", "rtt_us", "cwnd_seg",
                 "inflight_seg", "delivered_cum_seg", "mode_codes", "mode_table",
                 "ce_flags", "segments_sent", "segments_delivered", "segments_dropped",
                 "losses_detected", "retransmits", "rtos")

    def __init__(self, flow_id: int, algorithm: str, mss_bytes: int):
        self.flow_id = flow_id
        self.algorithm = algorithm
        self.mss_bytes = mss_bytes
        self.t_us = array("q")
        self.rtt_us = array("q")
        self.cwnd_seg = array("q")
        self.inflight_seg = array("q")
        self.delivered_cum_seg = array("q")
        self.mode_codes = array("h")
        self.mode_table: list[str] = []
        self.ce_flags = array("b")
        self.segments_sent = 0
        self.segments_delivered = 0
        self.segments_dropped = 0
        self.losses_detected = 0
        self.retransmits = 0
        self.rtos = 0

    def __len__(self) -> int:
        return len(self.t_us)

    def record(self, i: int) -> TraceRecord:
        return TraceRecord(
            self.t_us[i], self.rtt_us[i], self.cwnd_seg[i], self.inflight_seg[i],
            self.mode_table[self.mode_codes[i]], self.delivered_cum_seg[i],
            "ack_ce" if self.ce_flags[i] else "ack",
        )

    def records(self):
        for i in range(len(self.t_us)):
            yield self.record(i)


class SimObserver:
    """Optional instrumentation hooks; subclass and override what you need.

    ``on_enqueue`` fires for every transmission attempt (result tells
    accepted/marked/dropped), ``on_dequeue`` when the queue finishes serving
    a segment, ``on_ack`` when the acknowledgment reaches the sender.
    Occupancy is reported after the state change.
    """

    def on_enqueue(self, t: TimeUs, flow_id: int, seq: int,
                   result: EnqueueResult, occupancy: int) -> None:
        pass

    def on_dequeue(self, t: TimeUs, flow_id: int, seq: int, occupancy: int) -> None:
        pass

    def on_ack(self, t: TimeUs, flow_id: int, seq: int, stale: bool) -> None:
        pass


class _Flow:
    __slots__ = ("idx", "spec", "start", "send_end", "active", "cca", "fwd", "rev",
                 "next_seq", "txid", "outstanding", "rtx", "delivered_cum",
                 "srtt", "rto_deadline", "rto_armed", "pacing_next", "send_pending",
                 "trace")

    def __init__(self, idx: int, spec: FlowSpec, start: TimeUs, end_us: TimeUs, mss: int):
        self.idx = idx
        self.spec = spec
        self.start = start
        self.send_end = end_us + 1 if spec.duration_us is None else start + spec.duration_us
        self.active = False
        self.cca = make_cca(spec.algorithm, start_time=start, **spec.params)
        self.fwd = spec.prop_delay_fwd_us
        self.rev = spec.prop_delay_rev_us
        self.next_seq = 0
        self.txid = 0
        self.outstanding: dict[int, list] = {}  # seq -> [txid, send_time, later_acks]
        self.rtx: deque[int] = deque()
        self.delivered_cum = 0
        self.srtt: TimeUs | None = None
        self.rto_deadline = 0
        self.rto_armed = False
        self.pacing_next: TimeUs | Fraction = 0
        self.send_pending = False
        self.trace = FlowTrace(idx, spec.algorithm, mss)

    def rto_interval(self) -> TimeUs:
        if self.srtt is None:
            return RTO_INITIAL_US
        return max(4 * self.srtt, RTO_MIN_US)


def run(scenario: Scenario, observer: SimObserver | None = None) -> list[FlowTrace]:
    """Simulate the scenario and return one trace per flow (scenario order).

    Reruns are bit-identical: events are processed in (time, schedule-order)
    order and all arithmetic is integer or exact-rational.
    """
    scenario.validate()
    end_us = scenario.sim_duration_us
    queue = BottleneckQueue(
        scenario.queue_capacity_segments,
        scenario.serialization_time_us(),
        scenario.ecn_threshold_segments,
    )
    rng = random.Random(scenario.seed)
    jitter = scenario.start_jitter_us
    flows = []
    for idx, spec in enumerate(scenario.flows):
        start = spec.start_time_us + (rng.randrange(jitter + 1) if jitter else 0)
        flows.append(_Flow(idx, spec, start, end_us, scenario.mss_bytes))

    heap: list[tuple] = []
    tick = count()
    K_SEND, K_DEQ, K_ACK, K_RTO, K_START = (
        int(EventKind.SEND_ELIGIBLE), int(EventKind.DEQUEUE_COMPLETE),
        int(EventKind.ACK_ARRIVAL), int(EventKind.RTO_FIRE), int(EventKind.FLOW_START),
    )
    ACCEPT_CE = EnqueueResult.ACCEPTED_CE
    DROP = EnqueueResult.DROPPED

    for fl in flows:
        heappush(heap, (fl.start, next(tick), K_START, fl.idx, 0, 0))

    def pump(fl: _Flow, now: TimeUs) -> None:
        # transmit retransmissions first, then new data, while the window
        # and (for paced flows) the pacing clock allow
        cca = fl.cca
        cwnd = cca.current_cwnd()
        out = fl.outstanding
        rtx = fl.rtx
        rate = cca.current_pacing_rate()
        interval = None if rate is None else Fraction(US_PER_S) / rate
        tr = fl.trace
        while len(out) < cwnd and (rtx or (now < fl.send_end)):
            if interval is not None:
                nxt = fl.pacing_next
                if now < nxt:
                    if not fl.send_pending:
                        fl.send_pending = True
                        at = nxt if isinstance(nxt, int) else -(-nxt.numerator // nxt.denominator)
                        heappush(heap, (at, next(tick), K_SEND, fl.idx, 0, 0))
                    break
                fl.pacing_next = (nxt if nxt > now else now) + interval
            if rtx:
                seq = rtx.popleft()
                tr.retransmits += 1
            else:
                seq = fl.next_seq
                fl.next_seq += 1
            txid = fl.txid
            fl.txid = txid + 1
            out[seq] = [txid, now, 0]
            tr.segments_sent += 1
            result, done_at = queue.enqueue(now)
            if observer is not None:
                observer.on_enqueue(now, fl.idx, seq, result, queue.occupancy)
            if result is DROP:
                tr.segments_dropped += 1
            else:
                heappush(heap, (done_at, next(tick), K_DEQ, fl.idx, seq,
                                txid * 2 + (1 if result is ACCEPT_CE else 0)))
        if out and not fl.rto_armed:
            fl.rto_armed = True
            fl.rto_deadline = now + fl.rto_interval()
            heappush(heap, (fl.rto_deadline, next(tick), K_RTO, fl.idx, 0, 0))

    while heap:
        ev = heap[0]
        if ev[0] > end_us:
            break
        heappop(heap)
        now, _, kind, fidx, a, b = ev
        fl = flows[fidx]
        if kind == K_ACK:
            tr = fl.trace
            tr.segments_delivered += 1
            ent = fl.outstanding.get(a)
            if ent is None or ent[0] != b >> 1:
                # a retransmission superseded this copy; account it, ignore it
                if observer is not None:
                    observer.on_ack(now, fidx, a, True)
                continue
            out = fl.outstanding
            lost = None
            if next(iter(out)) != a:
                # earlier-sent segments still unacked can only be drops
                # (service is FIFO); count this later ack against them
                for s, e in out.items():
                    if s == a:
                        break
                    e[2] += 1
                    if e[2] == DUP_ACK_THRESHOLD:
                        if lost is None:
                            lost = [s]
                        else:
                            lost.append(s)
            rtt = now - ent[1]
            del out[a]
            fl.delivered_cum += 1
            srtt = fl.srtt
            fl.srtt = rtt if srtt is None else (7 * srtt + rtt) // 8
            fl.rto_deadline = now + fl.rto_interval()
            cca = fl.cca
            if lost:
                for s in lost:
                    del out[s]
                fl.rtx.extend(lost)
                tr.losses_detected += len(lost)
                cca.on_loss(now)
            ce = b & 1
            cca.on_ack(AckSample(rtt, 1, now, bool(ce)))
            pump(fl, now)
            mode = cca.current_mode()
            table = tr.mode_table
            try:
                mcode = table.index(mode)
            except ValueError:
                mcode = len(table)
                table.append(mode)
            tr.t_us.append(now)
            tr.rtt_us.append(rtt)
            tr.cwnd_seg.append(cca.current_cwnd())
            tr.inflight_seg.append(len(out))
            tr.delivered_cum_seg.append(fl.delivered_cum)
            tr.mode_codes.append(mcode)
            tr.ce_flags.append(ce)
            if observer is not None:
                observer.on_ack(now, fidx, a, False)
        elif kind == K_DEQ:
            queue.dequeue_complete()
            if observer is not None:
                observer.on_dequeue(now, fidx, a, queue.occupancy)
            heappush(heap, (now + fl.fwd + fl.rev, next(tick), K_ACK, fidx, a, b))
        elif kind == K_SEND:
            fl.send_pending = False
            if fl.active:
                pump(fl, now)
        elif kind == K_RTO:
            fl.rto_armed = False
            if fl.outstanding:
                if now < fl.rto_deadline:
                    fl.rto_armed = True
                    heappush(heap, (fl.rto_deadline, next(tick), K_RTO, fidx, 0, 0))
                else:
                    tr = fl.trace
                    tr.rtos += 1
                    tr.losses_detected += len(fl.outstanding)
                    fl.rtx.extend(fl.outstanding)  # send order
                    fl.outstanding.clear()
                    fl.cca.on_rto(now)
                    fl.rto_deadline = now + fl.rto_interval()
                    pump(fl, now)
        else:  # K_START
            fl.active = True
            pump(fl, now)

    return [fl.trace for fl in flows]


class FlowLoad(NamedTuple):
    """One flow's contribution to the shared queue: in-flight segments, its
    bandwidth-delay product, and its delivery rate (segments/s)."""

    inflight: float | Fraction
    bdp: float | Fraction
    rate: float | Fraction


def model_rtt(loads: Sequence[FlowLoad], min_rtts: Sequence[TimeUs]) -> list[TimeUs]:
    """Closed-form round-trip times for flows sharing one bottleneck.

    Every in-flight segment beyond a flow's bandwidth-delay product is
    waiting in the shared queue, which all flows drain together, so each
    flow's RTT is its own propagation floor plus the common queue term:

        rtt_i = min_rtt_i + sum_j(inflight_j - bdp_j) / sum_j(rate_j)
    """
    if len(loads) != len(min_rtts):
        raise ValueError("loads and min_rtts must have equal length")
    total_rate = sum(Fraction(ld.rate) for ld in loads)
    if total_rate <= 0:
        raise ValueError("zero aggregate delivery rate")
    excess = sum(Fraction(ld.inflight) - Fraction(ld.bdp) for ld in loads)
    queue_us = excess * US_PER_S / total_rate
    return [m + round_half_up(queue_us) for m in min_rtts]
