"""Reference congestion controllers the main algorithm is compared against.

Reno is the classic loss-based sawtooth, Vegas the classic delay-based
backlog controller, and SimpleBbr a deliberately reduced rate-based
controller: windowed-max bandwidth filter, shared minimum-RTT filter with
the same 10 s staleness rule as the main algorithm, a fixed pacing-gain
cycle, and a window capped at twice the estimated bandwidth-delay product.
None of these reproduce every detail of their production counterparts; they
are desk-scale references with the structure that matters for queue
behavior.
"""
from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction

from cclab.core import (
    AckSample,
    MinRttFilter,
    RatePps,
    SegmentCount,
    TimeUs,
    US_PER_S,
    compute_bdp,
    delivery_rate,
    update_min_rtt,
)

SSTHRESH_UNSET = 1 << 30


class RenoPhase(enum.Enum):
    SLOW_START = "SLOW_START"
    AVOIDANCE = "AVOIDANCE"
    RECOVERY = "RECOVERY"


@dataclass(slots=True)
class RenoState:
    cwnd: SegmentCount = 4
    ssthresh: SegmentCount = SSTHRESH_UNSET
    phase: RenoPhase = RenoPhase.SLOW_START
    ack_credit: int = 0  # sub-window growth accumulator for AVOIDANCE


def reno_on_ack(state: RenoState) -> RenoState:
    """Grow by one per ack in slow start, one per window in avoidance."""
    if state.phase is RenoPhase.SLOW_START:
        state.cwnd += 1
        if state.cwnd >= state.ssthresh:
            state.phase = RenoPhase.AVOIDANCE
    elif state.phase is RenoPhase.AVOIDANCE:
        state.ack_credit += 1
        if state.ack_credit >= state.cwnd:
            state.cwnd += 1
            state.ack_credit = 0
    else:  # RECOVERY holds the window until the episode closes
        state.phase = RenoPhase.AVOIDANCE
    return state


def reno_on_loss(state: RenoState) -> RenoState:
    """Multiplicative decrease: halve into ssthresh, floor of two segments."""
    state.ssthresh = max(state.cwnd // 2, 2)
    state.cwnd = state.ssthresh
    state.phase = RenoPhase.RECOVERY
    state.ack_credit = 0
    return state


class RenoCca:
    algorithm = "reno"

    def __init__(self, start_time: TimeUs = 0):
        self.state = RenoState()
        self._last_rtt: TimeUs = 0
        self._recovery_until: TimeUs = -1

    def on_ack(self, ack: AckSample) -> None:
        self._last_rtt = ack.rtt
        if ack.now < self._recovery_until:
            return  # one adjustment per loss episode; hold during recovery
        reno_on_ack(self.state)

    def on_loss(self, now: TimeUs) -> None:
        if now < self._recovery_until:
            return
        reno_on_loss(self.state)
        self._recovery_until = now + max(self._last_rtt, 1)

    def on_rto(self, now: TimeUs) -> None:
        self.state.ssthresh = max(self.state.cwnd // 2, 2)
        self.state.cwnd = 1
        self.state.phase = RenoPhase.SLOW_START
        self.state.ack_credit = 0
        self._recovery_until = -1

    def current_cwnd(self) -> SegmentCount:
        return self.state.cwnd

    def current_pacing_rate(self) -> None:
        return None

    def current_mode(self) -> str:
        return self.state.phase.value


@dataclass(slots=True)
class VegasState:
    """Backlog-targeting controller: keep between ``alpha`` and ``beta``
    own segments queued at the bottleneck, judged from
    ``cwnd * (rtt - base_rtt) / rtt``."""

    cwnd: SegmentCount = 4
    base_rtt: TimeUs | None = None
    alpha: int = 2
    beta: int = 4


def vegas_update(state: VegasState, rtt: TimeUs) -> VegasState:
    """Once-per-round-trip window adjustment by a single segment."""
    if state.base_rtt is None or rtt <= 0:
        return state
    diff = Fraction(state.cwnd * (rtt - state.base_rtt), rtt)
    if diff < state.alpha:
        state.cwnd += 1
    elif diff > state.beta:
        state.cwnd = max(2, state.cwnd - 1)
    return state


class VegasCca:
    algorithm = "vegas"

    def __init__(self, start_time: TimeUs = 0):
        self.state = VegasState()
        self._next_update: TimeUs = start_time
        self._recovery_until: TimeUs = -1
        self._last_rtt: TimeUs = 0

    def on_ack(self, ack: AckSample) -> None:
        self._last_rtt = ack.rtt
        st = self.state
        if st.base_rtt is None or ack.rtt < st.base_rtt:
            st.base_rtt = ack.rtt  # lifetime minimum, never reset
        if ack.now >= self._next_update:
            vegas_update(st, ack.rtt)
            self._next_update = ack.now + ack.rtt

    def on_loss(self, now: TimeUs) -> None:
        if now < self._recovery_until:
            return
        self.state.cwnd = max(2, self.state.cwnd // 2)
        self._recovery_until = now + max(self._last_rtt, 1)

    def on_rto(self, now: TimeUs) -> None:
        self.state.cwnd = 2

    def current_cwnd(self) -> SegmentCount:
        return self.state.cwnd

    def current_pacing_rate(self) -> None:
        return None

    def current_mode(self) -> str:
        return "AVOIDANCE"


PACING_GAIN_CYCLE: tuple[Fraction, ...] = (
    Fraction(5, 4),
    Fraction(3, 4),
    Fraction(1),
    Fraction(1),
    Fraction(1),
    Fraction(1),
    Fraction(1),
    Fraction(1),
)


@dataclass(slots=True)
class SimpleBbrState:
    btl_bw: RatePps = Fraction(0)
    min_rtt: MinRttFilter = field(default_factory=MinRttFilter)
    cwnd: SegmentCount = 4
    gain_index: int = 0
    draining: bool = False
    mode_entered_at: TimeUs = 0
    round_start: TimeUs = 0
    round_delivered: SegmentCount = 0
    samples: deque = field(default_factory=deque)  # (time, rate) pairs
    min_rtt_timeout_us: TimeUs = 10 * US_PER_S
    cwnd_floor: SegmentCount = 4


def _bbr_refresh_cwnd(state: SimpleBbrState) -> None:
    if state.btl_bw > 0 and state.min_rtt.min_rtt is not None:
        state.cwnd = max(state.cwnd_floor, 2 * compute_bdp(state.btl_bw, state.min_rtt.min_rtt))
    else:
        state.cwnd = state.cwnd_floor


def bbr_step(state: SimpleBbrState, ack: AckSample) -> SimpleBbrState:
    """Per-ack update: track the bandwidth ceiling as a windowed maximum of
    per-round delivery-rate samples, advance the pacing-gain cycle once per
    round trip, and mirror the main algorithm's floor-window drain when the
    minimum-RTT estimate goes stale."""
    now = ack.now
    state.min_rtt = update_min_rtt(state.min_rtt, ack.rtt, now)
    if state.draining:
        if now - state.mode_entered_at > 2 * ack.rtt:
            state.draining = False
            state.mode_entered_at = now
            state.round_start = now
            state.round_delivered = 0
            _bbr_refresh_cwnd(state)
        return state
    state.round_delivered += ack.newly_delivered
    if now - state.round_start > ack.rtt:
        rate = delivery_rate(state.round_delivered, now - state.round_start)
        state.samples.append((now, rate))
        horizon = 10 * (state.min_rtt.min_rtt or ack.rtt)
        while state.samples and state.samples[0][0] < now - horizon:
            state.samples.popleft()
        state.btl_bw = max(r for _, r in state.samples)
        state.round_start = now
        state.round_delivered = 0
        state.gain_index = (state.gain_index + 1) % len(PACING_GAIN_CYCLE)
        if state.min_rtt.is_stale(now, state.min_rtt_timeout_us):
            state.draining = True
            state.mode_entered_at = now
            state.cwnd = state.cwnd_floor
            state.min_rtt = MinRttFilter(ack.rtt, now)
            return state
        _bbr_refresh_cwnd(state)
    return state


class SimpleBbrCca:
    algorithm = "bbr"

    def __init__(self, start_time: TimeUs = 0):
        self.state = SimpleBbrState(mode_entered_at=start_time, round_start=start_time)

    def on_ack(self, ack: AckSample) -> None:
        bbr_step(self.state, ack)

    def on_loss(self, now: TimeUs) -> None:
        pass  # rate model, not loss-driven; retransmission is enough

    def on_rto(self, now: TimeUs) -> None:
        st = self.state
        st.btl_bw = Fraction(0)
        st.samples.clear()
        st.cwnd = st.cwnd_floor
        st.round_start = now
        st.round_delivered = 0
        st.draining = False

    def current_cwnd(self) -> SegmentCount:
        return self.state.cwnd

    def current_pacing_rate(self) -> RatePps | None:
        st = self.state
        if st.draining or st.btl_bw <= 0:
            return None
        return PACING_GAIN_CYCLE[st.gain_index] * st.btl_bw

    def current_mode(self) -> str:
        return "PROBE_RTT" if self.state.draining else "PROBE_BW"
