"""Window-only delay-based congestion controller ("dstar").

The controller never paces; the congestion window is the single control.
After an initial slow start it cycles through two measurement modes:

* GAIN_1 -- hold the window for two round trips so the path settles.
* GAIN_2 -- count delivered segments for one round trip, then re-estimate
  the delivery rate and the bandwidth-delay product (BDP), derive a new
  gain from the estimate's recent variability, and set
  ``snd_cwnd = BDP + gain_cwnd``.

If the minimum-RTT estimate has not decreased for 10 seconds by the time a
GAIN_2 measurement completes, the controller instead drops the window to the
floor (DRAIN) for two round trips, reseeds the minimum-RTT filter from the
latest sample, and then resumes the GAIN cycle.

Slow start runs the same settle/measure cycle but with
``gain_cwnd = max(floor, BDP // 2)``; it never drains, and it hands over to
GAIN_1 when a measurement fails to raise the BDP estimate or when loss or an
ECN congestion mark is observed.

Mode timers compare elapsed time against the most recent RTT sample, not the
filtered minimum, so they stretch automatically when the path is queued.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

from cclab.core import (
    AckSample,
    BdpEstimate,
    MinRttFilter,
    SegmentCount,
    TimeUs,
    US_PER_S,
    compute_bdp,
    delivery_rate,
    update_min_rtt,
)


class DstarMode(enum.Enum):
    SLOW_START = "SLOW_START"
    DRAIN = "DRAIN"
    GAIN_1 = "GAIN_1"
    GAIN_2 = "GAIN_2"


@dataclass(slots=True)
class DstarConfig:
    cwnd_floor: SegmentCount = 4
    min_rtt_timeout_us: TimeUs = 10 * US_PER_S
    # consecutive non-increasing BDP measurements required to leave slow start
    ss_exit_rounds: int = 1


@dataclass(slots=True)
class DstarState:
    mode: DstarMode
    snd_cwnd: SegmentCount
    gain_cwnd: SegmentCount
    bdp: BdpEstimate
    min_rtt: MinRttFilter
    mode_entered_at: TimeUs
    delivered_in_mode: SegmentCount
    last_rtt_sample: TimeUs
    # slow-start bookkeeping: settle/measure sub-phase and flat-round count
    ss_measuring: bool
    ss_flat_rounds: int
    config: DstarConfig = field(default_factory=DstarConfig)


def initial_state(now: TimeUs = 0, config: DstarConfig | None = None) -> DstarState:
    cfg = config or DstarConfig()
    return DstarState(
        mode=DstarMode.SLOW_START,
        snd_cwnd=cfg.cwnd_floor,
        gain_cwnd=cfg.cwnd_floor,
        bdp=BdpEstimate(0, 0),
        min_rtt=MinRttFilter(),
        mode_entered_at=now,
        delivered_in_mode=0,
        last_rtt_sample=0,
        ss_measuring=False,
        ss_flat_rounds=0,
        config=cfg,
    )


def _enter(state: DstarState, mode: DstarMode, now: TimeUs) -> None:
    state.mode = mode
    state.mode_entered_at = now
    state.delivered_in_mode = 0


def _gain_from_estimate(state: DstarState) -> SegmentCount:
    """Gain for the next cycle: floor + twice the BDP estimate's last jump,
    clamped into [floor, max(floor, BDP)]."""
    floor = state.config.cwnd_floor
    bdp, last = state.bdp
    sigma = abs(bdp - last)
    raw = floor + min(2 * sigma, bdp)
    return max(floor, min(raw, max(floor, bdp)))


def gain2_boundary(state: DstarState, now: TimeUs) -> DstarState:
    """Close a GAIN_2 measurement: re-estimate rate and BDP, derive the next
    gain, then either drain (stale minimum RTT) or start the next cycle."""
    if state.mode is not DstarMode.GAIN_2:
        raise ValueError(f"gain2_boundary requires GAIN_2, state is {state.mode.name}")
    elapsed = now - state.mode_entered_at
    rate = delivery_rate(state.delivered_in_mode, elapsed)
    new_bdp = compute_bdp(rate, state.min_rtt.min_rtt)
    state.bdp = BdpEstimate(new_bdp, state.bdp.bdp)
    state.gain_cwnd = _gain_from_estimate(state)
    if state.min_rtt.is_stale(now, state.config.min_rtt_timeout_us):
        state.snd_cwnd = state.config.cwnd_floor
        state.min_rtt = MinRttFilter(state.last_rtt_sample, now)
        _enter(state, DstarMode.DRAIN, now)
    else:
        state.snd_cwnd = state.bdp.bdp + state.gain_cwnd
        _enter(state, DstarMode.GAIN_1, now)
    return state


def exit_slow_start(state: DstarState, now: TimeUs) -> DstarState:
    """Leave slow start for the steady-state cycle on a congestion signal.

    The BDP estimate is kept; the gain restarts at the floor.
    """
    state.gain_cwnd = state.config.cwnd_floor
    state.snd_cwnd = state.bdp.bdp + state.gain_cwnd
    _enter(state, DstarMode.GAIN_1, now)
    return state


def slow_start_step(state: DstarState, ack: AckSample) -> DstarState:
    """One slow-start iteration: the settle/measure cycle with gain
    ``max(floor, BDP // 2)``, exiting on a congestion mark or once the BDP
    estimate stops increasing."""
    if ack.ecn_ce:
        return exit_slow_start(state, ack.now)
    now = ack.now
    elapsed = now - state.mode_entered_at
    if not state.ss_measuring:
        if elapsed > 2 * state.last_rtt_sample:
            state.ss_measuring = True
            state.mode_entered_at = now
            state.delivered_in_mode = 0
        return state
    if elapsed <= state.last_rtt_sample:
        return state
    rate = delivery_rate(state.delivered_in_mode, elapsed)
    new_bdp = compute_bdp(rate, state.min_rtt.min_rtt)
    state.bdp = BdpEstimate(new_bdp, state.bdp.bdp)
    if new_bdp <= state.bdp.last_bdp:
        state.ss_flat_rounds += 1
    else:
        state.ss_flat_rounds = 0
    if state.ss_flat_rounds >= state.config.ss_exit_rounds:
        state.gain_cwnd = _gain_from_estimate(state)
        state.snd_cwnd = state.bdp.bdp + state.gain_cwnd
        _enter(state, DstarMode.GAIN_1, now)
    else:
        floor = state.config.cwnd_floor
        state.gain_cwnd = max(floor, new_bdp // 2)
        state.snd_cwnd = new_bdp + state.gain_cwnd
        state.ss_measuring = False
        state.mode_entered_at = now
        state.delivered_in_mode = 0
    return state


def on_ack(state: DstarState, ack: AckSample) -> DstarState:
    """Per-acknowledgment update: fold the RTT sample into the minimum
    filter, account delivery while measuring, then run the mode step."""
    state.min_rtt = update_min_rtt(state.min_rtt, ack.rtt, ack.now)
    state.last_rtt_sample = ack.rtt
    mode = state.mode
    if mode is DstarMode.GAIN_2 or (mode is DstarMode.SLOW_START and state.ss_measuring):
        state.delivered_in_mode += ack.newly_delivered
    now = ack.now
    if mode is DstarMode.SLOW_START:
        return slow_start_step(state, ack)
    if mode is DstarMode.GAIN_1:
        if now - state.mode_entered_at > 2 * state.last_rtt_sample:
            _enter(state, DstarMode.GAIN_2, now)
        return state
    if mode is DstarMode.GAIN_2:
        if now - state.mode_entered_at > state.last_rtt_sample:
            return gain2_boundary(state, now)
        return state
    # DRAIN: hold the floor for two round trips, then resume the cycle
    if now - state.mode_entered_at > 2 * state.last_rtt_sample:
        state.snd_cwnd = state.bdp.bdp + state.gain_cwnd
        _enter(state, DstarMode.GAIN_1, now)
    return state


def on_rto(state: DstarState, now: TimeUs) -> DstarState:
    """Retransmission timeout: restart slow start from the window floor.

    The minimum-RTT filter value (and its staleness clock) survives; every
    other field is reset.
    """
    cfg = state.config
    state.mode = DstarMode.SLOW_START
    state.snd_cwnd = cfg.cwnd_floor
    state.gain_cwnd = cfg.cwnd_floor
    state.bdp = BdpEstimate(0, 0)
    state.mode_entered_at = now
    state.delivered_in_mode = 0
    state.last_rtt_sample = 0
    state.ss_measuring = False
    state.ss_flat_rounds = 0
    return state


class DstarCca:
    """Adapter giving the simulator its controller interface."""

    algorithm = "dstar"

    def __init__(self, start_time: TimeUs = 0,
                 config: DstarConfig | None = None, **overrides):
        if config is None:
            config = DstarConfig(**overrides)  # TypeError surfaces bad params
        elif overrides:
            raise TypeError("pass either config or keyword overrides, not both")
        self.state = initial_state(start_time, config)

    def on_ack(self, ack: AckSample) -> None:
        on_ack(self.state, ack)

    def on_loss(self, now: TimeUs) -> None:
        # loss never shrinks the window outside slow start; retransmission
        # is the simulator's job and only an RTO forces a restart
        if self.state.mode is DstarMode.SLOW_START:
            exit_slow_start(self.state, now)

    def on_rto(self, now: TimeUs) -> None:
        on_rto(self.state, now)

    def current_cwnd(self) -> SegmentCount:
        return self.state.snd_cwnd

    def current_pacing_rate(self) -> None:
        return None  # never paced

    def current_mode(self) -> str:
        return self.state.mode.value
