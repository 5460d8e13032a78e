"""Controller interface and registry.

A congestion controller owns per-flow state and exposes:

* ``on_ack(sample)``  -- one call per acknowledgment, in event order
* ``on_loss(now)``    -- a detected-loss signal (triple later acks)
* ``on_rto(now)``     -- retransmission timeout
* ``current_cwnd()``  -- window in segments, gates new transmissions
* ``current_pacing_rate()`` -- segments/s, or None for unbounded
* ``current_mode()``  -- label recorded in traces

The simulator serializes all calls per flow; controllers never share state.
"""
from __future__ import annotations

from typing import Callable, Protocol

from cclab.baselines import RenoCca, SimpleBbrCca, VegasCca
from cclab.core import AckSample, RatePps, SegmentCount, TimeUs
from cclab.dstar import DstarCca


class CongestionControl(Protocol):
    algorithm: str

    def on_ack(self, ack: AckSample) -> None: ...

    def on_loss(self, now: TimeUs) -> None: ...

    def on_rto(self, now: TimeUs) -> None: ...

    def current_cwnd(self) -> SegmentCount: ...

    def current_pacing_rate(self) -> RatePps | None: ...

    def current_mode(self) -> str: ...


class FixedWindowCca:
    """Constant-window sender; no reaction to anything.

    Useful for pinning exact offered loads in experiments and tests.
    """

    algorithm = "fixed"

    def __init__(self, start_time: TimeUs = 0, cwnd: SegmentCount = 10):
        if cwnd < 1:
            raise ValueError(f"fixed window must be >= 1, got {cwnd}")
        self._cwnd = cwnd

    def on_ack(self, ack: AckSample) -> None:
        pass

    def on_loss(self, now: TimeUs) -> None:
        pass

    def on_rto(self, now: TimeUs) -> None:
        pass

    def current_cwnd(self) -> SegmentCount:
        return self._cwnd

    def current_pacing_rate(self) -> None:
        return None

    def current_mode(self) -> str:
        return "FIXED"


CcaFactory = Callable[..., CongestionControl]

ALGORITHMS: dict[str, CcaFactory] = {
    "dstar": DstarCca,
    "reno": RenoCca,
    "vegas": VegasCca,
    "bbr": SimpleBbrCca,
    "fixed": FixedWindowCca,
}


def make_cca(algorithm: str, start_time: TimeUs = 0, **params) -> CongestionControl:
    try:
        factory = ALGORITHMS[algorithm]
    except KeyError:
        known = ", ".join(sorted(ALGORITHMS))
        raise ValueError(f"unknown algorithm {algorithm!r} (known: {known})") from None
    return factory(start_time=start_time, **params)
