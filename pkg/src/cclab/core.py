"""Shared domain types and estimator primitives.

Unit conventions used across the package:

* time    -- integer microseconds since simulation start (``TimeUs``)
* windows -- integer MSS-sized segments (``SegmentCount``)
* rates   -- exact rationals in segments per second (``RatePps``)

Python integers never wrap, so microsecond arithmetic is overflow-safe, and
``fractions.Fraction`` keeps every rate and bandwidth-delay product exact.
All operations here are pure functions over plain values; controllers own
their state and the simulator serializes calls per flow.
"""
from __future__ import annotations

from fractions import Fraction
from typing import NamedTuple, Union

TimeUs = int
SegmentCount = int
RatePps = Fraction
RateLike = Union[Fraction, int, float]

US_PER_S = 1_000_000


class AckSample(NamedTuple):
    """Feedback handed to a congestion controller for one acknowledgment."""

    rtt: TimeUs
    newly_delivered: SegmentCount
    now: TimeUs
    ecn_ce: bool = False


class MinRttFilter(NamedTuple):
    """Running minimum over accepted round-trip-time samples.

    ``last_update`` records when the minimum last decreased (or the filter
    was seeded/reset); staleness checks compare against it, so a stream of
    equal samples does not keep the estimate fresh.
    """

    min_rtt: TimeUs | None = None
    last_update: TimeUs = 0

    def is_stale(self, now: TimeUs, timeout_us: TimeUs) -> bool:
        return self.min_rtt is not None and now - self.last_update > timeout_us


class BdpEstimate(NamedTuple):
    """Current and previous bandwidth-delay-product estimates, in segments."""

    bdp: SegmentCount = 0
    last_bdp: SegmentCount = 0


def update_min_rtt(filt: MinRttFilter, sample: TimeUs, now: TimeUs) -> MinRttFilter:
    """Fold one RTT sample into the running-minimum filter.

    Returns the same filter object when the sample does not lower the
    minimum; the staleness clock advances only on a strict decrease or on
    the first sample.
    """
    if sample <= 0:
        raise ValueError(f"rtt sample must be positive, got {sample}")
    if filt.min_rtt is None or sample < filt.min_rtt:
        return MinRttFilter(sample, now)
    return filt


def delivery_rate(delivered: SegmentCount, elapsed: TimeUs) -> RatePps:
    """Delivered segments over an interval, as an exact rate in segments/s."""
    if elapsed <= 0:
        raise ValueError("zero measurement interval")
    if delivered < 0:
        raise ValueError(f"delivered must be non-negative, got {delivered}")
    return Fraction(delivered * US_PER_S, elapsed)


def round_half_up(value: Fraction) -> int:
    # round-half-up for non-negative rationals: floor(value + 1/2)
    num, den = value.numerator, value.denominator
    return (2 * num + den) // (2 * den)


def compute_bdp(rate: RateLike, min_rtt: TimeUs) -> SegmentCount:
    """Bandwidth-delay product in whole segments, rounded half-up."""
    if min_rtt <= 0:
        raise ValueError(f"min_rtt must be positive, got {min_rtt}")
    product = Fraction(rate) * min_rtt / US_PER_S
    if product < 0:
        raise ValueError("rate must be non-negative")
    return round_half_up(product)
