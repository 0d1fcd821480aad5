"""Stop-at-first-count coding schemes for the feedback channel.

Every scheme here has the same shape: message 0 is silence, and message
m >= 1 transmits at full power inside a dedicated time slot until the
first registered count, after which the encoder stays silent forever.
The decoder reports 0 when no counts arrived and otherwise the message
whose slot contains the first count.

Binary schemes use a single slot covering the whole window; M-ary schemes
split the window into M-1 equal slots.  The dark-window variants run the
same encoder in a short window so that spurious counts are unlikely.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .channel import ChannelParams
from .process import RateSegment, Timeline

__all__ = [
    "KINDS",
    "FirstCountSlotDecoder",
    "Scheme",
    "SchemeSpec",
    "SlotPolicy",
    "make_binary",
    "make_binary_dark",
    "make_mary",
    "make_mary_dark",
    "scheme_from_spec",
]

KINDS = (
    "binary-zero-dark",
    "binary-dark-window",
    "mary-zero-dark",
    "mary-dark-window",
)
_ZERO_DARK_KINDS = ("binary-zero-dark", "mary-zero-dark")
_BINARY_KINDS = ("binary-zero-dark", "binary-dark-window")


@dataclass(frozen=True)
class SchemeSpec:
    """Parameters of one scheme: kind, message count, power, window, dark rate."""

    kind: str
    M: int
    A: float
    horizon: float
    dark_current: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown scheme kind {self.kind!r}; choose from {KINDS}")
        if int(self.M) != self.M or self.M < 2:
            raise ValueError(f"M must be an integer >= 2, got {self.M}")
        if self.kind in _BINARY_KINDS and self.M != 2:
            raise ValueError(f"{self.kind} requires M = 2, got M = {self.M}")
        if not (self.A > 0.0) or math.isinf(self.A):
            raise ValueError(f"A must be finite and > 0, got {self.A}")
        if not (self.horizon > 0.0) or math.isinf(self.horizon):
            raise ValueError(f"horizon must be finite and > 0, got {self.horizon}")
        if not (self.dark_current >= 0.0) or math.isinf(self.dark_current):
            raise ValueError(f"dark_current must be finite and >= 0, got {self.dark_current}")
        if self.kind in _ZERO_DARK_KINDS and self.dark_current != 0.0:
            raise ValueError(f"{self.kind} requires dark_current = 0, got {self.dark_current}")

    def channel_params(self) -> ChannelParams:
        """Channel for this scheme, with the peak cap set to the scheme power."""
        return ChannelParams(dark_current=self.dark_current, peak_power=self.A)


@dataclass(frozen=True)
class SlotPolicy:
    """Rate A inside the message's slot until the first count, else zero.

    Slot m covers ``[(m-1) tau, m tau)`` with ``tau = horizon / (M - 1)``;
    the last slot ends exactly at the horizon.  After any registered count
    the rate is zero at every later query.
    """

    M: int
    A: float
    horizon: float

    def __call__(
        self,
        message: int,
        now: float,
        events: Sequence[float],
        rng: np.random.Generator,
    ) -> RateSegment:
        if not 0 <= message < self.M:
            raise ValueError(f"message must be in [0, {self.M}), got {message}")
        if message == 0 or events:
            return RateSegment(0.0, math.inf)
        tau = self.horizon / (self.M - 1)
        start = (message - 1) * tau
        end = self.horizon if message == self.M - 1 else message * tau
        if now < start:
            return RateSegment(0.0, start)
        if now < end:
            return RateSegment(self.A, end)
        return RateSegment(0.0, math.inf)


@dataclass(frozen=True)
class FirstCountSlotDecoder:
    """0 when no counts; otherwise the message of the first count's slot.

    A count exactly on a slot boundary is assigned to the earlier slot,
    which matches the half-open ``(start, end]`` segment convention of the
    channel.  With dark current, later counts are ignored (only the first
    count carries slot information under stop-at-first-count encoding).
    """

    M: int
    horizon: float

    def __call__(self, timeline: Timeline) -> int:
        if not timeline.events:
            return 0
        if self.M == 2:
            return 1
        tau = self.horizon / (self.M - 1)
        slot = math.ceil(timeline.events[0] / tau)
        return min(max(slot, 1), self.M - 1)


@dataclass(frozen=True)
class Scheme:
    """An encoder/decoder pair with its parameter bundle."""

    spec: SchemeSpec
    encoder: SlotPolicy
    decoder: FirstCountSlotDecoder


def scheme_from_spec(spec: SchemeSpec) -> Scheme:
    """Build the encoder/decoder bundle for a validated spec."""
    return Scheme(
        spec=spec,
        encoder=SlotPolicy(M=spec.M, A=spec.A, horizon=spec.horizon),
        decoder=FirstCountSlotDecoder(M=spec.M, horizon=spec.horizon),
    )


def make_binary(A: float, T: float) -> Scheme:
    """One-bit scheme without dark current: silence vs. full power until a count."""
    return scheme_from_spec(SchemeSpec("binary-zero-dark", 2, A, T))


def make_binary_dark(A: float, delta: float, dark_current: float) -> Scheme:
    """One-bit scheme run in a short window so spurious counts stay rare."""
    return scheme_from_spec(
        SchemeSpec("binary-dark-window", 2, A, delta, dark_current)
    )


def make_mary(M: int, A: float, T: float) -> Scheme:
    """M-message slot scheme without dark current."""
    return scheme_from_spec(SchemeSpec("mary-zero-dark", M, A, T))


def make_mary_dark(M: int, A: float, delta: float, dark_current: float) -> Scheme:
    """M-message slot scheme in a short window with dark current."""
    return scheme_from_spec(
        SchemeSpec("mary-dark-window", M, A, delta, dark_current)
    )
