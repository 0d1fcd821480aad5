"""Exact sampling of piecewise-constant Poisson point processes.

Counting processes are represented as ordered event times on a finite
horizon.  All randomness flows through :class:`RandomSource`, a
(seed, stream) pair backed by the counter-based Philox bit generator, so
that distinct streams are independent and every draw is reproducible.

Conventions: time and intensity are dimensionless floats; an interval
``(a, b]`` is half-open on the left, so an event landing exactly on a
segment boundary belongs to the expiring segment.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import NamedTuple, Union

import numpy as np

__all__ = [
    "DEFAULT_MAX_EVENTS",
    "RandomSource",
    "RateSegment",
    "Timeline",
    "as_generator",
    "poisson_pmf",
    "sample_homogeneous",
    "sample_next_event",
]

# Hard cap on events per realization; exceeding it raises instead of truncating.
DEFAULT_MAX_EVENTS = 1_000_000

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RandomSource:
    """A reproducible, independent random stream identified by (seed, stream).

    Identical pairs reproduce identical draws; distinct ``stream`` values
    index independent streams of the same seed (Philox keyed on both words).
    """

    seed: int
    stream: int = 0

    def generator(self) -> np.random.Generator:
        key = np.array([self.seed & _MASK64, self.stream & _MASK64], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))


GeneratorLike = Union[RandomSource, np.random.Generator]


def as_generator(rng: GeneratorLike) -> np.random.Generator:
    """Coerce a RandomSource or an already-built Generator to a Generator."""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RandomSource):
        return rng.generator()
    raise TypeError(f"expected RandomSource or numpy Generator, got {type(rng)!r}")


class RateSegment(NamedTuple):
    """A constant intensity in force on ``(issue time, valid_until]``."""

    rate: float
    valid_until: float


@dataclass
class Timeline:
    """Ordered event times of a counting process on ``[0, horizon]``."""

    horizon: float
    events: tuple[float, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        if not (self.horizon >= 0.0) or math.isinf(self.horizon):
            raise ValueError(f"horizon must be finite and >= 0, got {self.horizon}")
        prev = -math.inf
        for t in self.events:
            if not (0.0 <= t <= self.horizon):
                raise ValueError(f"event time {t} outside [0, {self.horizon}]")
            if t <= prev:
                raise ValueError("events must be strictly increasing")
            prev = t

    def count(self, a: float, b: float) -> int:
        """Number of events in the half-open interval ``(a, b]``."""
        if not 0.0 <= a <= b <= self.horizon:
            raise ValueError(f"need 0 <= a <= b <= horizon, got ({a}, {b}]")
        return bisect_right(self.events, b) - bisect_right(self.events, a)

    @property
    def first(self) -> float | None:
        return self.events[0] if self.events else None

    def __len__(self) -> int:
        return len(self.events)


def _require_finite_nonneg(value: float, name: str) -> float:
    value = float(value)
    if not (value >= 0.0) or math.isinf(value):
        raise ValueError(f"{name} must be finite and >= 0, got {value}")
    return value


def sample_homogeneous(
    rate: float,
    horizon: float,
    rng: GeneratorLike,
    *,
    max_events: int = DEFAULT_MAX_EVENTS,
) -> Timeline:
    """Draw one realization of a constant-rate Poisson process on ``[0, horizon]``.

    Events are generated as cumulative sums of exponential inter-arrival
    times, which is exact for a constant intensity (no thinning involved).

    Parameters
    ----------
    rate : float
        Intensity in counts per unit time, >= 0.
    horizon : float
        Length of the observation window, >= 0 and finite.
    rng : RandomSource or numpy Generator
        Source of randomness.

    Returns
    -------
    Timeline
        The realized event times, strictly increasing in ``(0, horizon]``.
    """
    rate = _require_finite_nonneg(rate, "rate")
    horizon = _require_finite_nonneg(horizon, "horizon")
    if rate == 0.0 or horizon == 0.0:
        return Timeline(horizon, ())

    gen = as_generator(rng)
    mean_count = rate * horizon
    if mean_count > max_events:
        raise ValueError(
            f"expected count {mean_count:.3g} exceeds max_events={max_events}"
        )
    block = int(mean_count + 10.0 * math.sqrt(mean_count) + 16.0)
    times: list[float] = []
    t = 0.0
    while True:
        gaps = gen.standard_exponential(block) / rate
        cum = t + np.cumsum(gaps)
        inside = int(np.searchsorted(cum, horizon, side="right"))
        times.extend(cum[:inside].tolist())
        if len(times) > max_events:
            raise ValueError(f"realization exceeded max_events={max_events}")
        if inside < block:
            break
        t = float(cum[-1])
        block = max(16, block // 4)
    return Timeline(horizon, tuple(times))


def sample_next_event(
    current_time: float,
    segment: RateSegment,
    rng: GeneratorLike,
) -> float | None:
    """Sample the next event of a constant-rate segment, if it lands in time.

    Returns ``current_time + E`` with ``E`` exponential of mean ``1/rate``
    when that time is at most ``segment.valid_until``; otherwise ``None``
    ("no event before the segment expires").  A zero rate never produces an
    event and consumes no randomness.
    """
    rate = float(segment.rate)
    until = float(segment.valid_until)
    if not (rate >= 0.0) or math.isinf(rate):
        raise ValueError(f"segment rate must be finite and >= 0, got {rate}")
    if not current_time < until:
        raise ValueError(
            f"current_time {current_time} must precede valid_until {until}"
        )
    if rate == 0.0:
        return None
    t = current_time + as_generator(rng).standard_exponential() / rate
    return t if t <= until else None


def poisson_pmf(mean: float, count: int) -> float:
    """Probability that a Poisson variable of the given mean equals ``count``.

    Evaluated in log space so large means and counts stay finite.
    """
    mean = _require_finite_nonneg(mean, "mean")
    if isinstance(count, float) and not count.is_integer():
        raise ValueError(f"count must be an integer, got {count}")
    count = int(count)
    if count < 0:
        raise ValueError(f"count must be >= 0, got {count}")
    if mean == 0.0:
        return 1.0 if count == 0 else 0.0
    return math.exp(count * math.log(mean) - mean - math.lgamma(count + 1))
