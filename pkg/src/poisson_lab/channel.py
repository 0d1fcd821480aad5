"""Closed-loop simulation of the photon-counting channel with count feedback.

An encoder policy is a callable ``policy(message, now, events, rng)``
returning a :class:`RateSegment`.  The engine queries it only at time 0,
at each registered count, and at each segment expiry; the returned rate
governs the half-open interval ``(now, valid_until]``.  Because a segment
is fixed before the interval it covers, the transmitted intensity on any
interval depends only on counts strictly before it — policies cannot see
the future by construction.

The channel adds the dark-current rate on top of the policy rate and
generates counts exactly via exponential inter-arrival sampling, restarted
at every query point (memorylessness makes the restart exact).  Counts are
fed back instantly: the ``events`` list passed to the policy always holds
every count up to ``now``.  Transmitted energy is accumulated exactly as
rate times elapsed time, excluding the dark current, which produces counts
but costs nothing.

Weight processes (``weight(now, events, rng)``) follow the same query
protocol and are used to check the defining identity of the intensity:
the expected weighted count equals the expected time integral of weight
times total intensity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Protocol, Sequence

import numpy as np

from .analytics import Estimate, RunningMean
from .process import (
    DEFAULT_MAX_EVENTS,
    GeneratorLike,
    RateSegment,
    Timeline,
    as_generator,
)

__all__ = [
    "ChannelParams",
    "EncoderPolicy",
    "IdentityReport",
    "PolicyViolationError",
    "RunawayIntensityError",
    "TrialResult",
    "WeightProcess",
    "path_energy",
    "run_trial",
    "verify_intensity_identity",
]

# Expiry re-queries are also capped so an adversarial policy that shrinks
# its segments cannot hang a trial.
DEFAULT_MAX_QUERIES = 1_000_000


class PolicyViolationError(RuntimeError):
    """A policy or weight broke its contract (negative rate, peak, stale segment)."""


class RunawayIntensityError(RuntimeError):
    """A trial exceeded the event or query cap instead of being truncated."""


class EncoderPolicy(Protocol):
    def __call__(
        self,
        message: int,
        now: float,
        events: Sequence[float],
        rng: np.random.Generator,
    ) -> RateSegment: ...


class WeightProcess(Protocol):
    def __call__(
        self,
        now: float,
        events: Sequence[float],
        rng: np.random.Generator,
    ) -> RateSegment: ...


@dataclass(frozen=True)
class ChannelParams:
    """Dark-current rate and optional peak-power cap on policy rates."""

    dark_current: float = 0.0
    peak_power: float | None = None

    def __post_init__(self) -> None:
        if not (self.dark_current >= 0.0) or math.isinf(self.dark_current):
            raise ValueError(f"dark_current must be finite and >= 0, got {self.dark_current}")
        if self.peak_power is not None and not (self.peak_power > 0.0):
            raise ValueError(f"peak_power must be > 0 when set, got {self.peak_power}")


@dataclass
class TrialResult:
    """One simulated transmission; decoded/correct are filled by a decoder."""

    message: int
    timeline: Timeline
    energy: float
    decoded: int | None = None
    correct: bool | None = None


def path_energy(segments: Sequence[tuple[float, float]]) -> float:
    """Exact energy of traversed (rate, duration) pieces: sum of products."""
    total = 0.0
    for rate, duration in segments:
        if not (duration >= 0.0):
            raise ValueError(f"segment duration must be >= 0, got {duration}")
        if not (rate >= 0.0):
            raise ValueError(f"segment rate must be >= 0, got {rate}")
        total += rate * duration
    return total


def _checked_segment(
    seg: RateSegment, now: float, peak: float | None, what: str
) -> tuple[float, float]:
    rate = float(seg[0])
    until = float(seg[1])
    if not (rate >= 0.0) or math.isinf(rate):
        raise PolicyViolationError(f"{what} returned rate {rate}; must be finite and >= 0")
    if peak is not None and rate > peak:
        raise PolicyViolationError(f"{what} returned rate {rate} above the peak cap {peak}")
    if not until > now:
        raise PolicyViolationError(
            f"{what} returned valid_until {until} not beyond its issue time {now}"
        )
    return rate, until


def _drive(
    policy: EncoderPolicy,
    weight: Optional[WeightProcess],
    message: int,
    params: ChannelParams,
    horizon: float,
    gen: np.random.Generator,
    max_events: int,
    max_queries: int,
) -> tuple[list[float], float, float, float]:
    """Run one closed-loop path; returns (events, energy, lhs, rhs).

    ``lhs`` sums the weight value in force at each count; ``rhs`` is the
    exact path integral of weight times total intensity.  Both are zero
    when no weight is supplied.
    """
    lam0 = params.dark_current
    peak = params.peak_power
    exp = gen.standard_exponential

    events: list[float] = []
    energy = 0.0
    lhs = 0.0
    rhs = 0.0
    queries = 0
    t = 0.0

    prate, puntil = _checked_segment(policy(message, t, events, gen), t, peak, "policy")
    if weight is not None:
        wval, wuntil = _checked_segment(weight(t, events, gen), t, None, "weight")
    else:
        wval = 0.0
        wuntil = math.inf

    while True:
        seg_end = puntil if puntil < horizon else horizon
        if wuntil < seg_end:
            seg_end = wuntil
        total = prate + lam0
        if total > 0.0:
            t_event = t + exp() / total
        else:
            t_event = math.inf

        if t_event <= seg_end:
            dt = t_event - t
            energy += prate * dt
            if weight is not None:
                rhs += wval * total * dt
                lhs += wval
            events.append(t_event)
            if len(events) > max_events:
                raise RunawayIntensityError(
                    f"trial exceeded max_events={max_events} counts"
                )
            t = t_event
            if t >= horizon:
                break
            queries += 1
            prate, puntil = _checked_segment(
                policy(message, t, events, gen), t, peak, "policy"
            )
            if weight is not None:
                wval, wuntil = _checked_segment(weight(t, events, gen), t, None, "weight")
        else:
            dt = seg_end - t
            energy += prate * dt
            if weight is not None:
                rhs += wval * total * dt
            t = seg_end
            if t >= horizon:
                break
            if puntil <= t:
                queries += 1
                prate, puntil = _checked_segment(
                    policy(message, t, events, gen), t, peak, "policy"
                )
            if wuntil <= t:
                queries += 1
                wval, wuntil = _checked_segment(weight(t, events, gen), t, None, "weight")

        if queries > max_queries:
            raise RunawayIntensityError(
                f"trial exceeded max_queries={max_queries} policy queries"
            )

    return events, energy, lhs, rhs


def run_trial(
    policy: EncoderPolicy,
    message: int,
    params: ChannelParams,
    horizon: float,
    rng: GeneratorLike,
    *,
    max_events: int = DEFAULT_MAX_EVENTS,
    max_queries: int = DEFAULT_MAX_QUERIES,
) -> TrialResult:
    """Simulate one transmission of ``message`` under ``policy``.

    The realized timeline has intensity (policy rate + dark current) on
    every inter-query interval; the reported energy integrates the policy
    rate only, exactly.  Decoding is left to the caller.
    """
    if not (horizon > 0.0) or math.isinf(horizon):
        raise ValueError(f"horizon must be finite and > 0, got {horizon}")
    gen = as_generator(rng)
    events, energy, _, _ = _drive(
        policy, None, message, params, horizon, gen, max_events, max_queries
    )
    return TrialResult(
        message=message,
        timeline=Timeline(horizon, tuple(events)),
        energy=energy,
    )


@dataclass(frozen=True)
class IdentityReport:
    """Paired Monte Carlo comparison of weighted counts vs. intensity integral."""

    lhs: Estimate
    rhs: Estimate
    diff_mean: float
    diff_stderr: float
    sigmas: float
    passed: bool


def verify_intensity_identity(
    policy: EncoderPolicy,
    weight: WeightProcess,
    message: int,
    params: ChannelParams,
    horizon: float,
    n_trials: int,
    rng: GeneratorLike,
    *,
    sigmas: float = 4.0,
    max_events: int = DEFAULT_MAX_EVENTS,
    max_queries: int = DEFAULT_MAX_QUERIES,
) -> IdentityReport:
    """Check E[sum of weight at counts] == E[integral of weight * intensity].

    Both sides are evaluated on the same paths, so the pass rule uses the
    stderr of the per-path difference, which stays valid whatever the
    correlation between the two sides.  Passes when the mean difference is
    within ``sigmas`` paired standard errors.
    """
    if not (horizon > 0.0) or math.isinf(horizon):
        raise ValueError(f"horizon must be finite and > 0, got {horizon}")
    n_trials = int(n_trials)
    if n_trials < 1000:
        raise ValueError(f"need n_trials >= 1000, got {n_trials}")
    gen = as_generator(rng)
    acc_l = RunningMean()
    acc_r = RunningMean()
    acc_d = RunningMean()
    for _ in range(n_trials):
        _, _, lhs, rhs = _drive(
            policy, weight, message, params, horizon, gen, max_events, max_queries
        )
        acc_l.add(lhs)
        acc_r.add(rhs)
        acc_d.add(lhs - rhs)
    est_d = acc_d.estimate()
    passed = abs(est_d.mean) <= sigmas * est_d.stderr + 1e-12
    return IdentityReport(
        lhs=acc_l.estimate(),
        rhs=acc_r.estimate(),
        diff_mean=est_d.mean,
        diff_stderr=est_d.stderr,
        sigmas=sigmas,
        passed=passed,
    )
