"""Closed-form performance oracles and Monte Carlo estimators.

The closed forms are the reference values the simulator is checked
against; the estimators carry sample counts, means, standard errors, and
95% intervals.  Error probabilities use Wilson intervals (valid near 0
and 1); means use normal intervals.  Pass/fail comparisons elsewhere in
the package default to 4 standard errors so the statistical suites have
negligible flake probability; the width is a tunable everywhere it is
used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Z95",
    "Estimate",
    "PerfReport",
    "RunningMean",
    "closed_form_binary",
    "closed_form_binary_dark",
    "closed_form_mary",
    "combine_uniform",
    "converse_energy_bound",
    "energy_floor_at",
    "estimate_bernoulli",
    "estimate_mean",
]

# norm.ppf(0.975); hard-coded so interval bounds never depend on scipy version.
Z95 = 1.959963984540054


@dataclass(frozen=True)
class Estimate:
    """A Monte Carlo statistic: sample count, mean, stderr, 95% interval."""

    n: int
    mean: float
    stderr: float
    ci_low: float
    ci_high: float

    def __post_init__(self) -> None:
        if not (self.ci_low <= self.mean <= self.ci_high):
            raise ValueError("interval must bracket the mean")
        if not self.stderr >= 0.0:
            raise ValueError("stderr must be >= 0")


def estimate_bernoulli(successes: int, n: int) -> Estimate:
    """Estimate a probability from Bernoulli counts with a Wilson 95% interval.

    The point estimate is the plain frequency ``successes / n``; the
    interval is the Wilson score interval, which stays inside [0, 1] and
    behaves near the boundaries where Wald intervals collapse.
    """
    successes = int(successes)
    n = int(n)
    if n < 1 or not 0 <= successes <= n:
        raise ValueError(f"need 0 <= successes <= n with n >= 1, got {successes}/{n}")
    p = successes / n
    z2 = Z95 * Z95
    denom = 1.0 + z2 / n
    center = (p + z2 / (2.0 * n)) / denom
    half = (Z95 / denom) * math.sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n))
    # The Wilson interval always contains the frequency; clamp away the
    # one-ulp rounding that can violate that at 0 or n successes.
    return Estimate(
        n=n,
        mean=p,
        stderr=math.sqrt(p * (1.0 - p) / n),
        ci_low=min(max(0.0, center - half), p),
        ci_high=max(min(1.0, center + half), p),
    )


def estimate_mean(samples: Sequence[float] | np.ndarray) -> Estimate:
    """Sample mean with normal 95% interval; needs at least two samples."""
    arr = np.asarray(samples, dtype=float)
    if arr.ndim != 1 or arr.size < 2:
        raise ValueError("need a flat sample of size >= 2")
    mean = float(arr.mean())
    stderr = float(arr.std(ddof=1) / math.sqrt(arr.size))
    return Estimate(
        n=int(arr.size),
        mean=mean,
        stderr=stderr,
        ci_low=mean - Z95 * stderr,
        ci_high=mean + Z95 * stderr,
    )


@dataclass
class RunningMean:
    """Streaming count/mean/M2 accumulator with associative merging.

    ``merge`` combines accumulators from disjoint sample blocks, so trial
    batches can be processed in any partition and reduced in a fixed order
    for deterministic results.
    """

    n: int = 0
    mean: float = 0.0
    m2: float = 0.0

    def add(self, x: float) -> None:
        self.n += 1
        delta = x - self.mean
        self.mean += delta / self.n
        self.m2 += delta * (x - self.mean)

    def add_many(self, xs: Iterable[float]) -> None:
        for x in xs:
            self.add(x)

    def merge(self, other: "RunningMean") -> "RunningMean":
        if other.n == 0:
            return self
        if self.n == 0:
            self.n, self.mean, self.m2 = other.n, other.mean, other.m2
            return self
        n = self.n + other.n
        delta = other.mean - self.mean
        self.mean += delta * other.n / n
        self.m2 += other.m2 + delta * delta * self.n * other.n / n
        self.n = n
        return self

    def estimate(self) -> Estimate:
        if self.n < 2:
            raise ValueError("need n >= 2 to form an estimate")
        var = self.m2 / (self.n - 1)
        stderr = math.sqrt(max(var, 0.0) / self.n)
        return Estimate(
            n=self.n,
            mean=self.mean,
            stderr=stderr,
            ci_low=self.mean - Z95 * stderr,
            ci_high=self.mean + Z95 * stderr,
        )


def combine_uniform(parts: Sequence[Estimate]) -> Estimate:
    """Equal-weight average of independent estimates (one per message)."""
    if not parts:
        raise ValueError("nothing to combine")
    k = len(parts)
    mean = math.fsum(e.mean for e in parts) / k
    stderr = math.sqrt(math.fsum(e.stderr**2 for e in parts)) / k
    return Estimate(
        n=sum(e.n for e in parts),
        mean=mean,
        stderr=stderr,
        ci_low=mean - Z95 * stderr,
        ci_high=mean + Z95 * stderr,
    )


@dataclass(frozen=True)
class PerfReport:
    """Per-message error probabilities and expected energies, plus averages.

    Averages are uniform over messages (messages are equiprobable).
    Energies are expected transmitted photon counts.
    """

    p_err_given: tuple[float, ...]
    energy_given: tuple[float, ...]
    p_err_avg: float
    energy_avg: float


def _report(p_err: Sequence[float], energy: Sequence[float]) -> PerfReport:
    if len(p_err) != len(energy) or not p_err:
        raise ValueError("per-message lists must be nonempty and equal length")
    for p in p_err:
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"probability {p} outside [0, 1]")
    for e in energy:
        if not e >= 0.0:
            raise ValueError(f"energy {e} must be >= 0")
    m = len(p_err)
    return PerfReport(
        p_err_given=tuple(float(p) for p in p_err),
        energy_given=tuple(float(e) for e in energy),
        p_err_avg=math.fsum(p_err) / m,
        energy_avg=math.fsum(energy) / m,
    )


def _require_positive(value: float, name: str) -> float:
    value = float(value)
    if not (value > 0.0) or math.isinf(value):
        raise ValueError(f"{name} must be finite and > 0, got {value}")
    return value


def closed_form_binary(A: float, T: float) -> PerfReport:
    """Exact performance of the one-bit scheme without dark counts.

    Message 0 sends nothing and is never mistaken; message 1 sends rate A
    until the first count, so it fails only when no count arrives in
    ``[0, T]`` and its expected energy is the chance that one does.  The
    two quantities are computed from the same exponential so that
    ``1 - p_err_given[1] == energy_given[1]`` holds exactly.
    """
    A = _require_positive(A, "A")
    T = _require_positive(T, "T")
    miss = math.exp(-A * T)
    return _report((0.0, miss), (0.0, 1.0 - miss))


def closed_form_binary_dark(A: float, delta: float, dark_current: float) -> PerfReport:
    """Exact performance of the one-bit scheme in a short window with dark counts.

    Any count in the window makes the decoder say 1, so message 0 fails
    with the spurious-count probability ``1 - exp(-dark*delta)``; message 1
    fails when the first count of the combined rate ``A + dark`` misses the
    window, and spends ``A * E[min(first count, delta)]``.
    """
    A = _require_positive(A, "A")
    delta = _require_positive(delta, "delta")
    lam0 = float(dark_current)
    if not (lam0 >= 0.0) or math.isinf(lam0):
        raise ValueError(f"dark_current must be finite and >= 0, got {lam0}")
    if lam0 == 0.0:
        return closed_form_binary(A, delta)
    total = A + lam0
    spurious = -math.expm1(-lam0 * delta)
    miss = math.exp(-total * delta)
    energy1 = A * (-math.expm1(-total * delta)) / total
    return _report((spurious, miss), (0.0, energy1))


def closed_form_mary(M: int, A: float, T: float) -> PerfReport:
    """Exact performance of the M-message slot scheme without dark counts.

    Message 0 is silence; message m >= 1 transmits rate A inside its own
    slot of length ``T / (M - 1)`` until the first count.  Without dark
    counts, any count decodes to the transmitting slot, so each nonzero
    message fails exactly when its slot stays silent.
    """
    M = _require_message_count(M)
    A = _require_positive(A, "A")
    T = _require_positive(T, "T")
    tau = T / (M - 1)
    miss = math.exp(-A * tau)
    hit_energy = 1.0 - miss
    return _report(
        (0.0,) + (miss,) * (M - 1),
        (0.0,) + (hit_energy,) * (M - 1),
    )


def _require_message_count(M: int) -> int:
    if int(M) != M or int(M) < 2:
        raise ValueError(f"M must be an integer >= 2, got {M}")
    return int(M)


def converse_energy_bound(M: int) -> float:
    """Energy floor for reliably distinguishing M equiprobable messages.

    No scheme in the stop-at-first-count family (and, by the converse,
    none at all) beats ``(M - 1) / M`` expected photons as the error
    probability is driven to zero.
    """
    M = _require_message_count(M)
    return (M - 1) / M


def energy_floor_at(M: int, target_error: float) -> float:
    """Energy floor at a finite error target.

    A scheme with average error at most ``eps`` must spend at least
    ``(M-1)/M * (1 - M*eps/(M-1))`` photons on average; the floor decays
    linearly in the allowed error and vanishes once blind guessing
    (error ``(M-1)/M``) is acceptable.
    """
    M = _require_message_count(M)
    eps = float(target_error)
    if not 0.0 < eps < 1.0:
        raise ValueError(f"target_error must be in (0, 1), got {eps}")
    bound = converse_energy_bound(M)
    return max(0.0, bound - eps)
