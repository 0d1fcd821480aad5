"""Distributional and contract tests for the point-process substrate."""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from poisson_lab.process import (
    RandomSource,
    RateSegment,
    Timeline,
    poisson_pmf,
    sample_homogeneous,
    sample_next_event,
)


def test_timeline_invariants():
    tl = Timeline(5.0, (0.5, 1.0, 4.9))
    assert len(tl) == 3
    assert tl.first == 0.5
    assert tl.count(0.0, 5.0) == 3
    assert tl.count(0.5, 1.0) == 1  # half-open (a, b]: excludes 0.5, includes 1.0
    assert tl.count(0.4, 0.5) == 1
    assert tl.count(2.0, 2.0) == 0
    with pytest.raises(ValueError):
        Timeline(5.0, (1.0, 1.0))
    with pytest.raises(ValueError):
        Timeline(5.0, (1.0, 0.5))
    with pytest.raises(ValueError):
        Timeline(5.0, (6.0,))
    with pytest.raises(ValueError):
        Timeline(-1.0, ())
    with pytest.raises(ValueError):
        tl.count(3.0, 1.0)


def test_zero_rate_always_empty():
    for stream in range(5):
        tl = sample_homogeneous(0.0, 5.0, RandomSource(0, stream))
        assert tl.events == ()
        assert tl.horizon == 5.0
    assert sample_homogeneous(3.0, 0.0, RandomSource(0, 0)).events == ()


def test_sampling_validation():
    with pytest.raises(ValueError):
        sample_homogeneous(-1.0, 5.0, RandomSource(0, 0))
    with pytest.raises(ValueError):
        sample_homogeneous(1.0, -5.0, RandomSource(0, 0))
    with pytest.raises(ValueError):
        sample_homogeneous(1.0, math.inf, RandomSource(0, 0))


def test_events_sorted_within_horizon():
    gen = RandomSource(11, 0).generator()
    for _ in range(200):
        tl = sample_homogeneous(3.0, 2.0, gen)
        assert all(0.0 < a < b <= 2.0 for a, b in zip(tl.events, tl.events[1:])) or len(tl) < 2
        assert all(0.0 < t <= 2.0 for t in tl.events)


def test_mean_count_matches_poisson_moment():
    # rate 2 on [0, 10]: mean count 20; cross-checked against the pmf moment.
    lam = 20.0
    pmf_moment = sum(v * poisson_pmf(lam, v) for v in range(0, 200))
    assert abs(pmf_moment - lam) < 1e-9

    n = 100_000
    gen = RandomSource(1, 0).generator()
    counts = np.array([len(sample_homogeneous(2.0, 10.0, gen)) for _ in range(n)])
    stderr = counts.std(ddof=1) / math.sqrt(n)
    assert abs(counts.mean() - lam) <= 3 * stderr


def test_zero_count_probability_e_minus_one():
    # rate 1 on [0, 1]: P(no events) = exp(-1).
    n = 1_000_000
    gen = RandomSource(2, 0).generator()
    empties = sum(1 for _ in range(n) if not sample_homogeneous(1.0, 1.0, gen).events)
    p_hat = empties / n
    target = math.exp(-1.0)
    stderr = math.sqrt(target * (1 - target) / n)
    assert abs(p_hat - target) <= 3 * stderr


def test_next_event_zero_rate_never_fires():
    gen = RandomSource(3, 0).generator()
    for _ in range(100):
        assert sample_next_event(0.0, RateSegment(0.0, 100.0), gen) is None


def test_next_event_validation():
    gen = RandomSource(3, 1).generator()
    with pytest.raises(ValueError):
        sample_next_event(5.0, RateSegment(1.0, 5.0), gen)
    with pytest.raises(ValueError):
        sample_next_event(0.0, RateSegment(-1.0, 5.0), gen)


def test_next_event_mean_is_inverse_rate():
    # rate A = 2 with no expiry: mean first-count time 1/A = 0.5.
    n = 200_000
    gen = RandomSource(4, 0).generator()
    seg = RateSegment(2.0, math.inf)
    times = np.array([sample_next_event(0.0, seg, gen) for _ in range(n)])
    stderr = times.std(ddof=1) / math.sqrt(n)
    assert abs(times.mean() - 0.5) <= 4 * stderr


def test_next_event_expiry_probability():
    # rate 1, expiry 3: P(no event) equals the exponential tail at 3,
    # cross-checked by quadrature of the density.
    tail, _ = quad(lambda t: math.exp(-t), 3.0, np.inf)
    assert abs(tail - math.exp(-3.0)) < 1e-9

    n = 200_000
    gen = RandomSource(5, 0).generator()
    seg = RateSegment(1.0, 3.0)
    misses = sum(1 for _ in range(n) if sample_next_event(0.0, seg, gen) is None)
    p_hat = misses / n
    stderr = math.sqrt(tail * (1 - tail) / n)
    assert abs(p_hat - tail) <= 4 * stderr


def test_next_event_memorylessness():
    # Restarting the segment at an intermediate time leaves the law of the
    # first event unchanged: compare empirical CDFs of one-stage vs
    # two-stage sampling.
    n = 100_000
    rate, split, end = 1.2, 0.7, math.inf
    one = np.empty(n)
    gen = RandomSource(6, 0).generator()
    for i in range(n):
        one[i] = sample_next_event(0.0, RateSegment(rate, end), gen)
    two = np.empty(n)
    gen = RandomSource(6, 1).generator()
    for i in range(n):
        t = sample_next_event(0.0, RateSegment(rate, split), gen)
        if t is None:
            t = sample_next_event(split, RateSegment(rate, end), gen)
        two[i] = t
    xs = np.sort(one)
    cdf_two = np.searchsorted(np.sort(two), xs, side="right") / n
    cdf_one = np.arange(1, n + 1) / n
    ks = np.max(np.abs(cdf_one - cdf_two))
    assert ks < 0.01


def test_determinism_and_stream_independence():
    a = sample_homogeneous(2.0, 10.0, RandomSource(42, 7))
    b = sample_homogeneous(2.0, 10.0, RandomSource(42, 7))
    assert a.events == b.events
    c = sample_homogeneous(2.0, 10.0, RandomSource(42, 8))
    assert a.events != c.events


def test_pmf_values():
    assert poisson_pmf(0.0, 0) == 1.0
    assert poisson_pmf(0.0, 3) == 0.0
    assert abs(poisson_pmf(1.0, 0) - math.exp(-1.0)) < 1e-15
    direct = math.exp(-2.0) * 8.0 / 6.0
    assert abs(poisson_pmf(2.0, 3) - direct) < 1e-15
    assert abs(poisson_pmf(2.0, 3) - 0.1804470443154836) < 1e-15


def test_pmf_normalization():
    for lam in (0.1, 1.0, 5.0, 20.0, 50.0):
        total = sum(poisson_pmf(lam, v) for v in range(0, 201))
        assert abs(total - 1.0) < 1e-12


def test_pmf_validation():
    with pytest.raises(ValueError):
        poisson_pmf(-1.0, 0)
    with pytest.raises(ValueError):
        poisson_pmf(1.0, -1)
    with pytest.raises(ValueError):
        poisson_pmf(1.0, 2.5)
    with pytest.raises(ValueError):
        poisson_pmf(math.inf, 0)


def test_pmf_large_arguments_stay_finite():
    v = poisson_pmf(1e6, 1_000_000)
    assert 0.0 < v < 1.0  # log-space evaluation; direct form would overflow
