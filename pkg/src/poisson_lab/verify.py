"""Verification suites: distributional substrate, intensity identity,
stop-at-first-count energy identity, and closed-form-vs-simulation grid.

Each suite produces uniform check rows (lhs estimate with interval, rhs
reference with interval where it has one, pass flag) so the harness can
render them as CSV or JSON.  Statistical pass rules default to 4 standard
errors; the width is a parameter on every suite.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import chi2

from .analytics import RunningMean, Z95, estimate_bernoulli
from .channel import ChannelParams, verify_intensity_identity
from .experiments import (
    PURPOSE_FUZZ,
    PURPOSE_SUBSTRATE,
    PURPOSE_VERIFY,
    closed_form_for,
    simulate_scheme,
    stream_id,
)
from .process import (
    RandomSource,
    RateSegment,
    as_generator,
    poisson_pmf,
    sample_homogeneous,
    sample_next_event,
)
from .schemes import SchemeSpec, make_binary

__all__ = [
    "SUITES",
    "CheckRow",
    "ChiSquareResult",
    "FirstCountIndicatorWeight",
    "FuzzPolicy",
    "FuzzWeight",
    "PiecewiseProgram",
    "SuiteReport",
    "chi_square_counts",
    "converse_suite",
    "fuzz_program",
    "grid_suite",
    "identity_suite",
    "run_suites",
    "substrate_suite",
]

SUITES = ("substrate", "identity", "converse", "grid")


@dataclass(frozen=True)
class CheckRow:
    """One verification check: estimate vs. reference with intervals."""

    suite: str
    check: str
    n: int
    lhs: float
    lhs_lo: float
    lhs_hi: float
    rhs: float
    rhs_lo: float
    rhs_hi: float
    passed: bool

    def to_dict(self) -> dict:
        return {
            "suite": self.suite,
            "check": self.check,
            "n": self.n,
            "lhs": self.lhs,
            "lhs_lo": self.lhs_lo,
            "lhs_hi": self.lhs_hi,
            "rhs": self.rhs,
            "rhs_lo": self.rhs_lo,
            "rhs_hi": self.rhs_hi,
            "passed": self.passed,
        }


@dataclass(frozen=True)
class SuiteReport:
    suite: str
    rows: tuple[CheckRow, ...]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)


@dataclass(frozen=True)
class PiecewiseProgram:
    """A random piecewise-constant program over the horizon.

    The value depends on the current cell (time between breakpoints) and
    on the number of counts so far (saturating bucket index), optionally
    scaled by a private random factor drawn at query time.  All of that is
    decided at the query instant, so the program is predictable.
    """

    boundaries: tuple[float, ...]
    rates: tuple[tuple[float, ...], ...]
    jitter: float = 0.0
    stop_after_first: bool = False

    def segment(
        self, now: float, events: Sequence[float], rng: np.random.Generator
    ) -> RateSegment:
        if self.stop_after_first and events:
            return RateSegment(0.0, math.inf)
        cell = bisect_right(self.boundaries, now)
        until = (
            self.boundaries[cell] if cell < len(self.boundaries) else math.inf
        )
        bucket = min(len(self.rates) - 1, len(events))
        rate = self.rates[bucket][cell]
        if self.jitter > 0.0 and rate > 0.0:
            rate *= 1.0 + self.jitter * float(rng.uniform(-1.0, 1.0))
        return RateSegment(rate, until)


@dataclass(frozen=True)
class FuzzPolicy:
    program: PiecewiseProgram

    def __call__(self, message, now, events, rng) -> RateSegment:
        return self.program.segment(now, events, rng)


@dataclass(frozen=True)
class FuzzWeight:
    program: PiecewiseProgram

    def __call__(self, now, events, rng) -> RateSegment:
        return self.program.segment(now, events, rng)


@dataclass(frozen=True)
class FirstCountIndicatorWeight:
    """Weight 1 until the first count is registered, 0 afterwards.

    Summed over counts this is the indicator that at least one count
    occurred; integrated against a stop-at-first-count intensity it is the
    full path energy.  Their means agreeing is the energy identity behind
    the one-bit converse.
    """

    def __call__(self, now, events, rng) -> RateSegment:
        return RateSegment(0.0 if events else 1.0, math.inf)


def fuzz_program(
    source: RandomSource,
    horizon: float,
    *,
    max_rate: float = 4.0,
    stop_after_first: bool = False,
    allow_jitter: bool = True,
) -> PiecewiseProgram:
    """Draw a random piecewise program (for property fuzzing)."""
    g = source.generator()
    n_cells = int(g.integers(1, 6))
    boundaries = tuple(sorted(float(x) for x in g.uniform(0.0, horizon, n_cells - 1)))
    n_buckets = int(g.integers(1, 4))
    rates = []
    for _ in range(n_buckets):
        row = g.uniform(0.0, max_rate, n_cells)
        row[g.random(n_cells) < 0.2] = 0.0
        rates.append(tuple(float(r) for r in row))
    jitter = float(g.uniform(0.1, 0.4)) if allow_jitter and g.random() < 0.3 else 0.0
    return PiecewiseProgram(
        boundaries=boundaries,
        rates=tuple(rates),
        jitter=jitter,
        stop_after_first=stop_after_first,
    )


def _identity_row(
    suite: str,
    check: str,
    policy,
    weight,
    dark_current: float,
    horizon: float,
    n_trials: int,
    trial_source: RandomSource,
    sigmas: float,
) -> CheckRow:
    report = verify_intensity_identity(
        policy,
        weight,
        1,
        ChannelParams(dark_current=dark_current),
        horizon,
        n_trials,
        trial_source,
        sigmas=sigmas,
    )
    return CheckRow(
        suite=suite,
        check=check,
        n=n_trials,
        lhs=report.lhs.mean,
        lhs_lo=report.lhs.ci_low,
        lhs_hi=report.lhs.ci_high,
        rhs=report.rhs.mean,
        rhs_lo=report.rhs.ci_low,
        rhs_hi=report.rhs.ci_high,
        passed=report.passed,
    )


def identity_suite(
    n_pairs: int = 50,
    n_trials: int = 100_000,
    seed: int = 0,
    sigmas: float = 4.0,
) -> SuiteReport:
    """Weighted-count vs. intensity-integral identity on fuzzed pairs.

    Pair 0 is the indicator-until-first-count weight against the one-bit
    encoder (the identity underlying the converse); the rest are random
    piecewise (policy, weight) pairs over a cycle of dark currents and
    horizons.
    """
    if n_pairs < 1:
        raise ValueError("need at least one pair")
    rows = [
        _identity_row(
            "identity",
            "indicator-until-first-count binary A=1.5 T=2",
            make_binary(1.5, 2.0).encoder,
            FirstCountIndicatorWeight(),
            0.0,
            2.0,
            n_trials,
            RandomSource(seed, stream_id(PURPOSE_VERIFY, 0, 0, 0)),
            sigmas,
        )
    ]
    dark_cycle = (0.0, 0.5, 2.0)
    horizon_cycle = (1.0, 3.0)
    for i in range(1, n_pairs):
        lam0 = dark_cycle[i % len(dark_cycle)]
        horizon = horizon_cycle[i % len(horizon_cycle)]
        policy = FuzzPolicy(
            fuzz_program(RandomSource(seed, stream_id(PURPOSE_FUZZ, i, 0, 0)), horizon)
        )
        weight = FuzzWeight(
            fuzz_program(RandomSource(seed, stream_id(PURPOSE_FUZZ, i, 1, 0)), horizon)
        )
        rows.append(
            _identity_row(
                "identity",
                f"fuzz-pair {i} lam0={lam0} T={horizon}",
                policy,
                weight,
                lam0,
                horizon,
                n_trials,
                RandomSource(seed, stream_id(PURPOSE_VERIFY, i, 0, 0)),
                sigmas,
            )
        )
    return SuiteReport("identity", tuple(rows))


def converse_suite(
    n_policies: int = 50,
    n_trials: int = 100_000,
    seed: int = 0,
    sigmas: float = 4.0,
) -> SuiteReport:
    """Success probability equals expected energy for stop-at-first-count
    encoders without dark current.

    Checked with the indicator-until-first-count weight: its weighted count
    sum is the at-least-one-count indicator and its intensity integral is
    the path energy, so the identity specializes to P(count) = E[energy].
    Runs on the one-bit scheme grid and on fuzzed stop-at-first-count
    policies.
    """
    weight = FirstCountIndicatorWeight()
    rows = []
    context = 0
    for A in (1.0, 10.0, 100.0):
        for T in (0.1, 1.0, 3.0):
            rows.append(
                _identity_row(
                    "converse",
                    f"binary A={A:g} T={T:g}",
                    make_binary(A, T).encoder,
                    weight,
                    0.0,
                    T,
                    n_trials,
                    RandomSource(seed, stream_id(PURPOSE_VERIFY, 1000 + context, 0, 0)),
                    sigmas,
                )
            )
            context += 1
    horizon_cycle = (1.0, 3.0)
    for i in range(n_policies):
        horizon = horizon_cycle[i % len(horizon_cycle)]
        policy = FuzzPolicy(
            fuzz_program(
                RandomSource(seed, stream_id(PURPOSE_FUZZ, 1000 + i, 0, 0)),
                horizon,
                stop_after_first=True,
            )
        )
        rows.append(
            _identity_row(
                "converse",
                f"fuzz-stop-policy {i} T={horizon}",
                policy,
                weight,
                0.0,
                horizon,
                n_trials,
                RandomSource(seed, stream_id(PURPOSE_VERIFY, 2000 + i, 0, 0)),
                sigmas,
            )
        )
    return SuiteReport("converse", tuple(rows))


def _wilson_bounds(successes: int, n: int, z: float) -> tuple[float, float]:
    p = successes / n
    z2 = z * z
    denom = 1.0 + z2 / n
    center = (p + z2 / (2.0 * n)) / denom
    half = (z / denom) * math.sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n))
    return max(0.0, center - half), min(1.0, center + half)


def _grid_specs() -> list[SchemeSpec]:
    specs = []
    for lam0 in (0.0, 0.5, 2.0):
        for A in (1.0, 10.0, 100.0):
            for T in (0.1, 1.0, 3.0):
                if lam0 == 0.0:
                    specs.append(SchemeSpec("binary-zero-dark", 2, A, T))
                    specs.append(SchemeSpec("mary-zero-dark", 4, A, T))
                else:
                    specs.append(SchemeSpec("binary-dark-window", 2, A, T, lam0))
    return specs


def grid_suite(
    n_trials: int = 1_000_000,
    seed: int = 0,
    sigmas: float = 4.0,
    workers: int | None = None,
) -> SuiteReport:
    """Every closed form sits inside its Monte Carlo interval on a parameter grid.

    Covers the one-bit and 4-message schemes without dark current and the
    one-bit window scheme at two dark currents, over a 3x3 grid of power
    and horizon.  Probabilities use Wilson intervals, energies normal
    intervals, both at ``sigmas`` standard errors.
    """
    rows = []
    for index, spec in enumerate(_grid_specs()):
        report = simulate_scheme(
            spec, n_trials, seed, workers=workers, stream_context=index
        )
        cf = closed_form_for(spec)
        assert cf is not None
        label = (
            f"{spec.kind} A={spec.A:g} T={spec.horizon:g} lam0={spec.dark_current:g}"
        )
        for res in report.per_message:
            lo, hi = _wilson_bounds(res.errors, res.n, sigmas)
            rows.append(
                CheckRow(
                    suite="grid",
                    check=f"{label} m={res.message} p_err",
                    n=res.n,
                    lhs=res.p_err.mean,
                    lhs_lo=lo,
                    lhs_hi=hi,
                    rhs=cf.p_err_given[res.message],
                    rhs_lo=cf.p_err_given[res.message],
                    rhs_hi=cf.p_err_given[res.message],
                    passed=lo <= cf.p_err_given[res.message] <= hi,
                )
            )
            e_lo = res.energy.mean - sigmas * res.energy.stderr
            e_hi = res.energy.mean + sigmas * res.energy.stderr
            rows.append(
                CheckRow(
                    suite="grid",
                    check=f"{label} m={res.message} energy",
                    n=res.n,
                    lhs=res.energy.mean,
                    lhs_lo=e_lo,
                    lhs_hi=e_hi,
                    rhs=cf.energy_given[res.message],
                    rhs_lo=cf.energy_given[res.message],
                    rhs_hi=cf.energy_given[res.message],
                    passed=e_lo <= cf.energy_given[res.message] <= e_hi,
                )
            )
    return SuiteReport("grid", tuple(rows))


@dataclass(frozen=True)
class ChiSquareResult:
    statistic: float
    dof: int
    pvalue: float


def chi_square_counts(
    rate: float,
    horizon: float,
    n_trials: int,
    rng,
    *,
    min_expected: float = 5.0,
) -> ChiSquareResult:
    """Goodness of fit of sampled event counts against the Poisson law.

    Bins with small expectation are pooled left to right until every bin
    expects at least ``min_expected`` trials.
    """
    gen = as_generator(rng)
    lam = rate * horizon
    counts = np.empty(n_trials, dtype=np.int64)
    for i in range(n_trials):
        counts[i] = len(sample_homogeneous(rate, horizon, gen).events)

    kmax = max(int(counts.max()), int(lam + 10.0 * math.sqrt(lam) + 10.0))
    observed = np.bincount(counts, minlength=kmax + 1).astype(float)
    observed[kmax] = observed[kmax:].sum()
    observed = observed[: kmax + 1]
    pmf = np.array([poisson_pmf(lam, v) for v in range(kmax)])
    probs = np.append(pmf, max(0.0, 1.0 - pmf.sum()))
    expected = n_trials * probs

    groups_obs: list[float] = []
    groups_exp: list[float] = []
    acc_o = acc_e = 0.0
    for o, e in zip(observed, expected):
        acc_o += o
        acc_e += e
        if acc_e >= min_expected:
            groups_obs.append(acc_o)
            groups_exp.append(acc_e)
            acc_o = acc_e = 0.0
    if acc_e > 0.0 or acc_o > 0.0:
        if groups_exp:
            groups_obs[-1] += acc_o
            groups_exp[-1] += acc_e
        else:
            groups_obs.append(acc_o)
            groups_exp.append(acc_e)
    if len(groups_exp) < 2:
        raise ValueError("too few bins for a goodness-of-fit test; increase n_trials")

    stat = float(
        sum((o - e) ** 2 / e for o, e in zip(groups_obs, groups_exp))
    )
    dof = len(groups_exp) - 1
    return ChiSquareResult(stat, dof, float(chi2.sf(stat, dof)))


def substrate_suite(
    n_trials: int = 100_000,
    seed: int = 0,
    sigmas: float = 4.0,
    alpha: float = 0.001,
    first_count_trials: int = 1_000_000,
) -> SuiteReport:
    """Distributional checks of the sampling substrate.

    Chi-square goodness of fit of homogeneous counts at three (rate,
    horizon) points, and the sample mean of the first-count time at rate 2
    against its exact mean 1/2.
    """
    rows = []
    for index, (rate, horizon) in enumerate(((1.0, 1.0), (2.0, 10.0), (0.1, 5.0))):
        result = chi_square_counts(
            rate,
            horizon,
            n_trials,
            RandomSource(seed, stream_id(PURPOSE_SUBSTRATE, index, 0, 0)),
        )
        rows.append(
            CheckRow(
                suite="substrate",
                check=f"chi-square counts rate={rate:g} T={horizon:g}",
                n=n_trials,
                lhs=result.pvalue,
                lhs_lo=result.pvalue,
                lhs_hi=result.pvalue,
                rhs=alpha,
                rhs_lo=0.0,
                rhs_hi=1.0,
                passed=result.pvalue >= alpha,
            )
        )

    gen = RandomSource(seed, stream_id(PURPOSE_SUBSTRATE, 100, 0, 0)).generator()
    segment = RateSegment(2.0, math.inf)
    acc = RunningMean()
    for _ in range(first_count_trials):
        t = sample_next_event(0.0, segment, gen)
        acc.add(t)
    est = acc.estimate()
    rows.append(
        CheckRow(
            suite="substrate",
            check="first-count mean rate=2",
            n=first_count_trials,
            lhs=est.mean,
            lhs_lo=est.mean - sigmas * est.stderr,
            lhs_hi=est.mean + sigmas * est.stderr,
            rhs=0.5,
            rhs_lo=0.5,
            rhs_hi=0.5,
            passed=abs(est.mean - 0.5) <= sigmas * est.stderr,
        )
    )
    return SuiteReport("substrate", tuple(rows))


def run_suites(
    names: Sequence[str],
    *,
    n_trials: int | None = None,
    seed: int = 0,
    sigmas: float = 4.0,
    n_pairs: int = 50,
    grid_trials: int | None = None,
    workers: int | None = None,
) -> list[SuiteReport]:
    """Run the named suites with shared settings; unknown names raise."""
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise ValueError(f"unknown suites {unknown}; available: {', '.join(SUITES)}")
    reports = []
    for name in names:
        if name == "substrate":
            reports.append(substrate_suite(n_trials or 100_000, seed, sigmas))
        elif name == "identity":
            reports.append(identity_suite(n_pairs, n_trials or 100_000, seed, sigmas))
        elif name == "converse":
            reports.append(converse_suite(n_pairs, n_trials or 100_000, seed, sigmas))
        elif name == "grid":
            reports.append(
                grid_suite(grid_trials or n_trials or 1_000_000, seed, sigmas, workers)
            )
    return reports
