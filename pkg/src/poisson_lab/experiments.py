"""Monte Carlo experiment runner and machine-readable report rows.

Trials are partitioned into fixed-size chunks; each chunk draws from its
own independent random stream derived from (seed, purpose, context,
message, chunk index), and chunk statistics are merged in chunk order.
The partition is part of the output contract: results are byte-identical
for a given seed regardless of how many workers process the chunks.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from itertools import product
from typing import Iterable, Sequence, TextIO

from .analytics import (
    Estimate,
    PerfReport,
    RunningMean,
    closed_form_binary,
    closed_form_binary_dark,
    closed_form_mary,
    combine_uniform,
    estimate_bernoulli,
)
from .channel import run_trial
from .process import RandomSource
from .schemes import Scheme, SchemeSpec, scheme_from_spec

__all__ = [
    "CHUNK_TRIALS",
    "CSV_HEADER",
    "MessageResult",
    "SimulationReport",
    "SweepAxis",
    "closed_form_for",
    "format_float",
    "resolve_workers",
    "simulate_scheme",
    "stream_id",
    "sweep_scheme",
    "write_rows",
]

# Fixed chunk size: changing it changes the stream layout and hence the
# sampled numbers, so it is a constant, not a knob.
CHUNK_TRIALS = 65536

CSV_HEADER = (
    "kind,M,A,horizon,dark_current,message,n_trials,"
    "p_err,p_err_lo,p_err_hi,energy,energy_lo,energy_hi,cf_p_err,cf_energy,seed"
)

THREADS_ENV = "POISSON_LAB_THREADS"

# Stream-id field layout (64 bits): purpose | context | message | chunk.
_PURPOSE_BITS, _CONTEXT_BITS, _MESSAGE_BITS, _CHUNK_BITS = 8, 20, 16, 20

PURPOSE_SIMULATE = 1
PURPOSE_FUZZ = 2
PURPOSE_VERIFY = 3
PURPOSE_SUBSTRATE = 4


def stream_id(purpose: int, context: int, message: int, chunk: int) -> int:
    """Pack a (purpose, context, message, chunk) tuple into a stream id."""
    for value, bits, name in (
        (purpose, _PURPOSE_BITS, "purpose"),
        (context, _CONTEXT_BITS, "context"),
        (message, _MESSAGE_BITS, "message"),
        (chunk, _CHUNK_BITS, "chunk"),
    ):
        if not 0 <= value < (1 << bits):
            raise ValueError(f"stream {name}={value} does not fit in {bits} bits")
    return (
        (purpose << (_CONTEXT_BITS + _MESSAGE_BITS + _CHUNK_BITS))
        | (context << (_MESSAGE_BITS + _CHUNK_BITS))
        | (message << _CHUNK_BITS)
        | chunk
    )


def resolve_workers(workers: int | None) -> int:
    """Worker count from the argument, else the environment cap, else 1."""
    if workers is None:
        raw = os.environ.get(THREADS_ENV, "1")
        try:
            workers = int(raw)
        except ValueError as exc:
            raise ValueError(f"{THREADS_ENV} must be an integer, got {raw!r}") from exc
    if workers < 1:
        raise ValueError(f"worker count must be >= 1, got {workers}")
    return min(workers, os.cpu_count() or 1)


@dataclass(frozen=True)
class MessageResult:
    """Per-message Monte Carlo statistics with closed-form reference columns."""

    message: int
    n: int
    errors: int
    p_err: Estimate
    energy: Estimate
    cf_p_err: float | None
    cf_energy: float | None


@dataclass(frozen=True)
class SimulationReport:
    """All per-message results of one experiment plus uniform averages."""

    spec: SchemeSpec
    seed: int
    n_trials: int
    per_message: tuple[MessageResult, ...]
    p_err_avg: Estimate
    energy_avg: Estimate

    def rows(self) -> list[dict]:
        """One report row per message, in the CSV column order."""
        out = []
        for r in self.per_message:
            out.append(
                {
                    "kind": self.spec.kind,
                    "M": self.spec.M,
                    "A": self.spec.A,
                    "horizon": self.spec.horizon,
                    "dark_current": self.spec.dark_current,
                    "message": r.message,
                    "n_trials": r.n,
                    "p_err": r.p_err.mean,
                    "p_err_lo": r.p_err.ci_low,
                    "p_err_hi": r.p_err.ci_high,
                    "energy": r.energy.mean,
                    "energy_lo": r.energy.ci_low,
                    "energy_hi": r.energy.ci_high,
                    "cf_p_err": r.cf_p_err,
                    "cf_energy": r.cf_energy,
                    "seed": self.seed,
                }
            )
        return out


def closed_form_for(spec: SchemeSpec) -> PerfReport | None:
    """Closed-form reference for a spec; None where no closed form exists."""
    if spec.kind == "binary-zero-dark":
        return closed_form_binary(spec.A, spec.horizon)
    if spec.kind == "binary-dark-window":
        return closed_form_binary_dark(spec.A, spec.horizon, spec.dark_current)
    if spec.kind == "mary-zero-dark":
        return closed_form_mary(spec.M, spec.A, spec.horizon)
    return None


def _chunk_stats(
    scheme: Scheme, message: int, count: int, source: RandomSource
) -> tuple[int, RunningMean]:
    """Errors and energy accumulator for one chunk of trials."""
    gen = source.generator()
    params = scheme.spec.channel_params()
    horizon = scheme.spec.horizon
    encoder = scheme.encoder
    decoder = scheme.decoder
    errors = 0
    acc = RunningMean()
    for _ in range(count):
        result = run_trial(encoder, message, params, horizon, gen)
        if decoder(result.timeline) != message:
            errors += 1
        acc.add(result.energy)
    return errors, acc


def _message_trial_counts(n_trials: int, M: int) -> list[int]:
    base, extra = divmod(n_trials, M)
    return [base + (1 if m < extra else 0) for m in range(M)]


def simulate_scheme(
    spec: SchemeSpec,
    n_trials: int,
    seed: int,
    *,
    workers: int | None = None,
    stream_context: int = 0,
) -> SimulationReport:
    """Estimate per-message error and energy over ``n_trials`` total trials.

    Trials are split as evenly as possible across the M messages.  The
    result is a deterministic function of (spec, n_trials, seed,
    stream_context) — the worker count never changes the numbers.
    """
    n_trials = int(n_trials)
    if n_trials < 2 * spec.M:
        raise ValueError(
            f"need n_trials >= {2 * spec.M} (two per message), got {n_trials}"
        )
    scheme = scheme_from_spec(spec)
    counts = _message_trial_counts(n_trials, spec.M)

    tasks: list[tuple[int, int, RandomSource]] = []
    for message, n_m in enumerate(counts):
        offset = 0
        chunk = 0
        while offset < n_m:
            size = min(CHUNK_TRIALS, n_m - offset)
            source = RandomSource(
                seed, stream_id(PURPOSE_SIMULATE, stream_context, message, chunk)
            )
            tasks.append((message, size, source))
            offset += size
            chunk += 1

    workers = resolve_workers(workers)
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(
                pool.map(
                    _chunk_stats,
                    [scheme] * len(tasks),
                    [t[0] for t in tasks],
                    [t[1] for t in tasks],
                    [t[2] for t in tasks],
                )
            )
    else:
        outcomes = [_chunk_stats(scheme, m, size, src) for m, size, src in tasks]

    cf = closed_form_for(spec)
    per_message = []
    idx = 0
    for message, n_m in enumerate(counts):
        errors = 0
        acc = RunningMean()
        while idx < len(tasks) and tasks[idx][0] == message:
            chunk_errors, chunk_acc = outcomes[idx]
            errors += chunk_errors
            acc.merge(chunk_acc)
            idx += 1
        per_message.append(
            MessageResult(
                message=message,
                n=n_m,
                errors=errors,
                p_err=estimate_bernoulli(errors, n_m),
                energy=acc.estimate(),
                cf_p_err=None if cf is None else cf.p_err_given[message],
                cf_energy=None if cf is None else cf.energy_given[message],
            )
        )

    return SimulationReport(
        spec=spec,
        seed=seed,
        n_trials=n_trials,
        per_message=tuple(per_message),
        p_err_avg=combine_uniform([r.p_err for r in per_message]),
        energy_avg=combine_uniform([r.energy for r in per_message]),
    )


_AXIS_FIELDS = ("A", "horizon", "dark_current", "M")


@dataclass(frozen=True)
class SweepAxis:
    """One swept parameter and its grid values, in sweep order."""

    name: str
    values: tuple[float, ...]

    def __post_init__(self) -> None:
        if self.name not in _AXIS_FIELDS:
            raise ValueError(f"cannot sweep {self.name!r}; choose from {_AXIS_FIELDS}")
        if not self.values:
            raise ValueError(f"axis {self.name!r} has no values")


def sweep_scheme(
    base: SchemeSpec,
    axes: Sequence[SweepAxis],
    n_trials: int,
    seed: int,
    *,
    workers: int | None = None,
    max_points: int = 10_000,
) -> list[SimulationReport]:
    """Run one experiment per grid point, row-major over the axes.

    Each grid point replaces the named fields of the base spec and is
    re-validated; the point index feeds the stream layout so different
    points never share randomness.
    """
    if not 1 <= len(axes) <= 2:
        raise ValueError("sweep needs one or two axes")
    names = [a.name for a in axes]
    if len(set(names)) != len(names):
        raise ValueError(f"duplicate sweep axis {names}")
    n_points = 1
    for a in axes:
        n_points *= len(a.values)
    if n_points > max_points:
        raise ValueError(f"grid has {n_points} points; limit is {max_points}")

    reports = []
    for index, combo in enumerate(product(*(a.values for a in axes))):
        fields = {}
        for name, value in zip(names, combo):
            fields[name] = int(value) if name == "M" else float(value)
        try:
            point = replace(base, **fields)
        except ValueError as exc:
            raise ValueError(f"grid point {dict(zip(names, combo))}: {exc}") from exc
        reports.append(
            simulate_scheme(
                point, n_trials, seed, workers=workers, stream_context=index
            )
        )
    return reports


def format_float(value: float) -> str:
    """Render a float with 17 significant digits (round-trip exact)."""
    return f"{value:.17g}"


def _render_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format_float(value)
    return str(value)


def write_rows(rows: Iterable[dict], fh: TextIO, fmt: str = "csv") -> None:
    """Write report rows as CSV (with the fixed header) or JSON lines."""
    rows = list(rows)
    if fmt == "csv":
        if rows:
            header = ",".join(rows[0].keys())
        else:
            header = CSV_HEADER
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(_render_cell(v) for v in row.values()) + "\n")
    elif fmt == "json":
        for row in rows:
            fh.write(json.dumps(row) + "\n")
    else:
        raise ValueError(f"unknown output format {fmt!r}; use csv or json")
