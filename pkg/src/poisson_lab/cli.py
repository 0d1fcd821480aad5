"""Command-line harness: simulate, sweep, frontier, verify.

Configuration can come from a config file (INI sections mirroring the
experiment fields) with command-line flags taking precedence.  Reports go
to stdout or ``--out`` as CSV (fixed header, 17-significant-digit floats)
or JSON lines.  Exit codes: 0 success or all checks passed, 1 validation
error, 2 runtime error, 3 verification-suite failure.
"""

from __future__ import annotations

import configparser
import math
import sys
from contextlib import nullcontext
from dataclasses import dataclass

import click
import numpy as np

from .experiments import (
    SweepAxis,
    simulate_scheme,
    sweep_scheme,
    write_rows,
)
from .frontier import FrontierQuery, search_frontier
from .schemes import KINDS, SchemeSpec
from .verify import SUITES, run_suites

__all__ = ["ConfigError", "VerificationFailure", "cli", "main"]

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2
EXIT_VERIFY_FAIL = 3


class ConfigError(ValueError):
    """Invalid configuration (file or flags); exits with status 1."""


class VerificationFailure(RuntimeError):
    """At least one verification check failed; exits with status 3."""


_SCHEME_KEYS = ("kind", "M", "A", "horizon", "dark_current")
_RUN_KEYS = ("n_trials", "seed", "format", "out")


def _load_config(path: str) -> dict:
    parser = configparser.ConfigParser()
    parser.optionxform = str  # keep key case (M vs m)
    try:
        read = parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    known = {"scheme": _SCHEME_KEYS, "run": _RUN_KEYS}
    values: dict[str, str] = {}
    for section in parser.sections():
        if section not in known:
            raise ConfigError(f"{path}: unknown section [{section}]")
        for key, value in parser.items(section):
            if key not in known[section]:
                raise ConfigError(f"{path}: unknown field {key!r} in [{section}]")
            values[key] = value
    return values


def _convert(raw: str, kind: type, field: str):
    try:
        return kind(raw)
    except ValueError as exc:
        raise ConfigError(f"field {field!r}: cannot parse {raw!r} as {kind.__name__}") from exc


@dataclass
class RunSettings:
    spec: SchemeSpec
    n_trials: int
    seed: int
    fmt: str
    out: str | None


def _resolve_settings(
    config_path: str | None,
    kind: str | None,
    M: int | None,
    A: float | None,
    horizon: float | None,
    dark_current: float | None,
    trials: int | None,
    seed: int | None,
    fmt: str | None,
    out: str | None,
) -> RunSettings:
    """Merge config file values with flags (flags win) and validate."""
    file_values = _load_config(config_path) if config_path else {}

    def pick(flag, field: str, convert: type, default=None):
        if flag is not None:
            return flag
        if field in file_values:
            return _convert(file_values[field], convert, field)
        return default

    kind = pick(kind, "kind", str)
    if kind is None:
        raise ConfigError("missing scheme kind: pass --scheme or set [scheme] kind")
    M = pick(M, "M", int, 2)
    A = pick(A, "A", float)
    horizon = pick(horizon, "horizon", float)
    dark_current = pick(dark_current, "dark_current", float, 0.0)
    if A is None:
        raise ConfigError("missing transmit power: pass --A or set [scheme] A")
    if horizon is None:
        raise ConfigError("missing horizon: pass --horizon or set [scheme] horizon")
    try:
        spec = SchemeSpec(kind, M, A, horizon, dark_current)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    n_trials = pick(trials, "n_trials", int, 1_000_000)
    seed = pick(seed, "seed", int, 0)
    fmt = pick(fmt, "format", str, "csv")
    out = pick(out, "out", str)
    if fmt not in ("csv", "json"):
        raise ConfigError(f"format must be csv or json, got {fmt!r}")
    if n_trials < 2 * spec.M:
        raise ConfigError(
            f"n_trials must be at least {2 * spec.M} (two per message), got {n_trials}"
        )
    return RunSettings(spec, n_trials, seed, fmt, out)


def _emit(rows, fmt: str, out: str | None) -> None:
    ctx = open(out, "w", encoding="utf-8") if out else nullcontext(sys.stdout)
    with ctx as fh:
        write_rows(rows, fh, fmt)


def _parse_axis(text: str) -> SweepAxis:
    name, _, rest = text.partition("=")
    if not rest:
        raise ConfigError(
            f"axis {text!r} must look like name=v1,v2,... or name=lo:hi:count "
            "or name=log:lo:hi:count"
        )
    try:
        if rest.startswith("log:"):
            lo, hi, n = rest[4:].split(":")
            values = tuple(float(v) for v in np.geomspace(float(lo), float(hi), int(n)))
        elif ":" in rest:
            lo, hi, n = rest.split(":")
            values = tuple(float(v) for v in np.linspace(float(lo), float(hi), int(n)))
        else:
            values = tuple(float(v) for v in rest.split(","))
    except ValueError as exc:
        raise ConfigError(f"axis {text!r}: {exc}") from exc
    try:
        return SweepAxis(name, values)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _parse_range(text: str, flag: str) -> tuple[float, float]:
    try:
        lo, hi = (float(v) for v in text.split(":"))
    except ValueError as exc:
        raise ConfigError(f"{flag} must look like lo:hi, got {text!r}") from exc
    return lo, hi


def _scheme_options(f):
    opts = [
        click.option("--config", "config_path", type=click.Path(), default=None,
                     help="Config file (INI sections [scheme] and [run]); flags override."),
        click.option("--scheme", "kind", default=None,
                     help="Scheme kind: " + ", ".join(KINDS)),
        click.option("--M", "M", type=int, default=None, help="Number of messages."),
        click.option("--A", "A", type=float, default=None, help="Transmit power."),
        click.option("--horizon", type=float, default=None,
                     help="Observation window length."),
        click.option("--dark-current", type=float, default=None,
                     help="Dark-current rate."),
        click.option("--trials", type=int, default=None, help="Total trial count."),
        click.option("--seed", type=int, default=None, help="Base RNG seed."),
        click.option("--format", "fmt", type=click.Choice(["csv", "json"]),
                     default=None, help="Output format."),
        click.option("--out", type=click.Path(), default=None,
                     help="Output path (default stdout)."),
    ]
    for opt in reversed(opts):
        f = opt(f)
    return f


@click.group()
def cli() -> None:
    """Monte Carlo lab for feedback coding on the photon-counting channel."""


@cli.command()
@_scheme_options
def simulate(config_path, kind, M, A, horizon, dark_current, trials, seed, fmt, out):
    """Estimate per-message error and energy for one scheme."""
    settings = _resolve_settings(
        config_path, kind, M, A, horizon, dark_current, trials, seed, fmt, out
    )
    report = simulate_scheme(settings.spec, settings.n_trials, settings.seed)
    _emit(report.rows(), settings.fmt, settings.out)


@cli.command()
@_scheme_options
@click.option("--axis", "axes", multiple=True,
              help="Swept parameter, e.g. A=1,2,5 or horizon=0.1:1:10 or A=log:1:100:7; "
                   "repeat for a second axis.")
def sweep(config_path, kind, M, A, horizon, dark_current, trials, seed, fmt, out, axes):
    """Run one experiment per grid point over one or two parameter axes."""
    settings = _resolve_settings(
        config_path, kind, M, A, horizon, dark_current, trials, seed, fmt, out
    )
    if not axes:
        raise ConfigError("sweep needs at least one --axis")
    parsed = [_parse_axis(a) for a in axes]
    try:
        reports = sweep_scheme(settings.spec, parsed, settings.n_trials, settings.seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    rows = [row for rep in reports for row in rep.rows()]
    _emit(rows, settings.fmt, settings.out)


@cli.command()
@click.option("--epsilon", type=float, required=True,
              help="Target average error probability in (0, 1).")
@click.option("--M", "M", type=int, default=2, help="Number of messages.")
@click.option("--dark-current", type=float, default=0.0, help="Dark-current rate.")
@click.option("--A-range", "a_range", default="0.001:1000000",
              help="Power search range lo:hi.")
@click.option("--horizon-range", default="0.000001:1000",
              help="Window search range lo:hi.")
@click.option("--trials", type=int, default=1_000_000,
              help="Trials for the Monte Carlo certificate.")
@click.option("--seed", type=int, default=0, help="Base RNG seed.")
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv")
@click.option("--out", type=click.Path(), default=None)
def frontier(epsilon, M, dark_current, a_range, horizon_range, trials, seed, fmt, out):
    """Find the cheapest operating point meeting a target error probability."""
    try:
        query = FrontierQuery(
            target_error=epsilon,
            M=M,
            dark_current=dark_current,
            a_range=_parse_range(a_range, "--A-range"),
            horizon_range=_parse_range(horizon_range, "--horizon-range"),
            n_trials=trials,
            seed=seed,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    result = search_frontier(query)
    _emit([result.row()], fmt, out)
    if not result.feasible:
        click.echo(f"frontier: {result.note}", err=True)


@cli.command()
@click.argument("suites", nargs=-1)
@click.option("--trials", type=int, default=None,
              help="Trials per check (suite defaults: 100000; grid 1000000).")
@click.option("--pairs", type=int, default=50,
              help="Fuzzed pairs/policies for identity and converse.")
@click.option("--grid-trials", type=int, default=None,
              help="Trials per grid point (overrides --trials for the grid suite).")
@click.option("--seed", type=int, default=0, help="Base RNG seed.")
@click.option("--sigmas", type=float, default=4.0,
              help="Pass threshold in standard errors.")
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv")
@click.option("--out", type=click.Path(), default=None)
def verify(suites, trials, pairs, grid_trials, seed, sigmas, fmt, out):
    """Run verification suites; exits 3 if any check fails."""
    if not suites:
        raise ConfigError(
            "no suite selected; available suites: " + ", ".join(SUITES)
        )
    names = list(dict.fromkeys(SUITES if "all" in suites else suites))
    if trials is not None and trials < 1000 and any(
        n in ("identity", "converse") for n in names
    ):
        raise ConfigError("identity/converse suites need --trials >= 1000")
    try:
        reports = run_suites(
            names, n_trials=trials, seed=seed, sigmas=sigmas,
            n_pairs=pairs, grid_trials=grid_trials,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    rows = [row.to_dict() for rep in reports for row in rep.rows]
    _emit(rows, fmt, out)
    failed = []
    for rep in reports:
        n_pass = sum(r.passed for r in rep.rows)
        status = "PASS" if rep.passed else "FAIL"
        click.echo(f"suite {rep.suite}: {status} ({n_pass}/{len(rep.rows)} checks)", err=True)
        if not rep.passed:
            failed.append(rep.suite)
    if failed:
        raise VerificationFailure(f"failed suites: {', '.join(failed)}")


def main(argv=None) -> int:
    """Entry point with the documented exit-code mapping."""
    try:
        cli(args=argv, standalone_mode=False)
        return EXIT_OK
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.UsageError as exc:
        click.echo(f"error: {exc.format_message()}", err=True)
        return EXIT_VALIDATION
    except ConfigError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_VALIDATION
    except VerificationFailure as exc:
        click.echo(str(exc), err=True)
        return EXIT_VERIFY_FAIL
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        click.echo(f"runtime error: {exc}", err=True)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
