"""Event-driven Monte Carlo lab for the photon-counting channel with feedback.

The package simulates a direct-detection channel whose output is a
counting process with intensity equal to the transmitted rate plus a
dark-current rate, with the count times fed back instantly to the
encoder.  It ships the stop-at-first-count coding schemes built on that
loop, exact closed-form performance oracles, statistical verification
suites, and a CLI for experiments, sweeps, and energy-frontier searches.
"""

from .analytics import (
    Estimate,
    PerfReport,
    RunningMean,
    closed_form_binary,
    closed_form_binary_dark,
    closed_form_mary,
    combine_uniform,
    converse_energy_bound,
    energy_floor_at,
    estimate_bernoulli,
    estimate_mean,
)
from .channel import (
    ChannelParams,
    IdentityReport,
    PolicyViolationError,
    RunawayIntensityError,
    TrialResult,
    path_energy,
    run_trial,
    verify_intensity_identity,
)
from .experiments import (
    CSV_HEADER,
    MessageResult,
    SimulationReport,
    SweepAxis,
    closed_form_for,
    simulate_scheme,
    sweep_scheme,
    write_rows,
)
from .frontier import FrontierQuery, FrontierResult, search_frontier
from .process import (
    RandomSource,
    RateSegment,
    Timeline,
    poisson_pmf,
    sample_homogeneous,
    sample_next_event,
)
from .schemes import (
    Scheme,
    SchemeSpec,
    make_binary,
    make_binary_dark,
    make_mary,
    make_mary_dark,
    scheme_from_spec,
)
from .verify import (
    SUITES,
    chi_square_counts,
    converse_suite,
    grid_suite,
    identity_suite,
    run_suites,
    substrate_suite,
)

__version__ = "0.1.0"
