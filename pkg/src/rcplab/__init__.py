"""Monte Carlo laboratory for the renewal contact process on Z^1.

Infection spreads along nearest-neighbor Poisson transmission arrows at
rate lambda; each site's possible cure times form an independent renewal
process with a configurable interarrival law.  The package simulates the
dynamics from its graphical (percolation) structure, estimates
renewal-measure bounds and space-time box crossings, renormalizes runs
to oriented bond percolation, and locates pseudo-critical transmission
rates on finite windows.
"""

from .laws import (
    Deterministic,
    Empirical,
    Exponential,
    InterarrivalLaw,
    Pareto,
    UniformBounded,
    Weibull,
    parse_law,
)
from .renewal import RenewalTrain, generate_train, last_mark_age
from .graphical import GraphicalSample, build, load, restrict, save, thin
from .engine import SimOutcome, evolve, infection_intervals, simulate
from .crossings import (
    BoxSpec,
    a0_bounded,
    a0_dfr,
    estimate_crossing,
    horizontal_crossing,
    lambda_h_bound,
    lambda_v_bound_bounded,
    lambda_v_bound_dfr,
    vertical_crossing,
)
from .renorm import (
    BlockField,
    bernoulli_field,
    block_map,
    marginal_and_dependency_report,
    percolates,
    sample_block_field,
)
from .estimators import (
    PseudoCriticalResult,
    SweepResult,
    extinction_times,
    lambda_sweep,
    pseudo_critical,
    survival_probability,
)

__version__ = "0.1.0"
