"""Small statistical helpers for Monte Carlo estimates."""
from __future__ import annotations

import math
from dataclasses import dataclass, field


def binom_sigma(p_hat: float, n: int) -> float:
    """Standard error of a binomial proportion estimate."""
    if n <= 0:
        return float("inf")
    return math.sqrt(max(p_hat * (1.0 - p_hat), 0.0) / n)


def wilson_halfwidth(p_hat: float, n: int, z: float = 1.0) -> float:
    """Half-width of the Wilson score interval at ``z`` standard deviations."""
    if n <= 0:
        return float("inf")
    z2 = z * z
    denom = 1.0 + z2 / n
    return (z / denom) * math.sqrt(p_hat * (1.0 - p_hat) / n + z2 / (4.0 * n * n))


def wilson_center(p_hat: float, n: int, z: float = 1.0) -> float:
    if n <= 0:
        return 0.5
    z2 = z * z
    return (p_hat + z2 / (2.0 * n)) / (1.0 + z2 / n)


@dataclass(frozen=True)
class MCEstimate:
    """One Monte Carlo estimate with its sampling uncertainty.

    ``sigma`` is a one-standard-error half-width; tolerance checks in this
    package use multiples of it (typically three).  ``acceptance`` is only
    set by rejection-sampled estimates.  ``coords`` carries the grid point
    the estimate belongs to, e.g. ``{"t": 0.5, "tau": 0.0}``.
    """

    value: float
    sigma: float
    n: int
    acceptance: float | None = None
    coords: dict = field(default_factory=dict)

    def within(self, target: float, z: float = 3.0) -> bool:
        return abs(self.value - target) <= z * self.sigma


def proportion(hits: int, n: int, acceptance: float | None = None, **coords) -> MCEstimate:
    p = hits / n if n else 0.0
    return MCEstimate(p, binom_sigma(p, n), n, acceptance, dict(coords))
