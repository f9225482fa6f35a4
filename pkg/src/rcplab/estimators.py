"""Survival-probability sweeps and pseudo-critical rate estimation.

Everything here measures finite-size surrogates: P(alive at T) on the
window [-L, L] with an absorbing boundary.  Extending T can only lower
the estimate; widening L can only raise it (fewer arrows lost at the
boundary).  No claim about the infinite-volume critical rate is made;
the deliverable is the surrogate value with its full provenance.

Sweeps and bisection share randomness through rate-thinning: each
replica is built once at the top rate and re-evaluated at lower rates by
filtering arrow levels, so the empirical survival curve is nondecreasing
in the rate by construction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .engine import evolve
from .errors import InvalidBracket
from .graphical import build
from .laws import residual_table
from .stats import MCEstimate, wilson_halfwidth
from .streams import kernel_seeds, replica_seeds

__all__ = [
    "survival_probability",
    "extinction_times",
    "SweepResult",
    "lambda_sweep",
    "PseudoCriticalResult",
    "pseudo_critical",
]


def _tau_kernel_args(law, tau_policy, n_sites):
    if tau_policy in (None, "zero"):
        return 0, 0.0, np.zeros(n_sites), np.empty(0), np.empty(0)
    if tau_policy == "stationary":
        xs, cdf = residual_table(law)
        return 1, 0.0, np.zeros(n_sites), xs, cdf
    if isinstance(tau_policy, str) and tau_policy.startswith("uniform:"):
        a = float(tau_policy.split(":", 1)[1])
        return 2, a, np.zeros(n_sites), np.empty(0), np.empty(0)
    taus = np.asarray(tau_policy, dtype=float)
    if taus.shape != (n_sites,):
        raise ValueError(f"fixed tau list must have length {n_sites}")
    return 0, 0.0, taus, np.empty(0), np.empty(0)


def extinction_times(
    law, lam, L, T, initial=(0,), tau_policy="zero", n=1000, seed=0,
    workers=1, method="auto",
):
    """Replicated runs; returns (survived bool array, extinction times with
    NaN for survivors).

    method="direct" races on-demand transmission clocks against lazily
    generated cure marks (fast at any rate); method="graphical" builds a
    full sample per replica and replays its event table.  Both simulate
    the same law; "auto" picks "direct".
    """
    if method == "auto":
        method = "direct"
    init = np.asarray(sorted(set(int(x) for x in initial)), dtype=np.int64)
    if init.size == 0 or init.min() < -L or init.max() > L:
        raise ValueError("initial sites must be nonempty and inside [-L, L]")
    if method == "direct":
        n_sites = 2 * L + 1
        kind, p1, p2, aux = law.kernel_params()
        mode, a, taus, xs, cdf = _tau_kernel_args(law, tau_policy, n_sites)
        seeds = kernel_seeds(seed, f"ext:{lam}:{L}:{T}", n)
        survived, ext = kernels.gillespie_batch(
            kind, p1, p2, aux, xs, cdf, mode, a, taus,
            float(lam), n_sites, float(T), init + L, seeds,
        )
        return survived, ext
    if method != "graphical":
        raise ValueError(f"unknown method {method!r}")
    survived = np.zeros(n, dtype=bool)
    ext = np.full(n, np.nan)
    rs = replica_seeds(seed, f"extg:{lam}:{L}:{T}", n)
    for i in range(n):
        sample = build(law, lam, L, T, tau_policy=tau_policy, seed=int(rs[i]))
        out = evolve(sample, init)
        survived[i] = out.survived
        if not out.survived:
            ext[i] = out.extinction_time
    return survived, ext


def survival_probability(
    law, lam, L, T, initial=(0,), tau_policy="zero", n=1000, seed=0,
    workers=1, method="auto",
) -> MCEstimate:
    """Fraction of replicas still alive at T, with a Wilson-interval
    half-width (z=1) as the uncertainty."""
    survived, _ = extinction_times(
        law, lam, L, T, initial, tau_policy, n, seed, workers, method
    )
    hits = int(survived.sum())
    p = hits / n
    return MCEstimate(p, wilson_halfwidth(p, n), n, coords={"lam": float(lam)})


@dataclass
class SweepResult:
    """Thinning-coupled survival estimates over a rate grid."""

    law_descriptor: str
    L: int
    T: float
    initial: tuple
    tau_policy: str
    n: int
    seed: int
    lambdas: list
    estimates: list
    halfwidths: list

    def csv_rows(self):
        return [
            (self.law_descriptor, self.L, self.T,
             ";".join(str(s) for s in self.initial), self.tau_policy,
             self.n, self.seed, lam, est, hw)
            for lam, est, hw in zip(self.lambdas, self.estimates, self.halfwidths)
        ]

    CSV_HEADER = ("law", "L", "T", "initial", "tau_policy", "n", "seed",
                  "lambda", "estimate", "ci")


def lambda_sweep(
    law, lambda_grid, L, T, initial=(0,), tau_policy="zero", n=500, seed=0,
    workers=1,
) -> SweepResult:
    """Coupled survival curve: one sample per replica at the top rate,
    re-evaluated at every grid rate by thinning, so the curve is exactly
    nondecreasing."""
    grid = [float(x) for x in lambda_grid]
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("lambda grid must be strictly increasing")
    if not grid:
        raise ValueError("empty lambda grid")
    init = sorted(set(int(x) for x in initial))
    lam_top = grid[-1]
    counts = np.zeros(len(grid), dtype=np.int64)
    rs = replica_seeds(seed, f"sweep:{L}:{T}", n)
    for i in range(n):
        sample = build(law, lam_top, L, T, tau_policy=tau_policy, seed=int(rs[i]))
        for j, lam in enumerate(grid):
            counts[j] += evolve(sample, init, lam=lam).survived
    ests = counts / n
    assert np.all(np.diff(ests) >= 0.0), "coupled sweep must be monotone"
    return SweepResult(
        law_descriptor=law.descriptor(), L=L, T=float(T), initial=tuple(init),
        tau_policy=str(tau_policy), n=n, seed=seed, lambdas=grid,
        estimates=[float(e) for e in ests],
        halfwidths=[wilson_halfwidth(float(e), n) for e in ests],
    )


@dataclass
class PseudoCriticalResult:
    """Finite-size pseudo-critical rate with its provenance."""

    value: float
    target: float
    bracket: tuple
    tol: float
    law_descriptor: str
    L: int
    T: float
    initial: tuple
    tau_policy: str
    n: int
    seed: int
    estimate_lo: float
    estimate_hi: float
    history: list  # (lam, coupled survival estimate) probes in order

    def csv_rows(self):
        return [(
            self.law_descriptor, self.L, self.T,
            ";".join(str(s) for s in self.initial), self.tau_policy,
            self.n, self.seed, self.target, self.bracket[0], self.bracket[1],
            self.tol, self.value, self.estimate_lo, self.estimate_hi,
        )]

    CSV_HEADER = ("law", "L", "T", "initial", "tau_policy", "n", "seed",
                  "target", "bracket_lo", "bracket_hi", "tol", "value",
                  "estimate_lo", "estimate_hi")


def pseudo_critical(
    law, L, T, target, bracket, tol, n=2000, initial=(0,), tau_policy="zero",
    seed=0, workers=1, max_iter=64,
) -> PseudoCriticalResult:
    """Bisect the thinning-coupled survival curve for the rate where it
    crosses ``target``; stops when the bracket is narrower than ``tol``
    and returns the midpoint.

    Because survival is pathwise monotone in the rate on a shared sample,
    each replica has a well-defined smallest surviving rate; the coupled
    curve is the empirical CDF of those thresholds, so the bisection is
    deterministic for a fixed seed.
    """
    lam_lo, lam_hi = float(bracket[0]), float(bracket[1])
    if not (0.0 <= lam_lo < lam_hi):
        raise ValueError("bracket must satisfy 0 <= lo < hi")
    if not 0.0 < target < 1.0:
        raise ValueError("target must be in (0, 1)")
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    init = sorted(set(int(x) for x in initial))
    inner = max(tol / 4.0, 1e-9 * lam_hi)

    thresholds = np.empty(n)
    rs = replica_seeds(seed, f"crit:{L}:{T}", n)
    for i in range(n):
        sample = build(law, lam_hi, L, T, tau_policy=tau_policy, seed=int(rs[i]))

        def alive(lam):
            return evolve(sample, init, lam=lam).survived

        if not alive(lam_hi):
            thresholds[i] = math.inf
        elif alive(lam_lo):
            thresholds[i] = -math.inf
        else:
            lo, hi = lam_lo, lam_hi
            while hi - lo > inner:
                mid = 0.5 * (lo + hi)
                if alive(mid):
                    hi = mid
                else:
                    lo = mid
            thresholds[i] = 0.5 * (lo + hi)

    def curve(lam):
        return float((thresholds <= lam).mean())

    est_lo, est_hi = curve(lam_lo), curve(lam_hi)
    if not (est_lo < target < est_hi):
        raise InvalidBracket(
            f"survival {est_lo:.4f} at {lam_lo} and {est_hi:.4f} at {lam_hi} "
            f"do not straddle target {target}"
        )
    history = [(lam_lo, est_lo), (lam_hi, est_hi)]
    lo, hi = lam_lo, lam_hi
    it = 0
    while hi - lo > tol:
        if it >= max_iter:
            raise InvalidBracket(f"bisection did not converge in {max_iter} steps")
        mid = 0.5 * (lo + hi)
        g = curve(mid)
        history.append((mid, g))
        if g >= target:
            hi = mid
        else:
            lo = mid
        it += 1
    return PseudoCriticalResult(
        value=0.5 * (lo + hi), target=target, bracket=(lam_lo, lam_hi), tol=tol,
        law_descriptor=law.descriptor(), L=L, T=float(T), initial=tuple(init),
        tau_policy=str(tau_policy), n=n, seed=seed,
        estimate_lo=est_lo, estimate_hi=est_hi, history=history,
    )
