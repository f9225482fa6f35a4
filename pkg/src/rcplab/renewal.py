"""Renewal trains and Monte Carlo estimates of renewal-measure quantities.

The estimators in this module approximate suprema over start offsets and
window positions by explicit finite grids; every result is therefore a
grid extremum, never a true sup/inf, and is reported as such.  Rejection
sampling implements all conditional probabilities, with a loud error when
the conditioning event is too rare to resolve.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConditioningTooRare, SearchLimitExceeded, UnsupportedLawOperation
from .laws import InterarrivalLaw, sample_stationary_residual
from .stats import MCEstimate, binom_sigma, proportion
from .streams import map_blocks

__all__ = [
    "RenewalTrain",
    "generate_train",
    "last_mark_age",
    "GridEstimates",
    "default_t_grid",
    "default_tau_grid",
    "gap_probability_estimate",
    "forward_gap_probability",
    "conditional_gap_estimate_dfr",
    "mark_count_tail_estimate",
    "compute_K0",
    "compute_w0_dfr",
    "find_w0_forward",
    "proximity_estimate",
    "proximity_quantile",
]

STATIONARY = "stationary"

_MAX_EPOCH_COLUMNS = 4096
_PAD_HI = 1.0e18
_PAD_LO = -1.0e18


@dataclass(frozen=True)
class RenewalTrain:
    """Cure-mark times of one site on [0, horizon], with start offset tau."""

    site: int
    tau: float
    marks: np.ndarray
    horizon: float

    def __post_init__(self):
        if self.tau > 0.0:
            raise ValueError("start offset tau must be <= 0")
        if self.horizon <= 0.0:
            raise ValueError("horizon must be positive")
        marks = np.asarray(self.marks, dtype=float)
        object.__setattr__(self, "marks", marks)
        if marks.size:
            if marks[0] < 0.0 or marks[-1] > self.horizon:
                raise ValueError("marks must lie in [0, horizon]")
            if np.any(np.diff(marks) <= 0.0):
                raise ValueError("marks must be strictly increasing")


def _epochs_from(law, start, horizon, rng):
    """Renewal epochs start + X1, start + X1 + X2, ... up to horizon."""
    out = []
    cur = start
    mean = law.mean()
    step = max(16, int(2.0 * (horizon - start) / mean) if math.isfinite(mean) else 16)
    while cur <= horizon:
        gaps = law.sample(rng, step)
        epochs = cur + np.cumsum(gaps)
        out.append(epochs[epochs <= horizon])
        cur = epochs[-1]
    return np.concatenate(out) if out else np.empty(0)


def generate_train(
    law: InterarrivalLaw,
    tau: float,
    horizon: float,
    rng: np.random.Generator,
    site: int = 0,
    stationary: bool = False,
) -> RenewalTrain:
    """Generate one train; only epochs inside [0, horizon] are retained.

    With ``stationary=True`` the first epoch is drawn from the equilibrium
    residual-life distribution (tau is recorded as 0).
    """
    if horizon <= 0.0:
        raise ValueError("horizon must be positive")
    if stationary:
        first = float(sample_stationary_residual(law, rng, 1)[0])
        tau = 0.0
    else:
        if tau > 0.0:
            raise ValueError("tau must be <= 0")
        first = tau + law.sample(rng)
    if first > horizon:
        epochs = np.empty(0)
    else:
        rest = _epochs_from(law, first, horizon, rng)
        epochs = np.concatenate([[first], rest])
        epochs = epochs[epochs >= 0.0]
    return RenewalTrain(site=site, tau=tau, marks=epochs, horizon=horizon)


def last_mark_age(train: RenewalTrain, t: float) -> float:
    """Age t - Z_t, where Z_t is the last mark at or before t (tau if none)."""
    if t < 0.0 or t > train.horizon:
        raise ValueError(f"t={t} outside [0, {train.horizon}]")
    idx = int(np.searchsorted(train.marks, t, side="right"))
    z = train.tau if idx == 0 else float(train.marks[idx - 1])
    return t - z


# ---------------------------------------------------------------------------
# vectorized replica machinery
# ---------------------------------------------------------------------------


def _mark_matrix(law, tau, horizon, n, rng, stationary=False):
    """Epoch matrix for n independent trains, rows padded with +inf.

    Epochs may be negative (those between tau and 0); everything past the
    horizon is +inf.
    """
    cols = []
    if stationary:
        cur = sample_stationary_residual(law, rng, n)
    else:
        cur = tau + law.sample(rng, n)
    while True:
        cols.append(np.where(cur <= horizon, cur, np.inf))
        active = cur <= horizon
        if not active.any():
            break
        if len(cols) > _MAX_EPOCH_COLUMNS:
            raise SearchLimitExceeded(
                f"train of {law.descriptor()} needs more than "
                f"{_MAX_EPOCH_COLUMNS} epochs on horizon {horizon}"
            )
        nxt = np.full(n, np.inf)
        nxt[active] = cur[active] + law.sample(rng, int(active.sum()))
        cur = nxt
    return np.column_stack(cols)


def _tau_args(tau):
    if isinstance(tau, str):
        if tau != STATIONARY:
            raise ValueError(f"unknown tau mode {tau!r}")
        return 0.0, True
    tau = float(tau)
    if tau > 0.0:
        raise ValueError("tau must be <= 0 or 'stationary'")
    return tau, False


def _scale(law) -> float:
    m = law.mean()
    if math.isfinite(m) and m > 0.0:
        return m
    # heavy-tail laws have no mean; fall back to a quantile-based scale
    return float(np.quantile(law.sample(np.random.default_rng(0), 4096), 0.5)) * 2.0


def default_t_grid(law) -> list[float]:
    m = _scale(law)
    return [0.25 * j * m for j in range(21)]


def default_tau_grid(law) -> list:
    m = _scale(law)
    return [0.0, -0.5 * m, -2.0 * m, STATIONARY]


@dataclass
class GridEstimates:
    """Per-grid-point estimates plus the grid extremum standing in for a
    sup/inf that is not exactly computable."""

    rows: list[MCEstimate] = field(default_factory=list)

    @property
    def max_value(self) -> float:
        return max(r.value for r in self.rows)

    @property
    def min_value(self) -> float:
        return min(r.value for r in self.rows)

    def argmax(self) -> MCEstimate:
        return max(self.rows, key=lambda r: r.value)

    def argmin(self) -> MCEstimate:
        return min(self.rows, key=lambda r: r.value)

    def csv_header(self) -> tuple:
        keys = sorted({k for r in self.rows for k in r.coords})
        return tuple(keys) + ("estimate", "ci", "n", "acceptance")

    def csv_rows(self) -> list:
        keys = sorted({k for r in self.rows for k in r.coords})
        return [
            tuple(r.coords.get(k, "") for k in keys)
            + (r.value, r.sigma, r.n, "" if r.acceptance is None else r.acceptance)
            for r in self.rows
        ]


def _tau_label(tau):
    return tau if isinstance(tau, str) else float(tau)


def gap_probability_estimate(
    law, w, t_grid=None, tau_grid=None, n=20000, seed=0, workers=1
) -> GridEstimates:
    """P(train has a mark in [t-w, t+w]) on a (t, tau) grid, plus the grid
    max as the numeric stand-in for the sup over window positions."""
    if w <= 0.0:
        raise ValueError("w must be positive")
    t_grid = list(default_t_grid(law) if t_grid is None else t_grid)
    tau_grid = list(default_tau_grid(law) if tau_grid is None else tau_grid)
    if not t_grid or not tau_grid:
        raise ValueError("grids must be nonempty")
    out = GridEstimates()
    for tau in tau_grid:
        tau_val, stat = _tau_args(tau)
        for t in t_grid:
            horizon = t + w

            def block(rng, start, count, _t=t, _tau=tau_val, _stat=stat, _h=horizon):
                m = _mark_matrix(law, _tau, _h, count, rng, stationary=_stat)
                return int(((m >= _t - w) & (m <= _t + w)).any(axis=1).sum())

            hits = sum(map_blocks(block, n, seed, f"gap:{t}:{_tau_label(tau)}", workers))
            out.rows.append(proportion(hits, n, t=t, tau=_tau_label(tau), w=w))
    return out


def forward_gap_probability(
    law, w, t_grid=None, tau_grid=None, n=20000, seed=0, workers=1
) -> GridEstimates:
    """P(train has a mark in [t, t+w]) on the grid: the one-sided variant
    used by the mark-free-window constructions."""
    if w <= 0.0:
        raise ValueError("w must be positive")
    t_grid = list(default_t_grid(law) if t_grid is None else t_grid)
    tau_grid = list(default_tau_grid(law) if tau_grid is None else tau_grid)
    if not t_grid or not tau_grid:
        raise ValueError("grids must be nonempty")
    out = GridEstimates()
    for tau in tau_grid:
        tau_val, stat = _tau_args(tau)
        for t in t_grid:
            horizon = t + w

            def block(rng, start, count, _t=t, _tau=tau_val, _stat=stat, _h=horizon):
                m = _mark_matrix(law, _tau, _h, count, rng, stationary=_stat)
                return int(((m >= _t) & (m <= _t + w)).any(axis=1).sum())

            hits = sum(map_blocks(block, n, seed, f"fgap:{t}:{_tau_label(tau)}", workers))
            out.rows.append(proportion(hits, n, t=t, tau=_tau_label(tau), w=w))
    return out


def conditional_gap_estimate_dfr(
    law, t, k, w, tau=0.0, n=100000, seed=0, workers=1, floor=1e-4
) -> MCEstimate:
    """P(mark in [t+k, t+k+w] | no mark in [t, t+k]) by rejection sampling.

    For decreasing-hazard laws the estimate must stay below the tail odds
    F(w)/(1-F(w)) up to Monte Carlo noise; callers assert that bound.
    """
    if not law.continuous:
        raise UnsupportedLawOperation(
            f"conditional gap estimate needs an absolutely continuous law, "
            f"got {law.descriptor()}"
        )
    if k < 0.0 or w <= 0.0:
        raise ValueError("need k >= 0 and w > 0")
    tau_val, stat = _tau_args(tau)
    horizon = t + k + w

    def block(rng, start, count):
        m = _mark_matrix(law, tau_val, horizon, count, rng, stationary=stat)
        clear = ~((m >= t) & (m <= t + k)).any(axis=1)
        hit = ((m >= t + k) & (m <= t + k + w)).any(axis=1)
        return int(clear.sum()), int((clear & hit).sum())

    tag = f"cgap:{t}:{k}:{w}:{_tau_label(tau)}"
    parts = map_blocks(block, n, seed, tag, workers)
    accepted = sum(p[0] for p in parts)
    hits = sum(p[1] for p in parts)
    rate = accepted / n
    if rate < floor:
        raise ConditioningTooRare(accepted, n, floor)
    return proportion(hits, accepted, acceptance=rate, t=t, k=k, w=w, tau=_tau_label(tau))


def mark_count_tail_estimate(
    law, b, K, t_grid=None, tau_grid=None, n=20000, seed=0, workers=1
) -> GridEstimates:
    """P(more than K marks in [t, t+3b]) over the grid, plus its max."""
    if b <= 0.0 or K < 0:
        raise ValueError("need b > 0 and K >= 0")
    t_grid = list(default_t_grid(law) if t_grid is None else t_grid)
    tau_grid = list(default_tau_grid(law) if tau_grid is None else tau_grid)
    if not t_grid or not tau_grid:
        raise ValueError("grids must be nonempty")
    out = GridEstimates()
    for tau in tau_grid:
        tau_val, stat = _tau_args(tau)
        for t in t_grid:
            horizon = t + 3.0 * b

            def block(rng, start, count, _t=t, _tau=tau_val, _stat=stat, _h=horizon):
                m = _mark_matrix(law, _tau, _h, count, rng, stationary=_stat)
                c = ((m >= _t) & (m <= _t + 3.0 * b)).sum(axis=1)
                return int((c > K).sum())

            hits = sum(map_blocks(block, n, seed, f"ctail:{t}:{_tau_label(tau)}:{K}", workers))
            out.rows.append(proportion(hits, n, t=t, tau=_tau_label(tau), K=K, b=b))
    return out


def compute_K0(law, b, p0, n=20000, seed=0, workers=1, cap=10**6) -> int:
    """Smallest K >= 2 whose estimated P(X1+...+X_{K-1} < 3b) plus three
    standard errors is at most p0."""
    if not 0.0 < p0 < 1.0:
        raise ValueError("p0 must be in (0, 1)")
    if b <= 0.0:
        raise ValueError("b must be positive")
    target = 3.0 * b

    def block(rng, start, count):
        total = np.zeros(count)
        steps = np.zeros(count, dtype=np.int64)
        active = np.ones(count, dtype=bool)
        while active.any():
            total[active] += law.sample(rng, int(active.sum()))
            steps[active] += 1
            active = total < target
            if int(steps.max()) > cap:
                raise SearchLimitExceeded(f"K search exceeded cap {cap}")
        return steps

    # steps = min{m : S_m >= 3b}, so P(S_{K-1} < 3b) = P(steps >= K)
    steps = np.concatenate(map_blocks(block, n, seed, f"k0:{b}", workers))
    for K in range(2, int(steps.max()) + 2):
        p_hat = float((steps >= K).mean())
        if p_hat + 3.0 * binom_sigma(p_hat, n) <= p0:
            return K
    raise SearchLimitExceeded("no K satisfied the p0 bound")  # pragma: no cover


def compute_w0_dfr(law, eps: float, rel_tol: float = 1e-9) -> float:
    """Largest w with F(w) <= eps/2, by bisection on the CDF."""
    if not law.continuous:
        raise UnsupportedLawOperation(
            f"w0 from the tail-odds bound needs a continuous law, got {law.descriptor()}"
        )
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must be in (0, 1)")
    target = 0.5 * eps
    hi = _scale(law)
    while float(law.cdf(hi)) <= target:
        hi *= 2.0
    lo = 0.0
    while hi - lo > rel_tol * max(hi, 1e-30):
        mid = 0.5 * (lo + hi)
        if float(law.cdf(mid)) <= target:
            lo = mid
        else:
            hi = mid
    return lo


def find_w0_forward(
    law, p0, t_grid=None, tau_grid=None, n=100000, seed=0, workers=1, safety=0.9
) -> float:
    """Numeric surrogate for the mark-free-gap radius: the largest w such
    that the grid max of P(mark in [t, t+w]) stays at or below p0.

    Computed as the grid minimum of the empirical p0-quantile of the
    residual time to the next mark, shrunk by ``safety``.  This replaces a
    bound that is not available in closed form; it is a surrogate and is
    labeled as such by callers.
    """
    if not 0.0 < p0 < 1.0:
        raise ValueError("p0 must be in (0, 1)")
    t_grid = list(default_t_grid(law) if t_grid is None else t_grid)
    tau_grid = list(default_tau_grid(law) if tau_grid is None else tau_grid)
    horizon_pad = 12.0 * _scale(law)
    best = math.inf
    for tau in tau_grid:
        tau_val, stat = _tau_args(tau)
        for t in t_grid:
            horizon = t + horizon_pad

            def block(rng, start, count, _t=t, _tau=tau_val, _stat=stat, _h=horizon):
                m = _mark_matrix(law, _tau, _h, count, rng, stationary=_stat)
                nxt = np.where(m >= _t, m, np.inf).min(axis=1)
                return nxt - _t

            resid = np.concatenate(
                map_blocks(block, n, seed, f"w0fw:{t}:{_tau_label(tau)}", workers)
            )
            q = float(np.quantile(resid, p0, method="lower"))
            if not math.isfinite(q):
                q = horizon_pad
            best = min(best, q)
    return best * safety


# ---------------------------------------------------------------------------
# mark proximity between two independent trains
# ---------------------------------------------------------------------------


def _proximity_block(law, law2, t, s, w0, K1, K2, tau_pair, rng, count):
    """(accepted flags -> min pairwise distances) for one replica block."""
    tau1, stat1 = _tau_args(tau_pair[0])
    tau2, stat2 = _tau_args(tau_pair[1])
    horizon = t + s
    m1 = _mark_matrix(law, tau1, horizon, count, rng, stationary=stat1)
    m2 = _mark_matrix(law2, tau2, horizon, count, rng, stationary=stat2)
    in1 = (m1 >= t) & (m1 <= t + s)
    in2 = (m2 >= t) & (m2 <= t + s)
    n1 = in1.sum(axis=1)
    n2 = in2.sum(axis=1)
    first = np.where(in1, m1, np.inf).min(axis=1)
    ok = first >= t + w0
    if K1 is not None:
        ok &= n1 <= K1
    if K2 is not None:
        ok &= n2 <= K2
    a = np.where(in1, m1, _PAD_HI)
    bmat = np.where(in2, m2, _PAD_LO)
    dist = np.abs(a[:, :, None] - bmat[:, None, :]).min(axis=(1, 2))
    return dist[ok]


def proximity_estimate(
    law,
    t,
    s,
    w0,
    K1,
    K2,
    v,
    tau_pair=(0.0, 0.0),
    n=50000,
    seed=0,
    workers=1,
    floor=1e-4,
    law2=None,
) -> MCEstimate:
    """P(closest pair of marks across two independent trains inside
    [t, t+s] is within v), conditioned on the first mark of the first
    train arriving after t + w0 and, optionally, on the mark counts not
    exceeding K1/K2 (pass None to drop a count constraint).

    Replicas with no mark in one of the trains contribute "no pair", i.e.
    the proximity event fails for them.
    """
    if v <= 0.0 or s <= 0.0 or w0 < 0.0:
        raise ValueError("need v > 0, s > 0, w0 >= 0")
    law2 = law2 or law

    def block(rng, start, count):
        d = _proximity_block(law, law2, t, s, w0, K1, K2, tau_pair, rng, count)
        return d.size, int((d <= v).sum())

    tag = f"prox:{t}:{s}:{w0}:{K1}:{K2}"
    parts = map_blocks(block, n, seed, tag, workers)
    accepted = sum(p[0] for p in parts)
    hits = sum(p[1] for p in parts)
    rate = accepted / n
    if rate < floor:
        raise ConditioningTooRare(accepted, n, floor)
    return proportion(hits, accepted, acceptance=rate, t=t, s=s, v=v)


def proximity_quantile(
    law,
    q,
    s,
    w0,
    K1=None,
    K2=None,
    t_grid=None,
    tau_pair=(0.0, 0.0),
    n=50000,
    seed=0,
    workers=1,
    floor=1e-4,
    safety=0.9,
) -> float:
    """Grid minimum of the empirical q-quantile of the min pairwise mark
    distance; the numeric surrogate for the proximity radius v0."""
    t_grid = list(default_t_grid(law) if t_grid is None else t_grid)
    best = math.inf
    for t in t_grid:

        def block(rng, start, count, _t=t):
            return _proximity_block(law, law, _t, s, w0, K1, K2, tau_pair, rng, count)

        dists = np.concatenate(map_blocks(block, n, seed, f"proxq:{t}:{s}", workers))
        if dists.size < max(16, floor * n):
            raise ConditioningTooRare(int(dists.size), n, floor)
        best = min(best, float(np.quantile(dists, q, method="lower")))
    return best * safety
