"""Named verification checks with machine-readable pass/fail rows.

Each check reruns one quantitative claim end-to-end at configurable
sizes: renewal-measure bounds, crossing thresholds, block independence,
pathwise couplings, and determinism.  The CLI `verify` subcommand and
the acceptance suite both run through these functions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import crossings, estimators, renewal, renorm
from .engine import evolve
from .graphical import build
from .laws import Exponential
from .streams import replica_seeds

__all__ = [
    "CheckRow",
    "CheckReport",
    "check_degenerate",
    "check_dfr_gap",
    "check_gap_grid",
    "check_count_tail",
    "check_proximity",
    "check_crossing_thresholds",
    "check_block_field",
    "check_coupling",
    "check_additivity",
    "check_determinism",
    "CHECKS",
]


@dataclass(frozen=True)
class CheckRow:
    check: str
    label: str
    value: float
    bound: float
    sigma: float
    passed: bool


@dataclass
class CheckReport:
    name: str
    rows: list

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    CSV_HEADER = ("check", "label", "value", "bound", "sigma", "passed")

    def csv_rows(self):
        return [
            (r.check, r.label, r.value, r.bound, r.sigma, int(r.passed))
            for r in self.rows
        ]

    def summary(self) -> str:
        ok = sum(r.passed for r in self.rows)
        return f"{'PASS' if self.passed else 'FAIL'} {self.name} ({ok}/{len(self.rows)} rows)"


def check_degenerate(
    c=1.0, lams=(1.0, 10.0, 100.0), L=50, T=None, n=10000, seed=0, workers=1,
    method="direct",
) -> CheckReport:
    """Point-mass cure law with all-zero start offsets: every replica must
    die by time c, for any transmission rate."""
    from .laws import Deterministic

    law = Deterministic(c)
    T = 2.0 * c if T is None else T
    rows = []
    for lam in lams:
        survived, ext = estimators.extinction_times(
            law, lam, L, T, initial=(0,), n=n, seed=seed, workers=workers,
            method=method,
        )
        frac_dead = 1.0 - survived.mean()
        worst = float(np.nanmax(ext)) if np.isfinite(ext).any() else math.nan
        rows.append(CheckRow("degenerate", f"lam={lam:g}:all-die", float(frac_dead),
                             1.0, 0.0, frac_dead >= 1.0))
        rows.append(CheckRow("degenerate", f"lam={lam:g}:by-time-c", worst, c, 0.0,
                             bool(worst <= c + 1e-9)))
    return CheckReport("degenerate", rows)


def check_dfr_gap(
    law, n=100000, seed=0, workers=1, t_grid=None, k_grid=None, w_grid=None,
    tau=0.0,
) -> CheckReport:
    """Conditional mark probability against the tail-odds bound
    F(w)/(1-F(w)), over a (t, k, w) grid; exponential laws additionally
    match 1 - exp(-rate*w) exactly (memorylessness)."""
    m = law.mean()
    t_grid = [0.0, 0.5 * m, m, 2.0 * m, 5.0 * m] if t_grid is None else t_grid
    k_grid = [0.0, 0.5 * m, m, 2.0 * m, 5.0 * m] if k_grid is None else k_grid
    w_grid = [0.05 * m, 0.1 * m, 0.2 * m] if w_grid is None else w_grid
    # a conditioning window longer than the support is an impossible event
    sup = law.support_upper()
    if math.isfinite(sup):
        k_grid = sorted({min(k, 0.9 * sup) for k in k_grid})
    is_exp = isinstance(law, Exponential)
    dfr = law.is_dfr().dfr
    rows = []
    for w in w_grid:
        bound = law.tail_ratio(w)
        for t in t_grid:
            for k in k_grid:
                est = renewal.conditional_gap_estimate_dfr(
                    law, t=t, k=k, w=w, tau=tau, n=n, seed=seed, workers=workers
                )
                label = f"t={t:g},k={k:g},w={w:g}"
                if dfr:
                    rows.append(CheckRow(
                        "dfr-gap", label, est.value, bound + 3.0 * est.sigma,
                        est.sigma, est.value <= bound + 3.0 * est.sigma))
                else:
                    rows.append(CheckRow(
                        "dfr-gap", label + ":bound", est.value,
                        bound + 3.0 * est.sigma, est.sigma,
                        est.value <= bound + 3.0 * est.sigma))
                if is_exp:
                    exact = 1.0 - math.exp(-law.rate * w)
                    rows.append(CheckRow(
                        "dfr-gap", label + ":memoryless", est.value, exact,
                        est.sigma, abs(est.value - exact) <= 3.0 * est.sigma))
    return CheckReport("dfr-gap", rows)


def check_gap_grid(law, p0=0.1, n=50000, seed=0, workers=1) -> CheckReport:
    """Find the mark-free radius w0 numerically, then confirm the grid max
    of P(mark in [t, t+w0]) stays at or below p0."""
    w0 = renewal.find_w0_forward(law, p0, n=n, seed=seed, workers=workers)
    est = renewal.forward_gap_probability(law, w0, n=n, seed=seed + 1, workers=workers)
    worst = est.argmax()
    rows = [
        CheckRow("gap-grid", f"w0={w0:.6g}", worst.value, p0 + 3.0 * worst.sigma,
                 worst.sigma, worst.value <= p0 + 3.0 * worst.sigma)
    ]
    return CheckReport("gap-grid", rows)


def check_count_tail(law, b=1.0, p0=0.1, n=50000, seed=0, workers=1) -> CheckReport:
    """Count bound K0 from the partial-sum search, then the grid max of
    P(more than K0 marks in [t, t+3b]) must stay at or below p0."""
    K0 = renewal.compute_K0(law, b, p0, n=n, seed=seed, workers=workers)
    est = renewal.mark_count_tail_estimate(law, b, K0, n=n, seed=seed + 1, workers=workers)
    worst = est.argmax()
    rows = [
        CheckRow("count-tail", f"K0={K0}", worst.value, p0 + 3.0 * worst.sigma,
                 worst.sigma, worst.value <= p0 + 3.0 * worst.sigma)
    ]
    return CheckReport("count-tail", rows)


def check_proximity(law, p0=0.1, s=3.0, n=50000, seed=0, workers=1) -> CheckReport:
    """Proximity radius v0 from the conditional min-distance quantile, then
    the conditional proximity probability at v0 must stay near or below p0
    across the base-time grid."""
    w0 = renewal.find_w0_forward(law, p0, n=n, seed=seed, workers=workers)
    m = law.mean()
    t_grid = [0.0, m, 3.0 * m]
    v0 = renewal.proximity_quantile(
        law, q=p0, s=s, w0=w0, t_grid=t_grid, n=n, seed=seed + 1, workers=workers
    )
    rows = []
    for t in t_grid:
        est = renewal.proximity_estimate(
            law, t=t, s=s, w0=w0, K1=None, K2=None, v=v0,
            n=n, seed=seed + 2, workers=workers,
        )
        rows.append(CheckRow(
            "proximity", f"t={t:g},v0={v0:.6g}", est.value, p0 + 3.0 * est.sigma,
            est.sigma, est.value <= p0 + 3.0 * est.sigma))
    return CheckReport("proximity", rows)


def check_crossing_thresholds(
    law, scheme, eps=0.5, b=None, n_quantile=100000, n_cross=10000, seed=0,
    workers=1, kinds=("horizontal", "vertical"), tau_policies=("zero", "stationary"),
    t_grid=None,
) -> CheckReport:
    """Build the constructive rates from their numeric ingredients and
    confirm the estimated grid-min crossing probability clears 1 - eps up
    to Monte Carlo noise."""
    m = law.mean()
    t_grid = [0.0, 0.5 * m, m, 2.0 * m, 3.0 * m, 5.0 * m] if t_grid is None else t_grid
    rows = []
    for kind in kinds:
        if kind == "horizontal":
            cons = crossings.construct_horizontal(
                law, scheme, eps, b=b, n=n_quantile, seed=seed, workers=workers)
        elif scheme == "bounded":
            cons = crossings.construct_vertical_bounded(
                law, b, eps, n=n_quantile, seed=seed, workers=workers)
        else:
            cons = crossings.construct_vertical_dfr(
                law, eps, n=n_quantile, seed=seed, workers=workers)
        worst_val, worst_sig = math.inf, 0.0
        for tau_policy in tau_policies:
            est = crossings.estimate_crossing(
                law, cons.lam, kind, scheme, t_grid=t_grid, tau_policy=tau_policy,
                n=n_cross, seed=seed + 3, b=b, workers=workers,
            )
            lo = est.argmin()
            if lo.value < worst_val:
                worst_val, worst_sig = lo.value, lo.sigma
        bound = 1.0 - eps - 3.0 * worst_sig
        rows.append(CheckRow(
            "crossing-thresholds", f"{kind}:{scheme}:lam={cons.lam:.6g}",
            worst_val, bound, worst_sig, worst_val >= bound))
    return CheckReport("crossing-thresholds", rows)


def check_block_field(
    law, lam=None, scheme="bounded", b=1.0, n=1000, n_cols=8, n_rows=8,
    eps=0.5, depth=None, perc_bound=None, seed=0, workers=1, sampler="auto",
    row_gap=1, expect_marginals=True,
) -> CheckReport:
    """Dependent-field marginals, time-disjoint independence, percolation,
    and the comparison against independent fields."""
    if lam is None:
        hc = crossings.construct_horizontal(law, scheme, eps, b=b, n=20000, seed=seed)
        if scheme == "bounded":
            vc = crossings.construct_vertical_bounded(law, b, eps, n=20000, seed=seed)
        else:
            vc = crossings.construct_vertical_dfr(law, eps, n=20000, seed=seed)
        lam = max(hc.lam, vc.lam)
    depth = n_rows if depth is None else depth
    rep = renorm.marginal_and_dependency_report(
        law, lam, scheme, n, n_cols=n_cols, n_rows=n_rows, b=b, seed=seed,
        sampler=sampler, depth=depth, row_gap=row_gap,
    )
    rows = []
    if expect_marginals:
        for label, est in (("H", rep.marginal_h), ("V", rep.marginal_v)):
            bound = 1.0 - eps - 3.0 * est.sigma
            rows.append(CheckRow("block-field", f"marginal-{label}:lam={lam:.6g}",
                                 est.value, bound, est.sigma, est.value >= bound))
    for group, mean_c, max_c, sig, n_pairs, flagged in rep.correlations:
        if group.startswith("h-time-disjoint"):
            rows.append(CheckRow("block-field", f"corr:{group}({n_pairs} pairs)",
                                 max_c, 3.0 * sig, sig, not flagged))
    if perc_bound is not None:
        rows.append(CheckRow("block-field", f"percolates-depth{depth}",
                             rep.percolation.value, perc_bound,
                             rep.percolation.sigma,
                             rep.percolation.value >= perc_bound))
    return CheckReport("block-field", rows)


def check_coupling(
    law, lam_lo=1.0, lam_hi=2.0, L=100, T=50.0, n=1000, n_snaps=26, seed=0,
    workers=1,
) -> CheckReport:
    """Thinning coupling: on a shared sample the lower-rate infected set
    must be a subset of the higher-rate one at every snapshot."""
    snaps = np.linspace(0.0, T, n_snaps)
    violations = 0
    rs = replica_seeds(seed, f"coupl:{L}:{T}", n)
    for i in range(n):
        sample = build(law, lam_hi, L, T, seed=int(rs[i]))
        hi = evolve(sample, [0], snapshot_times=snaps)
        lo = evolve(sample, [0], lam=lam_lo, snapshot_times=snaps)
        for (_, s_hi), (_, s_lo) in zip(hi.snapshot_sets, lo.snapshot_sets):
            if not np.isin(s_lo, s_hi).all():
                violations += 1
    rows = [CheckRow("coupling", f"{law.descriptor()}:subset-violations",
                     float(violations), 0.0, 0.0, violations == 0)]
    return CheckReport("coupling", rows)


def check_additivity(
    law, lam=1.5, L=30, T=20.0, A=(0,), B=(3,), n=1000, n_snaps=21, seed=0,
    workers=1,
) -> CheckReport:
    """Graphical additivity: the run from A union B equals the union of the
    runs from A and from B, exactly, at every snapshot."""
    snaps = np.linspace(0.0, T, n_snaps)
    union_init = sorted(set(A) | set(B))
    violations = 0
    rs = replica_seeds(seed, f"addi:{L}:{T}", n)
    for i in range(n):
        sample = build(law, lam, L, T, seed=int(rs[i]))
        oa = evolve(sample, A, snapshot_times=snaps)
        ob = evolve(sample, B, snapshot_times=snaps)
        ou = evolve(sample, union_init, snapshot_times=snaps)
        for (_, sa), (_, sb), (_, su) in zip(
            oa.snapshot_sets, ob.snapshot_sets, ou.snapshot_sets
        ):
            if not np.array_equal(np.union1d(sa, sb), su):
                violations += 1
    rows = [CheckRow("additivity", f"{law.descriptor()}:union-violations",
                     float(violations), 0.0, 0.0, violations == 0)]
    return CheckReport("additivity", rows)


def check_determinism(law=None, n=2000, seed=0, workers_pair=(1, 4)) -> CheckReport:
    """The same seed must give bit-identical estimates for any worker count."""
    law = law or Exponential(1.0)
    outs = []
    for w in workers_pair:
        est = renewal.gap_probability_estimate(
            law, w=0.1 * law.mean(), t_grid=[0.0, law.mean()],
            tau_grid=[0.0, "stationary"], n=n, seed=seed, workers=w,
        )
        outs.append(tuple((r.value, r.sigma) for r in est.rows))
    same = outs[0] == outs[1]
    rows = [CheckRow("determinism", f"workers{workers_pair[0]}-vs-{workers_pair[1]}",
                     float(same), 1.0, 0.0, same)]
    return CheckReport("determinism", rows)


CHECKS = {
    "degenerate": check_degenerate,
    "dfr-gap": check_dfr_gap,
    "gap-grid": check_gap_grid,
    "count-tail": check_count_tail,
    "proximity": check_proximity,
    "crossing-thresholds": check_crossing_thresholds,
    "block-field": check_block_field,
    "coupling": check_coupling,
    "additivity": check_additivity,
    "determinism": check_determinism,
}
