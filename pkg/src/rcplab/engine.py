"""Infection dynamics over a graphical sample.

The sweep walks the sample's time-ordered event table: a cure mark makes
its site healthy, an arrow infects its target when the source is infected.
Simultaneous events (possible under point-mass laws) resolve cures first,
then arrows in lexicographic edge order -- conservative toward extinction.
Arrows leaving the window do not exist, so the finite-window survival
probability lower-bounds the infinite-volume one.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .graphical import GraphicalSample, build

__all__ = ["SimOutcome", "evolve", "simulate", "infection_intervals", "resample_trajectory"]


@dataclass
class SimOutcome:
    """Result of one dynamics run.

    ``snapshots`` rows are (time, infected count, leftmost, rightmost),
    recorded after every state change; leftmost/rightmost are None once
    the infection is gone.  ``snapshot_sets`` (when snapshot times were
    requested) holds (time, sorted array of infected sites).
    """

    survived: bool
    extinction_time: float | None
    status: str = "end"
    snapshots: list | None = None
    snapshot_sets: list | None = None

    def __post_init__(self):
        if self.survived != (self.extinction_time is None):
            raise ValueError("survived must hold exactly when extinction_time is None")


_STATUS = {kernels.RAN_TO_END: "end", kernels.EXTINCT: "extinct", kernels.STOPPED: "stopped"}


def _prepare(sample, initial, lam, sites, window, stop_site):
    table = sample.event_table()
    L = sample.L
    lam_thr = sample.lam if lam is None else float(lam)
    if lam is not None and lam_thr > sample.lam + 1e-12:
        raise ValueError(
            f"evaluation rate {lam_thr} exceeds the sample rate {sample.lam}"
        )
    if sites is None:
        lo, hi = -L, L
        times, kind, a, b, level, cure_pos = (
            table.times, table.kind, table.a, table.b, table.level, table.cure_pos,
        )
        offset = L
    else:
        lo, hi = int(sites[0]), int(sites[1])
        if lo > hi or lo < -L or hi > L:
            raise ValueError(f"site restriction [{lo}, {hi}] outside window")
        lo_i, hi_i = lo + L, hi + L
        in_range = (table.a >= lo_i) & (table.a <= hi_i)
        in_range &= (table.kind == 0) | ((table.b >= lo_i) & (table.b <= hi_i))
        times = table.times[in_range]
        kind = table.kind[in_range]
        a = (table.a[in_range] - lo_i).astype(np.int32)
        braw = table.b[in_range]
        b = np.where(braw >= 0, braw - lo_i, -1).astype(np.int32)
        level = table.level[in_range]
        cure_pos = np.flatnonzero(kind == 0).astype(np.int64)
        offset = -lo
    n_loc = hi - lo + 1

    t0 = 0.0 if window is None else float(window[0])
    t1 = sample.T if window is None else float(window[1])
    if t0 < 0.0 or t1 > sample.T + 1e-12 or t0 >= t1:
        raise ValueError(f"time window [{t0}, {t1}] outside [0, {sample.T}]")
    start_idx = int(np.searchsorted(times, t0, side="left"))

    infected = np.zeros(n_loc, dtype=bool)
    init = np.asarray(list(initial), dtype=np.int64)
    if init.size == 0:
        raise ValueError("initial configuration must be nonempty")
    if np.any(init < lo) or np.any(init > hi):
        raise ValueError("initial sites must lie inside the (restricted) window")
    infected[init + offset] = True
    count = int(infected.sum())

    stop_local = -1 if stop_site is None else int(stop_site) + offset
    return (
        times, kind, a, b, level, cure_pos, lam_thr, start_idx, t0, t1,
        infected, count, n_loc, offset, stop_local,
    )


def evolve(
    sample: GraphicalSample,
    initial,
    *,
    lam: float | None = None,
    record_snapshots: bool = False,
    snapshot_times=None,
    sites=None,
    window=None,
    stop_site=None,
) -> SimOutcome:
    """Run the dynamics from ``initial`` (iterable of sites).

    ``lam`` evaluates the same sample at a thinned rate lam <= sample.lam
    (pathwise coupled across calls).  ``sites=(lo, hi)`` and
    ``window=(t0, t1)`` restrict the dynamics to a space-time box;
    ``stop_site`` ends the run as soon as that site is infected.
    """
    (times, kind, a, b, level, cure_pos, lam_thr, start_idx, t0, t1,
     infected, count, n_loc, offset, stop_local) = _prepare(
        sample, initial, lam, sites, window, stop_site
    )

    snapshot_sets = None
    snapshots = None
    if snapshot_times is not None:
        snap = np.asarray(sorted(float(t) for t in snapshot_times))
        masks = np.zeros((snap.size, n_loc), dtype=bool)
        status, t_fin, count_fin = kernels.sweep_masks(
            times, kind, a, b, level, lam_thr, start_idx, t1,
            infected, count, snap, masks,
        )
        snapshot_sets = [
            (float(s), np.flatnonzero(masks[i]) - offset) for i, s in enumerate(snap)
        ]
    elif record_snapshots:
        cap = times.size - start_idx + 2
        rec_t = np.empty(cap)
        rec_c = np.empty(cap, np.int64)
        rec_l = np.empty(cap, np.int64)
        rec_r = np.empty(cap, np.int64)
        status, t_fin, count_fin, m = kernels.sweep_trajectory(
            times, kind, a, b, level, lam_thr, start_idx, t1,
            infected, count, t0, rec_t, rec_c, rec_l, rec_r,
        )
        snapshots = [
            (
                float(rec_t[i]),
                int(rec_c[i]),
                int(rec_l[i]) - offset if rec_c[i] else None,
                int(rec_r[i]) - offset if rec_c[i] else None,
            )
            for i in range(m)
        ]
    else:
        status, t_fin, count_fin = kernels.sweep_outcome(
            times, kind, a, b, level, lam_thr, start_idx, t1,
            infected, count, n_loc, stop_local, cure_pos,
        )

    extinct = status == kernels.EXTINCT
    return SimOutcome(
        survived=not extinct,
        extinction_time=float(t_fin) if extinct else None,
        status=_STATUS[status],
        snapshots=snapshots,
        snapshot_sets=snapshot_sets,
    )


def simulate(law, lam, L, T, initial, tau_policy="zero", seed=0, **evolve_kw) -> SimOutcome:
    """Build a sample and run the dynamics on it in one call."""
    sample = build(law, lam, L, T, tau_policy=tau_policy, seed=seed)
    return evolve(sample, initial, **evolve_kw)


def infection_intervals(sample, initial, *, lam=None, sites=None, window=None):
    """(site, start, end) arrays, one row per infection episode; episodes
    still open at the end of the run close at the horizon."""
    (times, kind, a, b, level, cure_pos, lam_thr, start_idx, t0, t1,
     infected, count, n_loc, offset, _) = _prepare(
        sample, initial, lam, sites, window, None
    )
    cap = times.size + n_loc + 2
    out_site = np.empty(cap, np.int64)
    out_s = np.empty(cap)
    out_e = np.empty(cap)
    status, t_fin, cnt, m = kernels.sweep_intervals(
        times, kind, a, b, level, lam_thr, start_idx, t1,
        infected, count, t0, out_site, out_s, out_e,
    )
    return out_site[:m] - offset, out_s[:m].copy(), out_e[:m].copy()


def resample_trajectory(snapshots, grid):
    """Piecewise-constant resampling of event-time snapshots onto ``grid``."""
    rows = []
    j = -1
    for t in grid:
        while j + 1 < len(snapshots) and snapshots[j + 1][0] <= t:
            j += 1
        if j < 0:
            raise ValueError("grid point precedes the first snapshot")
        _, c, l, r = snapshots[j]
        rows.append((float(t), c, l, r))
    return rows
