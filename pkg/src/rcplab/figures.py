"""Figure rendering for the CLI report path.

Every function takes a result object plus an output path and writes one
PNG next to the delimited output.  Rendering is headless (Agg).
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def sweep_figure(sweep, path):
    """Survival curve with error bars over the rate grid."""
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.errorbar(sweep.lambdas, sweep.estimates, yerr=sweep.halfwidths,
                fmt="o-", capsize=3, lw=1.2)
    ax.set_xlabel(r"transmission rate $\lambda$")
    ax.set_ylabel(f"P(alive at T={sweep.T:g})")
    ax.set_ylim(-0.02, 1.02)
    ax.set_title(f"{sweep.law_descriptor}  L={sweep.L} n={sweep.n}")
    ax.grid(alpha=0.3)
    return _finish(fig, path)


def critical_figure(result, path):
    """Bisection probes over the coupled survival curve."""
    fig, ax = plt.subplots(figsize=(6, 4))
    lams, ests = zip(*sorted(result.history))
    ax.plot(lams, ests, "o-", lw=1.0, label="coupled survival")
    ax.axhline(result.target, color="gray", ls="--", lw=0.8)
    ax.axvline(result.value, color="crimson", ls="-", lw=1.2,
               label=f"pseudo-critical {result.value:.4g}")
    ax.set_xlabel(r"$\lambda$")
    ax.set_ylabel("survival estimate")
    ax.set_title(f"{result.law_descriptor}  L={result.L} T={result.T:g} n={result.n}")
    ax.legend(frameon=False)
    ax.grid(alpha=0.3)
    return _finish(fig, path)


def crossing_figure(grid_est, path, title=""):
    """Crossing probability against the box base time."""
    fig, ax = plt.subplots(figsize=(6, 4))
    ts = [r.coords.get("t", i) for i, r in enumerate(grid_est.rows)]
    vals = [r.value for r in grid_est.rows]
    sig = [r.sigma for r in grid_est.rows]
    ax.errorbar(ts, vals, yerr=sig, fmt="s-", capsize=3, lw=1.0)
    ax.set_xlabel("box base time t")
    ax.set_ylabel("crossing probability")
    ax.set_ylim(-0.02, 1.02)
    if title:
        ax.set_title(title)
    ax.grid(alpha=0.3)
    return _finish(fig, path)


def field_figure(field, path):
    """Open/closed edge maps of a block field (wedge cells only)."""
    fig, axes = plt.subplots(1, 2, figsize=(9, 4))
    for ax, mat, name in ((axes[0], field.h_open, "horizontal"),
                          (axes[1], field.v_open, "vertical")):
        shown = mat.astype(float).copy()
        for y in range(field.n_rows):
            for x in range(field.n_cols):
                if x > y + 1:
                    shown[y, x] = np.nan
        ax.imshow(shown, origin="lower", cmap="RdYlGn", vmin=0, vmax=1,
                  interpolation="nearest")
        ax.set_title(f"{name} edges")
        ax.set_xlabel("x")
        ax.set_ylabel("y")
    fig.suptitle(f"{field.law_descriptor}  lam={field.lam:g}  scheme={field.scheme}")
    return _finish(fig, path)


def trajectory_figure(snapshots, path, title=""):
    """Infected count and spatial extent along one run."""
    ts = [s[0] for s in snapshots]
    counts = [s[1] for s in snapshots]
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6, 5), sharex=True)
    ax1.step(ts, counts, where="post", lw=1.0)
    ax1.set_ylabel("infected count")
    ax1.grid(alpha=0.3)
    lo = [s[2] if s[2] is not None else np.nan for s in snapshots]
    hi = [s[3] if s[3] is not None else np.nan for s in snapshots]
    ax2.fill_between(ts, lo, hi, step="post", alpha=0.4)
    ax2.set_xlabel("time")
    ax2.set_ylabel("extent")
    ax2.grid(alpha=0.3)
    if title:
        ax1.set_title(title)
    return _finish(fig, path)


def extinction_figure(ext_times, n_total, path, title=""):
    """Histogram of extinction times (survivors excluded)."""
    fig, ax = plt.subplots(figsize=(6, 4))
    finite = ext_times[np.isfinite(ext_times)]
    if finite.size:
        ax.hist(finite, bins=min(60, max(10, finite.size // 30)), alpha=0.8)
    ax.set_xlabel("extinction time")
    ax.set_ylabel("replicas")
    surv = n_total - finite.size
    ax.set_title(title or f"{finite.size} extinct, {surv} alive of {n_total}")
    ax.grid(alpha=0.3)
    return _finish(fig, path)
