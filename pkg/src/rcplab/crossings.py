"""Space-time box crossings and the constructive rate thresholds.

Two box schemes exist.  For a continuous law supported on [0, b] the
horizontal box is [x, x+3] x [t, t+b] and the vertical box is
[x, x+1] x [t, t+3b].  For decreasing-hazard laws the heights are fixed:
0.3 for horizontal and 1 for vertical boxes.  A horizontal crossing means
the infection reaches site x+3 without leaving the box; a vertical
crossing means it is still alive at the box top.

Crossing indicators reuse the engine restricted to the box, so there is
a single dynamics code path to validate.  The Monte Carlo estimator
additionally offers a Gillespie-style route that draws transmission
clocks on demand, which stays cheap at the enormous rates the
constructive bounds produce; the two routes are cross-checked in tests.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .engine import evolve
from .errors import WindowTooSmall
from .graphical import build
from .laws import residual_table
from .renewal import (
    GridEstimates,
    compute_K0,
    compute_w0_dfr,
    default_t_grid,
    find_w0_forward,
    proximity_quantile,
)
from .stats import proportion
from .streams import kernel_seeds, replica_seeds

__all__ = [
    "BoxSpec",
    "horizontal_crossing",
    "vertical_crossing",
    "estimate_crossing",
    "lambda_h_bound",
    "lambda_v_bound_bounded",
    "lambda_v_bound_dfr",
    "a0_bounded",
    "a0_dfr",
    "CrossingConstruction",
    "construct_horizontal",
    "construct_vertical_bounded",
    "construct_vertical_dfr",
]

_DFR_H_HEIGHT = 0.3
_DFR_V_HEIGHT = 1.0
_DFR_HOP_BUDGET = 0.1


@dataclass(frozen=True)
class BoxSpec:
    """Geometry of one crossing box."""

    kind: str  # "horizontal" | "vertical"
    x: int
    t: float
    scheme: str  # "bounded" | "dfr"
    b: float | None = None

    def __post_init__(self):
        if self.kind not in ("horizontal", "vertical"):
            raise ValueError(f"unknown box kind {self.kind!r}")
        if self.scheme not in ("bounded", "dfr"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.scheme == "bounded":
            if self.b is None or self.b <= 0.0:
                raise ValueError("bounded scheme needs b > 0")
        if self.t < 0.0:
            raise ValueError("box base time must be >= 0")

    @property
    def width(self) -> int:
        return 4 if self.kind == "horizontal" else 2

    @property
    def height(self) -> float:
        if self.scheme == "bounded":
            return self.b if self.kind == "horizontal" else 3.0 * self.b
        return _DFR_H_HEIGHT if self.kind == "horizontal" else _DFR_V_HEIGHT

    @property
    def sites(self) -> tuple[int, int]:
        return self.x, self.x + self.width - 1

    @property
    def goal(self) -> int | None:
        return self.x + 3 if self.kind == "horizontal" else None

    @property
    def top(self) -> float:
        return self.t + self.height


def _check_fit(sample, box: BoxSpec):
    lo, hi = box.sites
    if lo < -sample.L or hi > sample.L or box.top > sample.T + 1e-12:
        raise WindowTooSmall(
            f"box {box} does not fit in window L={sample.L}, T={sample.T}"
        )


def _check_start(box: BoxSpec, start: int):
    if start not in (box.x, box.x + 1):
        raise ValueError(f"crossing start must be {box.x} or {box.x + 1}")


def horizontal_crossing(sample, box: BoxSpec, start: int | None = None) -> bool:
    """True iff infection from ``start`` reaches x+3 inside the box."""
    if box.kind != "horizontal":
        raise ValueError("box is not horizontal")
    start = box.x if start is None else start
    _check_fit(sample, box)
    _check_start(box, start)
    out = evolve(
        sample,
        [start],
        sites=box.sites,
        window=(box.t, box.top),
        stop_site=box.goal,
    )
    return out.status == "stopped"


def vertical_crossing(sample, box: BoxSpec, start: int | None = None) -> bool:
    """True iff infection from ``start`` is still alive at the box top."""
    if box.kind != "vertical":
        raise ValueError("box is not vertical")
    start = box.x if start is None else start
    _check_fit(sample, box)
    _check_start(box, start)
    out = evolve(sample, [start], sites=box.sites, window=(box.t, box.top))
    return out.survived


def _tau_mode(law, tau_policy):
    if tau_policy in (None, "zero"):
        return 0, 0.0, np.empty(0), np.empty(0)
    if tau_policy == "stationary":
        xs, cdf = residual_table(law)
        return 1, 0.0, xs, cdf
    if isinstance(tau_policy, str) and tau_policy.startswith("uniform:"):
        a = float(tau_policy.split(":", 1)[1])
        if a <= 0.0:
            raise ValueError("uniform tau policy needs a > 0")
        return 2, a, np.empty(0), np.empty(0)
    raise ValueError(f"unsupported tau policy for crossing estimates: {tau_policy!r}")


def estimate_crossing(
    law,
    lam,
    kind,
    scheme,
    t_grid=None,
    tau_policy="zero",
    n=10000,
    seed=0,
    b=None,
    workers=1,
    method="auto",
    start_offset=0,
) -> GridEstimates:
    """Crossing probability on a grid of base times; the grid min stands in
    for the infimum over window positions (it is a grid min, not an inf).

    ``method="direct"`` races on-demand exponential transmission clocks
    against lazily generated cure marks (any rate, exact in law);
    ``method="engine"`` materializes box-local samples and replays them
    through the restricted engine.  ``"auto"`` picks "direct".
    """
    box0 = BoxSpec(kind=kind, x=0, t=0.0, scheme=scheme, b=b)
    if start_offset not in (0, 1):
        raise ValueError("start_offset must be 0 or 1")
    t_grid = list(default_t_grid(law) if t_grid is None else t_grid)
    if method == "auto":
        method = "direct"
    if method not in ("direct", "engine"):
        raise ValueError(f"unknown method {method!r}")

    out = GridEstimates()
    goal_local = 3 if kind == "horizontal" else -1
    params = law.kernel_params()
    for t in t_grid:
        if method == "direct":
            mode, a, xs, cdf = _tau_mode(law, tau_policy)
            taus = np.zeros(box0.width)
            seeds = kernel_seeds(seed, f"cross:{kind}:{scheme}:{t}", n)
            hit = kernels.box_cross_batch(
                params[0], params[1], params[2], params[3], xs, cdf,
                mode, a, taus, float(lam), box0.width,
                float(t), float(t + box0.height), start_offset, goal_local, seeds,
            )
            hits = int(hit.sum())
        else:
            hits = 0
            L_box = 3 if kind == "horizontal" else 1
            rs = replica_seeds(seed, f"crosseng:{kind}:{scheme}:{t}", n)
            box = BoxSpec(kind=kind, x=0, t=float(t), scheme=scheme, b=b)
            for i in range(n):
                sample = build(
                    law, lam, L_box, t + box0.height, tau_policy=tau_policy,
                    seed=int(rs[i]),
                )
                if kind == "horizontal":
                    hits += horizontal_crossing(sample, box, start=start_offset)
                else:
                    hits += vertical_crossing(sample, box, start=start_offset)
        out.rows.append(proportion(hits, n, t=float(t), kind=kind, scheme=scheme, lam=lam))
    return out


# ---------------------------------------------------------------------------
# closed-form constructive thresholds
# ---------------------------------------------------------------------------


def _check_eps(eps):
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must be in (0, 1)")


def lambda_h_bound(eps: float, a0: float) -> float:
    """Rate above which each of the three hops happens inside its a0 window
    with probability (1-eps)^(1/6)."""
    _check_eps(eps)
    if a0 <= 0.0:
        raise ValueError("a0 must be positive")
    return -math.log(1.0 - (1.0 - eps) ** (1.0 / 6.0)) / a0


def lambda_v_bound_bounded(eps: float, u1: float, K0: int) -> float:
    """Vertical threshold for the bounded scheme: at most 2*K0 - 1 forced
    re-infections, each inside a gap of length at least u1."""
    _check_eps(eps)
    if u1 <= 0.0:
        raise ValueError("u1 must be positive")
    if K0 < 1:
        raise ValueError("K0 must be >= 1")
    expo = 1.0 / (4.0 * K0 - 2.0)
    return -math.log(1.0 - (1.0 - eps) ** expo) / u1


def lambda_v_bound_dfr(eps: float, u0: float) -> float:
    """Vertical threshold for the decreasing-hazard scheme; the gap budget
    u0 must satisfy ceil(1/u0) >= 2 (i.e. u0 < 1)."""
    _check_eps(eps)
    if u0 <= 0.0:
        raise ValueError("u0 must be positive")
    m = math.ceil(1.0 / u0)
    if m < 2:
        raise ValueError(f"need ceil(1/u0) >= 2, got {m} (u0={u0})")
    expo = 1.0 / (2.0 * m - 2.0)
    return -math.log(1.0 - (1.0 - eps) ** expo) / u0


def a0_bounded(w0: float, b: float) -> float:
    """Hop window: the mark-free radius capped by the 0.3*b hop budget."""
    if w0 <= 0.0 or b <= 0.0:
        raise ValueError("need w0 > 0 and b > 0")
    return min(w0, 0.3 * b)


def a0_dfr(w0: float) -> float:
    """Hop window for the decreasing-hazard scheme (budget 0.1)."""
    if w0 <= 0.0:
        raise ValueError("need w0 > 0")
    return min(w0, _DFR_HOP_BUDGET)


# ---------------------------------------------------------------------------
# end-to-end constructions (numeric surrogates feeding the closed forms)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CrossingConstruction:
    """Everything needed to audit one constructive threshold."""

    kind: str
    scheme: str
    eps: float
    p0: float
    p1: float | None
    w0: float
    a0: float | None
    K0: int | None
    v0: float | None
    u0: float | None
    lam: float
    surrogate: bool  # True when w0/v0 came from grid quantiles, not closed forms


def construct_horizontal(
    law, scheme, eps, b=None, n=100000, seed=0, workers=1, t_grid=None, tau_grid=None
) -> CrossingConstruction:
    """Horizontal threshold: p0 = 1-(1-eps)^(1/6), a mark-free radius w0 at
    level p0, the hop window a0, and the closed-form rate."""
    _check_eps(eps)
    p0 = 1.0 - (1.0 - eps) ** (1.0 / 6.0)
    if scheme == "bounded":
        if b is None or b <= 0.0:
            raise ValueError("bounded scheme needs b > 0")
        w0 = find_w0_forward(law, p0, t_grid=t_grid, tau_grid=tau_grid,
                             n=n, seed=seed, workers=workers)
        a0 = a0_bounded(w0, b)
        surrogate = True
    elif scheme == "dfr":
        w0 = compute_w0_dfr(law, p0)
        a0 = a0_dfr(w0)
        surrogate = False
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    return CrossingConstruction(
        kind="horizontal", scheme=scheme, eps=eps, p0=p0, p1=None,
        w0=w0, a0=a0, K0=None, v0=None, u0=None,
        lam=lambda_h_bound(eps, a0), surrogate=surrogate,
    )


def construct_vertical_bounded(
    law, b, eps, n=100000, seed=0, workers=1, p0=None, p1=None,
    t_grid=None, tau_grid=None,
) -> CrossingConstruction:
    """Vertical threshold for a law supported on [0, b]: count bound K0 at
    level p0, mark-free radius w1 and proximity radius v1 at level p1
    (both default to 1-(1-eps)^(1/8)), gap budget u1 = min(w1, v1)."""
    _check_eps(eps)
    if b is None or b <= 0.0:
        raise ValueError("bounded scheme needs b > 0")
    p0 = 1.0 - (1.0 - eps) ** 0.125 if p0 is None else p0
    p1 = 1.0 - (1.0 - eps) ** 0.125 if p1 is None else p1
    w1 = find_w0_forward(law, p1, t_grid=t_grid, tau_grid=tau_grid,
                         n=n, seed=seed, workers=workers)
    K0 = compute_K0(law, b, p0, n=min(n, 50000), seed=seed, workers=workers)
    v1 = proximity_quantile(
        law, q=p1, s=3.0 * b, w0=w1, K1=K0, K2=K0,
        t_grid=t_grid, n=n, seed=seed, workers=workers,
    )
    u1 = min(w1, v1)
    return CrossingConstruction(
        kind="vertical", scheme="bounded", eps=eps, p0=p0, p1=p1,
        w0=w1, a0=None, K0=K0, v0=v1, u0=u1,
        lam=lambda_v_bound_bounded(eps, u1, K0), surrogate=True,
    )


def construct_vertical_dfr(
    law, eps, n=100000, seed=0, workers=1, p1=None, t_grid=None
) -> CrossingConstruction:
    """Vertical threshold for a decreasing-hazard law: mark-free radius w0
    from the tail-odds bound at level p1 = 1-(1-eps)^(1/4), proximity
    radius v0 at the same level, gap budget u0 = min(w0, v0)."""
    _check_eps(eps)
    p1 = 1.0 - (1.0 - eps) ** 0.25 if p1 is None else p1
    w0 = compute_w0_dfr(law, p1)
    v0 = proximity_quantile(
        law, q=p1, s=_DFR_V_HEIGHT, w0=w0, K1=None, K2=None,
        t_grid=t_grid, n=n, seed=seed, workers=workers,
    )
    u0 = min(w0, v0)
    return CrossingConstruction(
        kind="vertical", scheme="dfr", eps=eps, p0=p1, p1=p1,
        w0=w0, a0=None, K0=None, v0=v0, u0=u0,
        lam=lambda_v_bound_dfr(eps, u0), surrogate=True,
    )
