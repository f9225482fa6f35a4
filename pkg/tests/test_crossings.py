import math

import numpy as np
import pytest

from oracles import reachable_infection_intervals
from rcplab import crossings, graphical, laws
from rcplab.crossings import BoxSpec
from rcplab.errors import WindowTooSmall
from test_engine import _hand_sample


def oracle_crossing(sample, box, start):
    """Crossing indicator recomputed by the interval fixed-point oracle."""
    lo, hi = box.sites
    L = sample.L
    n_loc = hi - lo + 1
    cures = {
        s - lo: [c for c in sample.cure_trains[s + L].marks if box.t <= c <= box.top]
        for s in range(lo, hi + 1)
    }
    arrows = []
    for (a, b) in sample.edges:
        if lo <= a <= hi and lo <= b <= hi:
            for t in sample.arrow_times(sample.edge_index(a, b)):
                if box.t <= t <= box.top:
                    arrows.append((float(t), a - lo, b - lo))
    eps = reachable_infection_intervals(
        n_loc, box.t, box.top, [start - lo], cures, arrows
    )
    if box.kind == "horizontal":
        return bool(eps[box.goal - lo])
    return any(not cured for site in eps.values() for _, _, cured in site)


def random_box_comparison(n_cases, seed0=0):
    """Engine-restricted crossing vs the oracle on random small samples;
    returns the number of disagreements."""
    law_pool = [laws.Exponential(1.2), laws.Weibull(0.7, 1.0), laws.UniformBounded(1.0)]
    bad = 0
    for i in range(n_cases):
        rng = np.random.default_rng(seed0 + i)
        law = law_pool[i % 3]
        lam = 0.5 + 7.5 * rng.random()
        kind = "horizontal" if i % 2 == 0 else "vertical"
        b = 0.5 + rng.random()
        t = 2.0 * rng.random()
        box = BoxSpec(kind=kind, x=-1, t=t, scheme="bounded", b=b)
        sample = graphical.build(law, lam, 3, box.top + 0.1, seed=seed0 + 7919 * i)
        if kind == "horizontal":
            got = crossings.horizontal_crossing(sample, box, start=-1)
        else:
            got = crossings.vertical_crossing(sample, box, start=-1)
        if got != oracle_crossing(sample, box, start=-1):
            bad += 1
    return bad


# ---------------------------------------------------------------------------
# closed forms, frozen against a 60-digit evaluation
# ---------------------------------------------------------------------------


def test_lambda_h_frozen():
    assert crossings.lambda_h_bound(0.9, 1.0) == pytest.approx(
        1.1434801725781169, rel=1e-12
    )


def test_lambda_h_scaling_and_divergence():
    v1 = crossings.lambda_h_bound(0.3, 1.0)
    v2 = crossings.lambda_h_bound(0.3, 2.0)
    assert v2 == pytest.approx(v1 / 2.0, rel=1e-12)
    assert crossings.lambda_h_bound(1e-12, 1.0) > 25.0


def test_lambda_v_bounded_frozen():
    assert crossings.lambda_v_bound_bounded(0.75, 1.0, 1) == pytest.approx(
        0.6931471805599453, rel=1e-12
    )
    # the same arithmetic at eps = 0.5 gives the -ln(1 - sqrt(0.5)) form
    assert crossings.lambda_v_bound_bounded(0.5, 1.0, 1) == pytest.approx(
        1.2279471772995157, rel=1e-12
    )


def test_lambda_v_bounded_monotone_in_k0():
    vals = [crossings.lambda_v_bound_bounded(0.5, 1.0, k) for k in range(1, 8)]
    assert all(b >= a for a, b in zip(vals, vals[1:]))


def test_lambda_v_dfr_frozen_and_errors():
    assert crossings.lambda_v_bound_dfr(0.75, 0.5) == pytest.approx(
        1.3862943611198906, rel=1e-12
    )
    assert crossings.lambda_v_bound_dfr(0.5, 0.5) == pytest.approx(
        2.4558943545990314, rel=1e-12
    )
    with pytest.raises(ValueError):
        crossings.lambda_v_bound_dfr(0.5, 1.0)  # ceil(1/u0) = 1
    with pytest.raises(ValueError):
        crossings.lambda_v_bound_dfr(1.5, 0.5)


def test_lambda_v_dfr_decreasing_in_u0():
    grid = np.linspace(0.02, 0.5, 40)
    vals = [crossings.lambda_v_bound_dfr(0.4, u) for u in grid]
    assert all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))


def test_a0_values():
    assert crossings.a0_bounded(5.0, 1.0) == 0.3
    assert crossings.a0_bounded(0.1, 1.0) == pytest.approx(0.1)
    assert crossings.a0_dfr(0.05) == 0.05
    assert crossings.a0_dfr(0.2) == pytest.approx(0.1)


def test_threshold_decreasing_in_time_scale():
    for f, args in [
        (crossings.lambda_h_bound, ()),
        (lambda e, a: crossings.lambda_v_bound_bounded(e, a, 3), ()),
    ]:
        vals = [f(0.4, a) for a in (0.05, 0.1, 0.5, 1.0)]
        assert all(b < a for a, b in zip(vals, vals[1:]))


# ---------------------------------------------------------------------------
# box geometry and indicators
# ---------------------------------------------------------------------------


def test_boxspec_geometry():
    b = BoxSpec(kind="horizontal", x=2, t=1.0, scheme="bounded", b=0.5)
    assert b.sites == (2, 5) and b.height == 0.5 and b.goal == 5
    v = BoxSpec(kind="vertical", x=0, t=0.0, scheme="bounded", b=0.5)
    assert v.sites == (0, 1) and v.height == 1.5
    h = BoxSpec(kind="horizontal", x=0, t=0.0, scheme="dfr")
    assert h.height == pytest.approx(0.3)
    v = BoxSpec(kind="vertical", x=0, t=0.0, scheme="dfr")
    assert v.height == 1.0
    with pytest.raises(ValueError):
        BoxSpec(kind="diagonal", x=0, t=0.0, scheme="dfr")
    with pytest.raises(ValueError):
        BoxSpec(kind="vertical", x=0, t=0.0, scheme="bounded")


def test_horizontal_crossing_explicit_path():
    arrows = {(0, 1): [0.2], (1, 2): [0.4], (2, 3): [0.6]}
    s = _hand_sample(4, 2.0, {}, arrows)
    box = BoxSpec(kind="horizontal", x=0, t=0.0, scheme="bounded", b=1.0)
    assert crossings.horizontal_crossing(s, box, start=0)
    empty = _hand_sample(4, 2.0, {}, {})
    assert not crossings.horizontal_crossing(empty, box, start=0)


def test_horizontal_crossing_zigzag_matches_oracle():
    # the path must re-enter site 1 after its cure
    cures = {1: [0.3]}
    arrows = {(0, 1): [0.2, 0.5], (1, 2): [0.7], (2, 3): [0.9]}
    s = _hand_sample(4, 2.0, cures, arrows)
    box = BoxSpec(kind="horizontal", x=0, t=0.0, scheme="bounded", b=1.0)
    assert crossings.horizontal_crossing(s, box, start=0)
    assert oracle_crossing(s, box, 0)
    # removing the second (0,1) arrow breaks the chain
    arrows2 = {(0, 1): [0.2], (1, 2): [0.7], (2, 3): [0.9]}
    s2 = _hand_sample(4, 2.0, cures, arrows2)
    assert not crossings.horizontal_crossing(s2, box, start=0)
    assert not oracle_crossing(s2, box, 0)


def test_vertical_crossing_cases():
    box = BoxSpec(kind="vertical", x=0, t=0.0, scheme="bounded", b=1.0)
    # no cure marks on the start site: alive regardless of arrows
    s = _hand_sample(1, 3.0, {1: [0.5, 1.5]}, {})
    assert crossings.vertical_crossing(s, box, start=0)
    # alternating cures bridged by arrows: 1 infected on [0.5, 2.4),
    # re-infects 0 at 2.2, and 0 has no further marks before the top
    cures = {0: [1.0], 1: [2.4]}
    arrows = {(0, 1): [0.5], (1, 0): [2.2]}
    s = _hand_sample(1, 3.0, cures, arrows)
    assert crossings.vertical_crossing(s, box, start=0)
    assert oracle_crossing(s, box, 0)
    # the same marks without the bridge die at 2.4
    s_nobridge = _hand_sample(1, 3.0, cures, {(0, 1): [0.5]})
    assert not crossings.vertical_crossing(s_nobridge, box, start=0)
    assert not oracle_crossing(s_nobridge, box, 0)
    # both sites cured before any arrow
    s = _hand_sample(1, 3.0, {0: [0.4], 1: [0.4]}, {(0, 1): [1.0]})
    assert not crossings.vertical_crossing(s, box, start=0)
    assert not oracle_crossing(s, box, 0)


def test_crossing_window_and_start_validation():
    s = _hand_sample(2, 1.0, {}, {})
    with pytest.raises(WindowTooSmall):
        crossings.horizontal_crossing(
            s, BoxSpec(kind="horizontal", x=0, t=0.0, scheme="bounded", b=1.0), 0
        )
    with pytest.raises(WindowTooSmall):
        crossings.vertical_crossing(
            s, BoxSpec(kind="vertical", x=0, t=0.5, scheme="bounded", b=1.0), 0
        )
    s = _hand_sample(4, 3.0, {}, {})
    box = BoxSpec(kind="horizontal", x=0, t=0.0, scheme="bounded", b=1.0)
    with pytest.raises(ValueError):
        crossings.horizontal_crossing(s, box, start=3)


def test_engine_matches_oracle_on_random_boxes():
    assert random_box_comparison(300, seed0=50) == 0


def test_estimate_crossing_zero_rate():
    est = crossings.estimate_crossing(
        laws.UniformBounded(1.0), 0.0, "horizontal", "bounded",
        t_grid=[0.0, 1.0], b=1.0, n=400, seed=1,
    )
    assert est.max_value == 0.0


def test_estimate_crossing_high_rate_near_one():
    est = crossings.estimate_crossing(
        laws.UniformBounded(1.0), 200.0, "horizontal", "bounded",
        t_grid=[0.0, 0.5, 1.0], b=1.0, n=4000, seed=2,
    )
    lo = est.argmin()
    assert lo.value >= 0.95


def test_crossing_monotone_in_rate_pathwise():
    box = BoxSpec(kind="horizontal", x=0, t=0.2, scheme="bounded", b=1.0)
    for i in range(150):
        s = graphical.build(laws.UniformBounded(1.0), 6.0, 3, 1.5, seed=6000 + i)
        hi = crossings.horizontal_crossing(s, box, start=0)
        lo = crossings.horizontal_crossing(graphical.thin(s, 2.0), box, start=0)
        assert hi or not lo


def test_dual_route_agreement():
    for kind, lam in (("horizontal", 10.0), ("vertical", 8.0)):
        direct = crossings.estimate_crossing(
            laws.UniformBounded(1.0), lam, kind, "bounded", t_grid=[0.5],
            b=1.0, n=4000, seed=3, method="direct",
        ).rows[0]
        via_engine = crossings.estimate_crossing(
            laws.UniformBounded(1.0), lam, kind, "bounded", t_grid=[0.5],
            b=1.0, n=4000, seed=4, method="engine",
        ).rows[0]
        joint = math.hypot(direct.sigma, via_engine.sigma)
        assert abs(direct.value - via_engine.value) <= 3.0 * joint


def test_dual_route_agreement_dfr_stationary():
    direct = crossings.estimate_crossing(
        laws.Weibull(0.7, 1.0), 12.0, "vertical", "dfr", t_grid=[1.0],
        tau_policy="stationary", n=4000, seed=5, method="direct",
    ).rows[0]
    via_engine = crossings.estimate_crossing(
        laws.Weibull(0.7, 1.0), 12.0, "vertical", "dfr", t_grid=[1.0],
        tau_policy="stationary", n=4000, seed=6, method="engine",
    ).rows[0]
    joint = math.hypot(direct.sigma, via_engine.sigma)
    assert abs(direct.value - via_engine.value) <= 3.0 * joint


def test_construction_structure():
    law = laws.UniformBounded(1.0)
    c = crossings.construct_horizontal(law, "bounded", eps=0.5, b=1.0, n=20000,
                                       seed=7, t_grid=[0.0, 0.5, 1.0],
                                       tau_grid=[0.0, "stationary"])
    assert c.p0 == pytest.approx(1.0 - 0.5 ** (1.0 / 6.0))
    assert c.a0 == pytest.approx(min(c.w0, 0.3))
    assert c.lam == pytest.approx(crossings.lambda_h_bound(0.5, c.a0))
    assert c.surrogate
    d = crossings.construct_horizontal(laws.Weibull(0.7, 1.0), "dfr", eps=0.5)
    assert not d.surrogate
    assert d.a0 == pytest.approx(min(d.w0, 0.1))
    v = crossings.construct_vertical_dfr(laws.Weibull(0.7, 1.0), eps=0.5,
                                         n=20000, seed=8, t_grid=[0.0, 1.0])
    assert v.u0 == pytest.approx(min(v.w0, v.v0))
    assert v.lam == pytest.approx(crossings.lambda_v_bound_dfr(0.5, v.u0))
