import math

import numpy as np
import pytest
import scipy.stats as st

from rcplab import laws, renewal
from rcplab.errors import ConditioningTooRare, UnsupportedLawOperation


def test_generate_train_deterministic_cases(rng):
    tr = renewal.generate_train(laws.Deterministic(1.0), 0.0, 3.5, rng)
    assert tr.marks.tolist() == [1.0, 2.0, 3.0]
    tr = renewal.generate_train(laws.Deterministic(1.0), -0.5, 2.0, rng)
    assert tr.marks.tolist() == [0.5, 1.5]
    # an epoch can land exactly at 0 and belongs to the window
    tr = renewal.generate_train(laws.Deterministic(1.0), -1.0, 2.0, rng)
    assert tr.marks.tolist() == [0.0, 1.0, 2.0]


def test_generate_train_poisson_count(rng):
    # rate-1 renewal = Poisson process: count over [0, 10] has mean 10, var 10
    reps = 2000
    counts = [
        renewal.generate_train(laws.Exponential(1.0), 0.0, 10.0, rng).marks.size
        for _ in range(reps)
    ]
    assert abs(np.mean(counts) - 10.0) <= 3.0 * math.sqrt(10.0 / reps)


def test_train_validation(rng):
    with pytest.raises(ValueError):
        renewal.generate_train(laws.Exponential(1.0), 0.5, 1.0, rng)
    with pytest.raises(ValueError):
        renewal.generate_train(laws.Exponential(1.0), 0.0, -1.0, rng)
    tr = renewal.generate_train(laws.Weibull(0.7, 1.0), -2.0, 30.0, rng)
    assert np.all(np.diff(tr.marks) > 0)
    assert tr.marks.min() >= 0.0 and tr.marks.max() <= 30.0


def test_last_mark_age():
    tr = renewal.RenewalTrain(site=0, tau=0.0, marks=np.array([1.0, 2.0, 3.0]), horizon=4.0)
    assert renewal.last_mark_age(tr, 2.5) == pytest.approx(0.5)
    assert renewal.last_mark_age(tr, 1.0) == 0.0  # mark at t counts as previous
    empty = renewal.RenewalTrain(site=0, tau=-1.0, marks=np.array([]), horizon=4.0)
    assert renewal.last_mark_age(empty, 2.0) == pytest.approx(3.0)
    with pytest.raises(ValueError):
        renewal.last_mark_age(tr, 4.5)
    with pytest.raises(ValueError):
        renewal.last_mark_age(tr, -0.1)


def test_gap_probability_deterministic_exact():
    est = renewal.gap_probability_estimate(
        laws.Deterministic(10.0), w=0.1, t_grid=[5.0], tau_grid=[0.0], n=2000, seed=1
    )
    assert est.rows[0].value == 0.0


def test_gap_probability_exponential_analytic():
    # Poisson marks: P(hit [t-w, t+w]) = 1 - exp(-2w) at any t with tau = 0
    w = 0.3
    est = renewal.gap_probability_estimate(
        laws.Exponential(1.0), w=w, t_grid=[5.0, 12.0], tau_grid=[0.0], n=40000, seed=2
    )
    expect = 1.0 - math.exp(-2.0 * w)
    for row in est.rows:
        assert abs(row.value - expect) <= 3.0 * row.sigma


def test_gap_probability_vanishes_with_width():
    est = renewal.gap_probability_estimate(
        laws.Weibull(0.7, 1.0), w=1e-4, t_grid=[0.5, 2.0], tau_grid=[0.0], n=20000, seed=3
    )
    assert est.max_value <= 0.005


def test_gap_probability_monotone_in_width():
    prev = -1.0
    for w in (0.05, 0.15, 0.4):
        est = renewal.gap_probability_estimate(
            laws.Exponential(1.0), w=w, t_grid=[2.0], tau_grid=[0.0], n=30000, seed=4
        )
        assert est.rows[0].value >= prev - 3.0 * est.rows[0].sigma
        prev = est.rows[0].value


def test_forward_gap_uniform_stationary_analytic():
    # equilibrium start: P(mark in [t, t+w]) = residual CDF = 2w - w^2 for uniform(1)
    w = 0.2
    est = renewal.forward_gap_probability(
        laws.UniformBounded(1.0), w=w, t_grid=[0.0], tau_grid=["stationary"],
        n=60000, seed=5,
    )
    expect = 2.0 * w - w * w
    assert abs(est.rows[0].value - expect) <= 3.0 * est.rows[0].sigma


def test_conditional_gap_exponential_memoryless():
    w = math.log(2.0)
    for t, k in [(0.0, 0.0), (1.0, 0.5), (3.0, 2.0)]:
        est = renewal.conditional_gap_estimate_dfr(
            laws.Exponential(1.0), t=t, k=k, w=w, n=40000, seed=6
        )
        assert abs(est.value - 0.5) <= 3.0 * est.sigma


def test_conditional_gap_dfr_bound_weibull():
    law = laws.Weibull(0.7, 1.0)
    w = 0.2
    bound = law.tail_ratio(w)
    for t, k in [(0.0, 0.0), (1.0, 0.5), (2.0, 2.0)]:
        est = renewal.conditional_gap_estimate_dfr(law, t=t, k=k, w=w, n=60000, seed=7)
        assert est.value <= bound + 3.0 * est.sigma
        assert est.acceptance is not None


def test_conditional_gap_small_width_small_probability():
    est = renewal.conditional_gap_estimate_dfr(
        laws.Weibull(0.7, 1.0), t=1.0, k=0.5, w=1e-4, n=30000, seed=8
    )
    assert est.value <= 0.01


def test_conditional_gap_rejection_floor():
    # no mark of a rate-60 Poisson process on a unit window is ~e^-60
    with pytest.raises(ConditioningTooRare):
        renewal.conditional_gap_estimate_dfr(
            laws.Exponential(60.0), t=0.0, k=1.0, w=0.1, n=20000, seed=9
        )


def test_conditional_gap_needs_continuity():
    with pytest.raises(UnsupportedLawOperation):
        renewal.conditional_gap_estimate_dfr(
            laws.Deterministic(1.0), t=0.0, k=0.5, w=0.1, n=100, seed=0
        )


def test_mark_count_tail_det_exact():
    est = renewal.mark_count_tail_estimate(
        laws.Deterministic(1.0), b=1.0, K=4, t_grid=[0.0, 0.7, 2.0], tau_grid=[0.0],
        n=2000, seed=10,
    )
    assert est.max_value == 0.0


def test_mark_count_tail_exponential_poisson_oracle():
    # count on [t, t+3] is Poisson(3) for every t (tau = 0)
    K = 5
    expect = st.poisson.sf(K, 3.0)
    est = renewal.mark_count_tail_estimate(
        laws.Exponential(1.0), b=1.0, K=K, t_grid=[0.0, 1.5, 4.0], tau_grid=[0.0],
        n=40000, seed=11,
    )
    for row in est.rows:
        assert abs(row.value - expect) <= 3.0 * row.sigma


def test_mark_count_tail_k0_positive():
    est = renewal.mark_count_tail_estimate(
        laws.Exponential(2.0), b=1.0, K=0, t_grid=[1.0], tau_grid=[0.0], n=5000, seed=12
    )
    assert est.rows[0].value > 0.5


def test_compute_k0_deterministic():
    for p0 in (0.3, 0.9):
        assert renewal.compute_K0(laws.Deterministic(1.0), 1.0, p0, n=4000, seed=13) == 4


def test_compute_k0_exponential_gamma_oracle():
    # P(sum of K-1 exp(1) < 3) = Gamma(K-1).cdf(3): 0.5768 at K=4, 0.3528 at K=5
    assert st.gamma.cdf(3.0, a=3) > 0.5 > st.gamma.cdf(3.0, a=4)
    assert renewal.compute_K0(laws.Exponential(1.0), 1.0, 0.5, n=30000, seed=14) == 5


def test_compute_k0_loose_bound_returns_two():
    assert renewal.compute_K0(laws.Exponential(1.0), 1.0, 0.999, n=30000, seed=15) == 2


def test_compute_k0_monotonicity():
    tight = renewal.compute_K0(laws.Exponential(1.0), 1.0, 0.05, n=20000, seed=16)
    loose = renewal.compute_K0(laws.Exponential(1.0), 1.0, 0.5, n=20000, seed=16)
    assert tight >= loose
    wide = renewal.compute_K0(laws.Exponential(1.0), 2.0, 0.5, n=20000, seed=16)
    assert wide >= loose


def test_compute_w0_dfr_frozen():
    # F(w0) = eps/2: -log(0.9) for exp(1), (-log 0.9)^2 for weibull(0.5, 1)
    assert renewal.compute_w0_dfr(laws.Exponential(1.0), 0.2) == pytest.approx(
        0.10536051565782628, rel=1e-6
    )
    assert renewal.compute_w0_dfr(laws.Weibull(0.5, 1.0), 0.2) == pytest.approx(
        0.011100838259683072, rel=1e-6
    )
    assert renewal.compute_w0_dfr(laws.Exponential(1.0), 1e-6) < 1e-6
    with pytest.raises(UnsupportedLawOperation):
        renewal.compute_w0_dfr(laws.Deterministic(1.0), 0.2)


def test_find_w0_forward_respects_level():
    law = laws.UniformBounded(1.0)
    p0 = 0.1
    w0 = renewal.find_w0_forward(law, p0, t_grid=[0.0, 0.5, 1.0], tau_grid=[0.0, "stationary"],
                                 n=30000, seed=17)
    assert w0 > 0.0
    est = renewal.forward_gap_probability(
        law, w0, t_grid=[0.0, 0.5, 1.0], tau_grid=[0.0, "stationary"], n=30000, seed=18
    )
    worst = est.argmax()
    assert worst.value <= p0 + 3.0 * worst.sigma


def test_proximity_deterministic_pair_enumeration():
    # marks at multiples of 10 and of 7 inside [0, 70]: the pair (70, 70)
    # has distance 0, so the proximity event is certain
    est = renewal.proximity_estimate(
        laws.Deterministic(10.0), t=0.0, s=70.0, w0=0.5, K1=None, K2=None, v=0.5,
        n=500, seed=19, law2=laws.Deterministic(7.0),
    )
    assert est.value == 1.0


def test_proximity_window_diameter_bound():
    # v wider than the window: any replica with marks in both trains qualifies
    est = renewal.proximity_estimate(
        laws.Deterministic(1.0), t=0.0, s=10.0, w0=0.5, K1=None, K2=None, v=11.0,
        n=300, seed=20,
    )
    assert est.value == 1.0


def test_proximity_vanishes_with_radius():
    est = renewal.proximity_estimate(
        laws.Exponential(1.0), t=0.0, s=3.0, w0=0.0, K1=None, K2=None, v=1e-5,
        n=30000, seed=21,
    )
    assert est.value <= 0.005


def test_proximity_monotone_in_radius():
    prev = -1.0
    for v in (0.01, 0.05, 0.2):
        est = renewal.proximity_estimate(
            laws.Exponential(1.0), t=0.0, s=3.0, w0=0.0, K1=None, K2=None, v=v,
            n=30000, seed=22,
        )
        assert est.value >= prev - 3.0 * est.sigma
        prev = est.value


def test_proximity_count_constraints_and_floor():
    est = renewal.proximity_estimate(
        laws.Exponential(1.0), t=0.0, s=3.0, w0=0.2, K1=4, K2=4, v=0.1,
        n=30000, seed=23,
    )
    assert 0.0 <= est.value <= 1.0 and est.acceptance < 1.0
    # only empty-train replicas satisfy S1 >= t + 50 (P ~ exp(-3))
    with pytest.raises(ConditioningTooRare):
        renewal.proximity_estimate(
            laws.Exponential(1.0), t=0.0, s=3.0, w0=50.0, K1=None, K2=None, v=0.1,
            n=5000, seed=24, floor=0.1,
        )


def test_proximity_quantile_self_consistent():
    law = laws.UniformBounded(1.0)
    q = 0.1
    v0 = renewal.proximity_quantile(law, q=q, s=3.0, w0=0.02, t_grid=[0.0, 1.0],
                                    n=40000, seed=25)
    assert v0 > 0.0
    est = renewal.proximity_estimate(
        law, t=0.0, s=3.0, w0=0.02, K1=None, K2=None, v=v0, n=40000, seed=26
    )
    assert est.value <= q + 3.0 * est.sigma


def test_exponential_conditional_gap_independent_of_history():
    # memorylessness: estimates agree across (t, k) cells within noise
    vals = []
    for t, k in [(0.0, 0.0), (2.0, 1.0), (5.0, 3.0)]:
        est = renewal.conditional_gap_estimate_dfr(
            laws.Exponential(1.3), t=t, k=k, w=0.25, n=30000, seed=27
        )
        vals.append((est.value, est.sigma))
    for (v1, s1), (v2, s2) in zip(vals, vals[1:]):
        assert abs(v1 - v2) <= 3.0 * math.hypot(s1, s2)


def test_grid_estimates_csv():
    est = renewal.gap_probability_estimate(
        laws.Exponential(1.0), w=0.2, t_grid=[0.0, 1.0], tau_grid=[0.0], n=2000, seed=30
    )
    header = est.csv_header()
    rows = est.csv_rows()
    assert "estimate" in header and "t" in header and len(rows) == 2
    assert all(len(r) == len(header) for r in rows)
