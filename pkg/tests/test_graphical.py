import math

import numpy as np
import pytest
import scipy.stats as st

from rcplab import graphical, laws
from rcplab.renewal import RenewalTrain


def _tiny_samples(lam, T, reps, seed0=0, L=1, law=None):
    law = law or laws.Exponential(1.0)
    return [graphical.build(law, lam, L, T, seed=seed0 + i) for i in range(reps)]


def test_zero_rate_has_no_arrows():
    s = graphical.build(laws.Exponential(1.0), 0.0, 5, 10.0, seed=1)
    assert s.n_arrows == 0


def test_arrow_counts_poisson_mean():
    lam, T, reps = 2.0, 5.0, 400
    samples = _tiny_samples(lam, T, reps)
    edge = samples[0].edge_index(0, 1)
    counts = np.array([s.arrow_times(edge).size for s in samples])
    assert abs(counts.mean() - lam * T) <= 3.0 * math.sqrt(lam * T / reps)


def test_arrow_counts_poisson_gof():
    # chi-square goodness of fit of per-edge counts against Poisson(lam*T)
    lam, T, reps = 2.0, 5.0, 2000
    samples = _tiny_samples(lam, T, reps, seed0=100)
    edge = samples[0].edge_index(0, -1)
    counts = np.array([s.arrow_times(edge).size for s in samples])
    kmax = int(counts.max())
    obs = np.bincount(counts, minlength=kmax + 1).astype(float)
    probs = st.poisson.pmf(np.arange(kmax + 1), lam * T)
    probs[-1] += st.poisson.sf(kmax, lam * T)
    # merge sparse tail bins to keep expectations above 5
    exp = probs * reps
    while exp.size > 2 and exp[-1] < 5:
        exp[-2] += exp[-1]
        obs[-2] += obs[-1]
        exp, obs = exp[:-1], obs[:-1]
    stat, p = st.chisquare(obs, exp * obs.sum() / exp.sum())
    assert p > 0.001


def test_build_determinism():
    a = graphical.build(laws.Weibull(0.7, 1.0), 1.5, 10, 20.0, seed=42)
    b = graphical.build(laws.Weibull(0.7, 1.0), 1.5, 10, 20.0, seed=42)
    assert graphical.samples_equal(a, b)
    c = graphical.build(laws.Weibull(0.7, 1.0), 1.5, 10, 20.0, seed=43)
    assert not graphical.samples_equal(a, c)


def test_thinning_fraction_and_nesting():
    s = graphical.build(laws.Exponential(1.0), 3.0, 20, 30.0, seed=7)
    half = graphical.thin(s, 1.5)
    frac = half.n_arrows / s.n_arrows
    sig = math.sqrt(0.25 / s.n_arrows)
    assert abs(frac - 0.5) <= 3.0 * sig
    assert half.lam == 1.5
    # nested thinning composes exactly
    ab = graphical.thin(graphical.thin(s, 2.0), 0.7)
    direct = graphical.thin(s, 0.7)
    assert graphical.samples_equal(ab, direct)
    # thinned arrows are a subset of the original
    assert np.isin(half.arrow_flat, s.arrow_flat).all()
    # limits
    assert graphical.thin(s, 0.0).n_arrows == 0
    assert graphical.samples_equal(graphical.thin(s, 3.0), s)
    with pytest.raises(ValueError):
        graphical.thin(s, 3.5)


def test_thinning_fresh_rng(rng):
    s = graphical.build(laws.Exponential(1.0), 2.0, 15, 20.0, seed=8)
    t = graphical.thin(s, 1.0, rng=rng)
    frac = t.n_arrows / s.n_arrows
    assert abs(frac - 0.5) <= 3.0 * math.sqrt(0.25 / s.n_arrows)
    assert np.all(t.level_flat <= 1.0 + 1e-12)


def test_thinned_counts_stay_poisson():
    lam, T, reps, r = 4.0, 5.0, 1500, 0.5
    samples = _tiny_samples(lam, T, reps, seed0=300)
    edge = samples[0].edge_index(0, 1)
    counts = np.array(
        [graphical.thin(s, r * lam).arrow_times(edge).size for s in samples]
    )
    mean = r * lam * T
    assert abs(counts.mean() - mean) <= 3.0 * math.sqrt(mean / reps)
    assert abs(counts.var() - mean) <= 4.0 * mean / math.sqrt(reps)


def test_edge_independence_correlations():
    reps = 600
    samples = _tiny_samples(1.5, 8.0, reps, seed0=500, L=4)
    e1 = samples[0].edge_index(-3, -2)
    e2 = samples[0].edge_index(2, 3)  # no shared endpoint
    c1 = np.array([s.arrow_times(e1).size for s in samples], dtype=float)
    c2 = np.array([s.arrow_times(e2).size for s in samples], dtype=float)
    corr = np.corrcoef(c1, c2)[0, 1]
    assert abs(corr) <= 3.0 / math.sqrt(reps)


def test_opposite_edges_iid():
    reps = 600
    samples = _tiny_samples(2.0, 6.0, reps, seed0=700, L=2)
    fwd = samples[0].edge_index(0, 1)
    rev = samples[0].edge_index(1, 0)
    a = np.array([s.arrow_times(fwd).size for s in samples], dtype=float)
    b = np.array([s.arrow_times(rev).size for s in samples], dtype=float)
    sig = math.sqrt((a.var() + b.var()) / reps)
    assert abs(a.mean() - b.mean()) <= 3.0 * sig
    assert abs(np.corrcoef(a, b)[0, 1]) <= 3.0 / math.sqrt(reps)


def test_cure_count_independence_across_sites():
    reps = 600
    samples = _tiny_samples(0.5, 10.0, reps, seed0=900, L=3)
    a = np.array([s.cure_trains[0].marks.size for s in samples], dtype=float)
    b = np.array([s.cure_trains[5].marks.size for s in samples], dtype=float)
    assert abs(np.corrcoef(a, b)[0, 1]) <= 3.0 / math.sqrt(reps)


def test_tau_policies(rng):
    s = graphical.build(laws.Exponential(1.0), 1.0, 3, 5.0, tau_policy="uniform:2", seed=3)
    taus = np.array([t.tau for t in s.cure_trains])
    assert np.all(taus <= 0.0) and np.all(taus >= -2.0) and np.unique(taus).size > 1
    fixed = [-0.5] * 7
    s = graphical.build(laws.Exponential(1.0), 1.0, 3, 5.0, tau_policy=fixed, seed=3)
    assert all(t.tau == -0.5 for t in s.cure_trains)
    s = graphical.build(laws.Exponential(1.0), 1.0, 3, 5.0, tau_policy="stationary", seed=3)
    assert s.tau_policy == "stationary"
    with pytest.raises(ValueError):
        graphical.build(laws.Exponential(1.0), 1.0, 3, 5.0, tau_policy="nope", seed=3)
    with pytest.raises(ValueError):
        graphical.build(laws.Exponential(1.0), 1.0, 3, 5.0, tau_policy=[0.5] * 7, seed=3)


def test_save_load_round_trip(tmp_path):
    s = graphical.build(laws.Weibull(0.7, 1.3), 1.7, 6, 12.0, tau_policy="uniform:1", seed=11)
    path = tmp_path / "sample.rcpg"
    graphical.save(s, path)
    loaded = graphical.load(path)
    assert graphical.samples_equal(s, loaded)
    assert loaded.law_descriptor == s.law_descriptor
    assert loaded.tau_policy == s.tau_policy
    with pytest.raises(ValueError):
        bad = tmp_path / "bad.rcpg"
        bad.write_bytes(b"not a dump")
        graphical.load(bad)


def test_restrict_is_subwindow_coupling():
    s = graphical.build(laws.Exponential(1.0), 2.0, 10, 10.0, seed=13)
    r = graphical.restrict(s, 4)
    assert r.L == 4 and len(r.cure_trains) == 9
    for x in range(-4, 5):
        assert np.array_equal(
            r.cure_trains[x + 4].marks, s.cure_trains[x + 10].marks
        )
    for (a, b) in r.edges:
        i_r = r.edge_index(a, b)
        i_s = s.edge_index(a, b)
        assert np.array_equal(r.arrow_times(i_r), s.arrow_times(i_s))


def test_event_table_sorted_and_tiebroken():
    # hand-built sample with a cure and arrows at the same timestamp
    marks = [np.array([1.0]), np.array([]), np.array([])]
    trains = [
        RenewalTrain(site=x - 1, tau=0.0, marks=m, horizon=2.0)
        for x, m in enumerate(marks)
    ]
    edges = graphical._lex_edges(1)
    times = {(-1, 0): [1.0], (0, 1): [1.0], (0, -1): [], (1, 0): []}
    flat, offs = [], [0]
    for e in edges:
        flat.extend(times[e])
        offs.append(offs[-1] + len(times[e]))
    sample = graphical.GraphicalSample(
        L=1, T=2.0, lam=1.0, seed=0, law_descriptor="hand", tau_policy="zero",
        cure_trains=trains, edges=edges,
        arrow_flat=np.array(flat), level_flat=np.zeros(len(flat)),
        arrow_offsets=np.array(offs, dtype=np.int64),
    )
    tbl = sample.event_table()
    assert np.all(np.diff(tbl.times) >= 0.0)
    same = np.flatnonzero(tbl.times == 1.0)
    kinds = tbl.kind[same].tolist()
    assert kinds == sorted(kinds)  # cures first
    arrow_rows = same[tbl.kind[same] == 1]
    pairs = [(tbl.a[i], tbl.b[i]) for i in arrow_rows]
    assert pairs == sorted(pairs)  # lexicographic edge order


def test_build_argument_validation():
    with pytest.raises(ValueError):
        graphical.build(laws.Exponential(1.0), -0.5, 3, 5.0)
    with pytest.raises(ValueError):
        graphical.build(laws.Exponential(1.0), 1.0, 0, 5.0)
    with pytest.raises(ValueError):
        graphical.build(laws.Exponential(1.0), 1.0, 3, 0.0)
