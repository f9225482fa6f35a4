"""The percolation structure: cure trains per site, Poisson arrow trains
per directed nearest-neighbor edge, on a finite space-time window.

Arrows carry a "level" drawn uniformly on (0, lambda]: an arrow is active
at transmission rate lam' <= lambda iff its level is at most lam'.  That
makes thinning a pure filter, exactly associative, and lets the engine
evaluate any lower rate on the same sample pathwise (monotone coupling).
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .laws import InterarrivalLaw
from .renewal import RenewalTrain, _mark_matrix
from .streams import substream

__all__ = [
    "GraphicalSample",
    "build",
    "thin",
    "restrict",
    "save",
    "load",
    "samples_equal",
    "resolve_tau_policy",
]

_MAGIC = b"RCPG1\n"


def resolve_tau_policy(policy, n_sites: int, rng, law) -> tuple[np.ndarray, bool, str]:
    """Turn a tau-policy descriptor into per-site offsets.

    Accepted forms: "zero" (default), "stationary", "uniform:a" for i.i.d.
    offsets on [-a, 0], or an explicit sequence of nonpositive floats.
    Returns (taus, stationary_flag, descriptor).
    """
    if policy is None:
        policy = "zero"
    if isinstance(policy, str):
        p = policy.strip().lower()
        if p == "zero":
            return np.zeros(n_sites), False, "zero"
        if p == "stationary":
            return np.zeros(n_sites), True, "stationary"
        if p.startswith("uniform:"):
            a = float(p.split(":", 1)[1])
            if a <= 0.0:
                raise ValueError("uniform tau policy needs a > 0")
            return -a * rng.random(n_sites), False, f"uniform:{a:g}"
        raise ValueError(f"unknown tau policy {policy!r}")
    taus = np.asarray(policy, dtype=float)
    if taus.shape != (n_sites,):
        raise ValueError(f"fixed tau list must have length {n_sites}")
    if np.any(taus > 0.0):
        raise ValueError("start offsets must be <= 0")
    return taus, False, "fixed"


@dataclass(eq=False)
class GraphicalSample:
    """Immutable-by-convention percolation structure on sites -L..L, [0,T]."""

    L: int
    T: float
    lam: float
    seed: int
    law_descriptor: str
    tau_policy: str
    cure_trains: list  # RenewalTrain per site, index x + L
    edges: list  # ordered (src, dst) pairs, lexicographic
    arrow_flat: np.ndarray  # arrow times grouped by edge, sorted within
    level_flat: np.ndarray  # activity levels in (0, lam]
    arrow_offsets: np.ndarray  # len(edges) + 1
    _table: object = field(default=None, repr=False, compare=False)

    @property
    def n_sites(self) -> int:
        return 2 * self.L + 1

    def site_index(self, x: int) -> int:
        if abs(x) > self.L:
            raise ValueError(f"site {x} outside window [-{self.L}, {self.L}]")
        return x + self.L

    def arrow_times(self, i: int) -> np.ndarray:
        return self.arrow_flat[self.arrow_offsets[i]:self.arrow_offsets[i + 1]]

    def arrow_levels(self, i: int) -> np.ndarray:
        return self.level_flat[self.arrow_offsets[i]:self.arrow_offsets[i + 1]]

    @property
    def n_arrows(self) -> int:
        return int(self.arrow_flat.size)

    def edge_index(self, src: int, dst: int) -> int:
        try:
            return self._edge_lookup[(src, dst)]
        except AttributeError:
            lookup = {e: i for i, e in enumerate(self.edges)}
            object.__setattr__(self, "_edge_lookup", lookup)
            return lookup[(src, dst)]

    def event_table(self) -> "EventTable":
        if self._table is None:
            self._table = _build_event_table(self)
        return self._table


@dataclass
class EventTable:
    """Time-ordered merge of all cure and arrow events, window-local indices."""

    times: np.ndarray  # f8, ascending (ties resolved: cures first, then edge order)
    kind: np.ndarray  # i1: 0 cure, 1 arrow
    a: np.ndarray  # i4: site (cure) or source (arrow), 0-based
    b: np.ndarray  # i4: destination (arrow) or -1
    level: np.ndarray  # f8: arrow level, 0 for cures
    cure_pos: np.ndarray  # i8: sorted indices of cure events
    n_sites: int


def _lex_edges(L: int) -> list:
    edges = []
    for s in range(-L, L + 1):
        for d in (s - 1, s + 1):
            if -L <= d <= L:
                edges.append((s, d))
    return edges


def build(
    law: InterarrivalLaw,
    lam: float,
    L: int,
    T: float,
    tau_policy="zero",
    seed: int = 0,
) -> GraphicalSample:
    """Generate the full structure; identical arguments give identical output.

    Generation order is fixed (start offsets, cure trains by ascending site,
    arrow trains by lexicographic edge), so one stream derived from the seed
    reproduces the sample exactly.
    """
    if lam < 0.0:
        raise ValueError("lambda must be nonnegative")
    if L < 1 or T <= 0.0:
        raise ValueError("need L >= 1 and T > 0")
    rng = substream(seed, "build")
    n_sites = 2 * L + 1
    taus, stationary, tau_desc = resolve_tau_policy(tau_policy, n_sites, rng, law)

    marks = _mark_matrix(law, taus, T, n_sites, rng, stationary=stationary)
    trains = []
    for j in range(n_sites):
        row = marks[j]
        row = row[np.isfinite(row)]
        row = row[row >= 0.0]
        trains.append(RenewalTrain(site=j - L, tau=float(taus[j]), marks=row, horizon=T))

    edges = _lex_edges(L)
    counts = rng.poisson(lam * T, len(edges)) if lam > 0.0 else np.zeros(len(edges), np.int64)
    total = int(counts.sum())
    offsets = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    raw = rng.random(total) * T
    edge_of = np.repeat(np.arange(len(edges)), counts)
    # composite key keeps edges separated and times ascending within an edge
    order = np.argsort(edge_of * (T + 1.0) + raw, kind="quicksort")
    times = raw[order]
    levels = rng.random(total) * lam
    return GraphicalSample(
        L=L,
        T=float(T),
        lam=float(lam),
        seed=int(seed),
        law_descriptor=law.descriptor(),
        tau_policy=tau_desc,
        cure_trains=trains,
        edges=edges,
        arrow_flat=times,
        level_flat=levels,
        arrow_offsets=offsets,
    )


def _build_event_table(sample: GraphicalSample) -> EventTable:
    L = sample.L
    cure_times = []
    cure_sites = []
    for j, tr in enumerate(sample.cure_trains):
        cure_times.append(tr.marks)
        cure_sites.append(np.full(tr.marks.size, j, dtype=np.int32))
    ct = np.concatenate(cure_times) if cure_times else np.empty(0)
    cs = np.concatenate(cure_sites) if cure_sites else np.empty(0, np.int32)

    n_arrows = sample.n_arrows
    counts = np.diff(sample.arrow_offsets)
    edge_src = np.array([s for s, _ in sample.edges], np.int32) + L
    edge_dst = np.array([d for _, d in sample.edges], np.int32) + L
    srcs = np.repeat(edge_src, counts)
    dsts = np.repeat(edge_dst, counts)

    times = np.concatenate([ct, sample.arrow_flat])
    kind = np.concatenate(
        [np.zeros(ct.size, np.int8), np.ones(n_arrows, np.int8)]
    )
    a = np.concatenate([cs, srcs])
    b = np.concatenate([np.full(ct.size, -1, np.int32), dsts])
    level = np.concatenate([np.zeros(ct.size), sample.level_flat])

    order = np.argsort(times, kind="quicksort")
    ts = times[order]
    dup = ts[1:] == ts[:-1]
    if dup.any():
        # simultaneous events exist (point-mass laws): restore the tie rule
        # "cures first, then arrows in lexicographic edge order"
        flat = np.flatnonzero(dup)
        runs = []
        start = flat[0]
        prev = flat[0]
        for p in flat[1:]:
            if p != prev + 1:
                runs.append((start, prev + 1))
                start = p
            prev = p
        runs.append((start, prev + 1))
        for lo, hi in runs:
            seg = order[lo : hi + 1]
            key = np.lexsort((b[seg], a[seg], kind[seg]))
            order[lo : hi + 1] = seg[key]
    return EventTable(
        times=times[order],
        kind=kind[order],
        a=a[order],
        b=b[order],
        level=level[order],
        cure_pos=np.flatnonzero(kind[order] == 0).astype(np.int64),
        n_sites=sample.n_sites,
    )


def thin(sample: GraphicalSample, lam_prime: float, rng=None) -> GraphicalSample:
    """Keep each arrow independently with probability lam'/lam.

    Without an explicit generator the stored levels decide (a nested,
    deterministic coupling: thin(thin(s, l1), l2) == thin(s, l2) exactly).
    With one, a fresh Bernoulli mask is drawn and levels are rescaled.
    """
    if not 0.0 <= lam_prime <= sample.lam:
        raise ValueError(f"lambda' must lie in [0, {sample.lam}], got {lam_prime}")
    if rng is None:
        keep = sample.level_flat <= lam_prime
        levels = sample.level_flat[keep]
    else:
        if sample.lam == 0.0:
            keep = np.zeros(0, dtype=bool)
        else:
            keep = rng.random(sample.n_arrows) < lam_prime / sample.lam
        levels = sample.level_flat[keep] * (lam_prime / sample.lam if sample.lam else 0.0)
    off = sample.arrow_offsets
    counts = np.array(
        [int(keep[off[i] : off[i + 1]].sum()) for i in range(len(sample.edges))],
        dtype=np.int64,
    )
    return GraphicalSample(
        L=sample.L,
        T=sample.T,
        lam=float(lam_prime),
        seed=sample.seed,
        law_descriptor=sample.law_descriptor,
        tau_policy=sample.tau_policy,
        cure_trains=sample.cure_trains,
        edges=sample.edges,
        arrow_flat=sample.arrow_flat[keep],
        level_flat=levels,
        arrow_offsets=np.concatenate([[0], np.cumsum(counts)]).astype(np.int64),
    )


def restrict(sample: GraphicalSample, L_small: int) -> GraphicalSample:
    """Sub-window coupling: drop sites and arrows outside [-L_small, L_small]."""
    if L_small > sample.L:
        raise ValueError("can only restrict to a smaller window")
    off = sample.L - L_small
    trains = sample.cure_trains[off : off + 2 * L_small + 1]
    trains = [
        RenewalTrain(site=t.site, tau=t.tau, marks=t.marks, horizon=t.horizon)
        for t in trains
    ]
    edges = _lex_edges(L_small)
    arrow_parts = []
    level_parts = []
    counts = []
    for (s, d) in edges:
        i = sample.edge_index(s, d)
        arrow_parts.append(sample.arrow_times(i))
        level_parts.append(sample.arrow_levels(i))
        counts.append(arrow_parts[-1].size)
    return GraphicalSample(
        L=L_small,
        T=sample.T,
        lam=sample.lam,
        seed=sample.seed,
        law_descriptor=sample.law_descriptor,
        tau_policy=sample.tau_policy,
        cure_trains=trains,
        edges=edges,
        arrow_flat=np.concatenate(arrow_parts) if arrow_parts else np.empty(0),
        level_flat=np.concatenate(level_parts) if level_parts else np.empty(0),
        arrow_offsets=np.concatenate([[0], np.cumsum(counts)]).astype(np.int64),
    )


def samples_equal(s1: GraphicalSample, s2: GraphicalSample) -> bool:
    if (s1.L, s1.T, s1.lam, s1.seed) != (s2.L, s2.T, s2.lam, s2.seed):
        return False
    if len(s1.cure_trains) != len(s2.cure_trains):
        return False
    for t1, t2 in zip(s1.cure_trains, s2.cure_trains):
        if t1.tau != t2.tau or not np.array_equal(t1.marks, t2.marks):
            return False
    return (
        np.array_equal(s1.arrow_offsets, s2.arrow_offsets)
        and np.array_equal(s1.arrow_flat, s2.arrow_flat)
        and np.array_equal(s1.level_flat, s2.level_flat)
    )


# ---------------------------------------------------------------------------
# binary dump / restore (little-endian float64 arrays)
# ---------------------------------------------------------------------------


def _write_arr(fh, arr):
    arr = np.asarray(arr, dtype="<f8")
    fh.write(struct.pack("<Q", arr.size))
    fh.write(arr.tobytes())


def _read_arr(fh):
    (n,) = struct.unpack("<Q", fh.read(8))
    return np.frombuffer(fh.read(8 * n), dtype="<f8").copy()


def save(sample: GraphicalSample, path) -> None:
    """Dump to the replayable binary format: header, per-site trains,
    per-edge time and level arrays."""
    header = json.dumps(
        {
            "L": sample.L,
            "T": sample.T,
            "lambda": sample.lam,
            "seed": sample.seed,
            "law": sample.law_descriptor,
            "tau_policy": sample.tau_policy,
        }
    ).encode()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        _write_arr(fh, [t.tau for t in sample.cure_trains])
        for t in sample.cure_trains:
            _write_arr(fh, t.marks)
        fh.write(struct.pack("<Q", len(sample.edges)))
        for i in range(len(sample.edges)):
            _write_arr(fh, sample.arrow_times(i))
            _write_arr(fh, sample.arrow_levels(i))


def load(path) -> GraphicalSample:
    with open(path, "rb") as fh:
        if fh.read(len(_MAGIC)) != _MAGIC:
            raise ValueError(f"{path}: not a sample dump")
        (hlen,) = struct.unpack("<I", fh.read(4))
        hdr = json.loads(fh.read(hlen))
        L = int(hdr["L"])
        T = float(hdr["T"])
        taus = _read_arr(fh)
        trains = [
            RenewalTrain(site=j - L, tau=float(taus[j]), marks=_read_arr(fh), horizon=T)
            for j in range(2 * L + 1)
        ]
        (n_edges,) = struct.unpack("<Q", fh.read(8))
        edges = _lex_edges(L)
        if n_edges != len(edges):
            raise ValueError("edge count mismatch in dump")
        arrow_parts = []
        level_parts = []
        for _ in range(n_edges):
            arrow_parts.append(_read_arr(fh))
            level_parts.append(_read_arr(fh))
        counts = [a.size for a in arrow_parts]
        return GraphicalSample(
            L=L,
            T=T,
            lam=float(hdr["lambda"]),
            seed=int(hdr["seed"]),
            law_descriptor=hdr["law"],
            tau_policy=hdr["tau_policy"],
            cure_trains=trains,
            edges=edges,
            arrow_flat=np.concatenate(arrow_parts) if arrow_parts else np.empty(0),
            level_flat=np.concatenate(level_parts) if level_parts else np.empty(0),
            arrow_offsets=np.concatenate([[0], np.cumsum(counts)]).astype(np.int64),
        )
