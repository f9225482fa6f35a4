"""Block renormalization: map crossing indicators to an oriented bond
field on the wedge 0 <= x <= y+1 and check oriented percolation.

A horizontal edge (x,y)->(x+1,y) is open when its box is crossed
horizontally, a vertical edge (x,y)->(x,y+1) when its box is crossed
vertically.  Bounded scheme boxes: [2x,2x+3] x [2yb,2yb+b] and
[2x,2x+1] x [2yb,2yb+3b].  Decreasing-hazard scheme: [2x,2x+3] x
[y,y+0.3] and [2x,2x+1] x [y,y+1].

Edge states are evaluated with the crossing start site infected at the
box base ("base" mode), which makes the field well-defined without
reference to a particular infection history; a "global" mode instead
reads the realized crossings out of one full dynamics run.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .crossings import BoxSpec, horizontal_crossing, vertical_crossing
from .engine import infection_intervals
from .errors import WindowTooSmall
from .graphical import build, resolve_tau_policy
from .renewal import _mark_matrix
from .stats import MCEstimate, binom_sigma
from .streams import kernel_seeds, substream

__all__ = [
    "BlockField",
    "block_map",
    "block_map_global",
    "percolates",
    "bernoulli_field",
    "sample_block_field",
    "DependencyReport",
    "marginal_and_dependency_report",
]

#: above this rate the boxwise sampler takes over from materialized samples
BOXWISE_RATE = 200.0


@dataclass
class BlockField:
    """Oriented-edge states on the wedge; cells outside it are absent."""

    n_cols: int
    n_rows: int
    h_open: np.ndarray  # bool [n_rows, n_cols]
    v_open: np.ndarray  # bool [n_rows, n_cols]
    scheme: str
    lam: float
    law_descriptor: str
    seed: int
    b: float | None = None

    def cell_valid(self, x: int, y: int) -> bool:
        return 0 <= x <= y + 1

    def h_valid(self, x: int, y: int) -> bool:
        # both endpoints in the wedge and in the grid
        return x + 1 < self.n_cols and 0 <= x and x + 1 <= y + 1

    def v_valid(self, x: int, y: int) -> bool:
        return self.cell_valid(x, y)

    def csv_rows(self):
        rows = []
        for y in range(self.n_rows):
            for x in range(self.n_cols):
                if self.h_valid(x, y):
                    rows.append((x, y, "H", int(self.h_open[y, x])))
                if self.v_valid(x, y):
                    rows.append((x, y, "V", int(self.v_open[y, x])))
        return rows


def _box_geometry(scheme, b, x, y, kind):
    if scheme == "bounded":
        base = 2.0 * y * b
        return BoxSpec(kind=kind, x=2 * x, t=base, scheme="bounded", b=b)
    return BoxSpec(kind=kind, x=2 * x, t=float(y), scheme="dfr")


def field_window(scheme, n_cols, n_rows, b=None, literal_unit_height=False):
    """(L, T) a sample must cover for an n_cols x n_rows field."""
    L = 2 * (n_cols - 1) + 3
    if scheme == "bounded":
        T = 2.0 * b * (n_rows - 1) + 3.0 * b
        if literal_unit_height:
            T = max(T, 2.0 * b * (n_rows - 1) + 1.0)
    else:
        T = float(n_rows)
    return L, T


def block_map(
    sample,
    scheme,
    n_cols,
    n_rows,
    b=None,
    start="base",
    literal_unit_height=False,
) -> BlockField:
    """Evaluate every edge's crossing on a shared sample.

    ``literal_unit_height`` forces height-1 horizontal boxes in the
    bounded scheme (the alternative reading of the block geometry); the
    default uses height b so that horizontal boxes tile the 3b-tall
    vertical ones for any b.
    """
    if scheme not in ("bounded", "dfr"):
        raise ValueError(f"unknown scheme {scheme!r}")
    if scheme == "bounded" and (b is None or b <= 0.0):
        raise ValueError("bounded scheme needs b > 0")
    if start != "base":
        raise ValueError("block_map evaluates 'base' mode; see block_map_global")
    L_need, T_need = field_window(scheme, n_cols, n_rows, b, literal_unit_height)
    if sample.L < L_need or sample.T < T_need - 1e-12:
        raise WindowTooSmall(
            f"field {n_cols}x{n_rows} needs L>={L_need}, T>={T_need}; "
            f"sample has L={sample.L}, T={sample.T}"
        )
    h_open = np.zeros((n_rows, n_cols), dtype=bool)
    v_open = np.zeros((n_rows, n_cols), dtype=bool)
    for y in range(n_rows):
        for x in range(n_cols):
            if x > y + 1:
                continue
            if literal_unit_height and scheme == "bounded":
                # alternative reading: horizontal boxes of height exactly 1
                h_open[y, x] = _crossing_fixed_height(sample, 2 * x, 2.0 * y * b, 1.0)
            else:
                hbox = _box_geometry(scheme, b, x, y, "horizontal")
                h_open[y, x] = horizontal_crossing(sample, hbox, start=2 * x)
            vbox = _box_geometry(scheme, b, x, y, "vertical")
            v_open[y, x] = vertical_crossing(sample, vbox, start=2 * x)
    return BlockField(
        n_cols=n_cols, n_rows=n_rows, h_open=h_open, v_open=v_open,
        scheme=scheme, lam=sample.lam, law_descriptor=sample.law_descriptor,
        seed=sample.seed, b=b,
    )


def _crossing_fixed_height(sample, x, t, height):
    from .engine import evolve

    out = evolve(sample, [x], sites=(x, x + 3), window=(t, t + height), stop_site=x + 3)
    return out.status == "stopped"


def block_map_global(sample, scheme, n_cols, n_rows, b=None, initial=(0,)) -> BlockField:
    """Read edge states out of one global run started from ``initial``:
    a horizontal box counts as crossed when its far site was infected at
    some time inside the box, a vertical box when one of its sites was
    infected at the box top.  This matches the survival implication but
    not the boxes' path confinement; it is a diagnostic mode."""
    L_need, T_need = field_window(scheme, n_cols, n_rows, b)
    if sample.L < L_need or sample.T < T_need - 1e-12:
        raise WindowTooSmall("sample window too small for requested field")
    sites, starts, ends = infection_intervals(sample, initial)
    per_site: dict[int, list[tuple[float, float]]] = {}
    for s, a, e in zip(sites, starts, ends):
        per_site.setdefault(int(s), []).append((a, e))

    def infected_during(site, lo, hi):
        return any(a <= hi and e >= lo for a, e in per_site.get(site, ()))

    def infected_at(site, t):
        return any(a <= t < e or (a == t == e) for a, e in per_site.get(site, ()))

    h_open = np.zeros((n_rows, n_cols), dtype=bool)
    v_open = np.zeros((n_rows, n_cols), dtype=bool)
    for y in range(n_rows):
        for x in range(n_cols):
            if x > y + 1:
                continue
            hbox = _box_geometry(scheme, b, x, y, "horizontal")
            h_open[y, x] = infected_during(hbox.x + 3, hbox.t, hbox.top)
            vbox = _box_geometry(scheme, b, x, y, "vertical")
            v_open[y, x] = infected_at(vbox.x, vbox.top) or infected_at(vbox.x + 1, vbox.top)
    return BlockField(
        n_cols=n_cols, n_rows=n_rows, h_open=h_open, v_open=v_open,
        scheme=scheme, lam=sample.lam, law_descriptor=sample.law_descriptor,
        seed=sample.seed, b=b,
    )


def percolates(fld: BlockField, depth: int) -> bool:
    """True iff an open oriented path inside the wedge joins (0,0) to a
    vertex with second coordinate ``depth``."""
    if depth > fld.n_rows:
        raise ValueError(f"depth {depth} exceeds {fld.n_rows} rows")
    return bool(kernels.percolation_depth(fld.h_open, fld.v_open, depth))


def bernoulli_field(p, n_cols, n_rows, rng) -> BlockField:
    """Independent comparison field with edge density p."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must be in [0, 1]")
    return BlockField(
        n_cols=n_cols, n_rows=n_rows,
        h_open=rng.random((n_rows, n_cols)) < p,
        v_open=rng.random((n_rows, n_cols)) < p,
        scheme="bernoulli", lam=float("nan"), law_descriptor=f"bernoulli({p:g})",
        seed=0,
    )


def sample_block_field(
    law, lam, scheme, n_cols, n_rows, b=None, tau_policy="zero", seed=0,
    sampler="auto",
) -> BlockField:
    """Draw one dependent field.

    sampler="shared" materializes a full graphical sample and evaluates
    every box on it (exact joint law).  sampler="boxwise" shares the cure
    trains exactly but draws each box's transmission clocks independently
    -- the only feasible route at the very large constructive rates; the
    arrow overlap between boxes sharing an endpoint is then ignored.
    "auto" switches to boxwise above a rate threshold.
    """
    if scheme not in ("bounded", "dfr"):
        raise ValueError(f"unknown scheme {scheme!r}")
    if scheme == "bounded" and (b is None or b <= 0.0):
        raise ValueError("bounded scheme needs b > 0")
    if sampler == "auto":
        sampler = "boxwise" if lam > BOXWISE_RATE else "shared"
    if sampler == "shared":
        L, T = field_window(scheme, n_cols, n_rows, b)
        sample = build(law, lam, L, T, tau_policy=tau_policy, seed=seed)
        return block_map(sample, scheme, n_cols, n_rows, b=b)
    if sampler != "boxwise":
        raise ValueError(f"unknown sampler {sampler!r}")

    n_sites = 2 * (n_cols - 1) + 4
    _, T = field_window(scheme, n_cols, n_rows, b)
    rng = substream(seed, "field-trains")
    taus, stationary, _ = resolve_tau_policy(tau_policy, n_sites, rng, law)
    marks = _mark_matrix(law, taus, T, n_sites, rng, stationary=stationary)
    rows = []
    for j in range(n_sites):
        r = marks[j]
        r = r[np.isfinite(r)]
        rows.append(r[r >= 0.0])
    flat = np.concatenate(rows) if rows else np.empty(0)
    off = np.concatenate([[0], np.cumsum([r.size for r in rows])]).astype(np.int64)
    h_open = np.zeros((n_rows, n_cols), dtype=np.bool_)
    v_open = np.zeros((n_rows, n_cols), dtype=np.bool_)
    kseed = int(kernel_seeds(seed, "field-arrows", 1)[0])
    kernels.field_boxwise(
        flat, off, float(lam), scheme == "bounded",
        float(b if b is not None else 1.0), n_cols, n_rows, kseed,
        h_open, v_open,
    )
    return BlockField(
        n_cols=n_cols, n_rows=n_rows, h_open=h_open, v_open=v_open,
        scheme=scheme, lam=float(lam), law_descriptor=law.descriptor(),
        seed=int(seed), b=b,
    )


# ---------------------------------------------------------------------------
# marginals, dependency ranges, independent-field comparison
# ---------------------------------------------------------------------------


@dataclass
class DependencyReport:
    """Edge marginals, grouped pairwise correlations, percolation rates."""

    n: int
    marginal_h: MCEstimate
    marginal_v: MCEstimate
    correlations: list  # (group, mean_corr, max_abs_corr, sigma, n_pairs, flagged)
    percolation: MCEstimate
    bernoulli_rows: list  # (rho, percolation estimate, sigma)

    def csv_rows(self):
        rows = [
            ("marginal", "H", self.marginal_h.value, self.marginal_h.sigma, ""),
            ("marginal", "V", self.marginal_v.value, self.marginal_v.sigma, ""),
            ("percolation", "dependent", self.percolation.value, self.percolation.sigma, ""),
        ]
        for group, mean_c, max_c, sig, n_pairs, flagged in self.correlations:
            rows.append(("correlation", group, mean_c, sig, "flagged" if flagged else ""))
        for rho, est, sig in self.bernoulli_rows:
            rows.append(("percolation", f"bernoulli:{rho:g}", est, sig, ""))
        return rows


def _pair_correlations(stack_a, stack_b):
    """Pearson correlations across replicas for paired edge indicators.
    Constant indicators are trivially independent; their correlation is 0."""
    out = []
    for a, b in zip(stack_a, stack_b):
        sa = a.std()
        sb = b.std()
        if sa == 0.0 or sb == 0.0:
            out.append(0.0)
        else:
            out.append(float(np.mean((a - a.mean()) * (b - b.mean())) / (sa * sb)))
    return np.array(out)


def marginal_and_dependency_report(
    law, lam, scheme, n, n_cols=8, n_rows=8, b=None, tau_policy="zero",
    seed=0, sampler="auto", rho_grid=(0.6, 0.8, 0.9, 0.95, 0.99), depth=None,
    row_gap=1,
) -> DependencyReport:
    """Estimate per-edge-type open probabilities, pairwise correlations
    grouped by how the underlying boxes relate (time-disjoint same column,
    shared endpoint, same cell), and percolation rates of the dependent
    field next to independent fields over a density grid.

    In the bounded scheme, horizontal boxes in one column whose rows differ
    by ``row_gap`` >= 1 are disjoint in time with gap >= b; those pairs are
    flagged when their |correlation| exceeds three standard errors.
    """
    if n < 2:
        raise ValueError("need n >= 2 replicas")
    depth = n_rows if depth is None else depth
    h_stack = np.zeros((n, n_rows, n_cols), dtype=bool)
    v_stack = np.zeros((n, n_rows, n_cols), dtype=bool)
    perc = np.zeros(n, dtype=bool)
    for r in range(n):
        fld = sample_block_field(
            law, lam, scheme, n_cols, n_rows, b=b, tau_policy=tau_policy,
            seed=int(substream(seed, "report", r).integers(0, 2**63 - 1)),
            sampler=sampler,
        )
        h_stack[r] = fld.h_open
        v_stack[r] = fld.v_open
        perc[r] = percolates(fld, depth)

    proto = BlockField(n_cols, n_rows, h_stack[0], v_stack[0], scheme, lam,
                       law.descriptor(), seed, b)
    h_cells = [(x, y) for y in range(n_rows) for x in range(n_cols) if proto.h_valid(x, y)]
    v_cells = [(x, y) for y in range(n_rows) for x in range(n_cols) if proto.v_valid(x, y)]

    def marg(stack, cells):
        per_rep = np.array([stack[r][[y for _, y in cells], [x for x, _ in cells]].mean()
                            for r in range(n)])
        return MCEstimate(float(per_rep.mean()), float(per_rep.std() / math.sqrt(n)), n)

    sig = 1.0 / math.sqrt(n)
    groups = []

    def add_group(name, pairs_a, pairs_b):
        if not pairs_a:
            return
        corr = _pair_correlations(
            [h_or_v[0][:, y, x] for h_or_v, (x, y) in pairs_a],
            [h_or_v[0][:, y, x] for h_or_v, (x, y) in pairs_b],
        )
        flagged = bool(np.any(np.abs(corr) > 3.0 * sig))
        groups.append((name, float(corr.mean()), float(np.abs(corr).max()),
                       sig, len(corr), flagged))

    # time-disjoint horizontal pairs in the same column (gap >= b when bounded)
    dis_a, dis_b = [], []
    for (x, y) in h_cells:
        if (x, y + row_gap) in h_cells:
            dis_a.append(((h_stack,), (x, y)))
            dis_b.append(((h_stack,), (x, y + row_gap)))
    add_group(f"h-time-disjoint-gap{row_gap}", dis_a, dis_b)

    # shared-endpoint horizontal neighbors in one row (report only)
    sh_a, sh_b = [], []
    for (x, y) in h_cells:
        if (x + 1, y) in h_cells:
            sh_a.append(((h_stack,), (x, y)))
            sh_b.append(((h_stack,), (x + 1, y)))
    add_group("h-shared-endpoint", sh_a, sh_b)

    # vertical neighbors in one column (overlapping boxes when bounded)
    vv_a, vv_b = [], []
    for (x, y) in v_cells:
        if (x, y + 1) in v_cells:
            vv_a.append(((v_stack,), (x, y)))
            vv_b.append(((v_stack,), (x, y + 1)))
    add_group("v-same-column-adjacent", vv_a, vv_b)

    # horizontal and vertical edge of one cell (shared box randomness)
    hv_a, hv_b = [], []
    for (x, y) in h_cells:
        if (x, y) in v_cells:
            hv_a.append(((h_stack,), (x, y)))
            hv_b.append(((v_stack,), (x, y)))
    add_group("hv-same-cell", hv_a, hv_b)

    p_hat = float(perc.mean())
    perc_est = MCEstimate(p_hat, binom_sigma(p_hat, n), n)

    brng = substream(seed, "report-bernoulli")
    bern_rows = []
    for rho in rho_grid:
        hits = sum(
            percolates(bernoulli_field(rho, n_cols, n_rows, brng), depth)
            for _ in range(n)
        )
        q = hits / n
        bern_rows.append((float(rho), q, binom_sigma(q, n)))

    return DependencyReport(
        n=n,
        marginal_h=marg(h_stack, h_cells),
        marginal_v=marg(v_stack, v_cells),
        correlations=groups,
        percolation=perc_est,
        bernoulli_rows=bern_rows,
    )
