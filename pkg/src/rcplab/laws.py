"""Interarrival laws for the cure-mark renewal processes.

Each law knows how to draw samples, evaluate its distribution function,
and (for the absolutely continuous families) its density and hazard rate
f(t)/(1-F(t)).  Laws are immutable after construction and safe to share
across threads; all randomness comes from caller-supplied generators.

The textual grammar accepted by :func:`parse_law` is::

    exp(rate) | weibull(shape,scale) | uniform(b) | pareto(alpha,xmin)
    | det(c) | empirical(path)

where ``path`` names a file with one decimal time per line.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InfiniteTailRatio, UnsupportedLawOperation

__all__ = [
    "InterarrivalLaw",
    "Exponential",
    "Weibull",
    "UniformBounded",
    "Pareto",
    "Deterministic",
    "Empirical",
    "DfrVerdict",
    "parse_law",
    "residual_table",
    "sample_stationary_residual",
]

# law codes used by the jitted kernels
KIND_EXP, KIND_WEIBULL, KIND_UNIFORM, KIND_PARETO, KIND_DET, KIND_EMPIRICAL = range(6)

_EMPTY = np.empty(0, dtype=np.float64)


@dataclass(frozen=True)
class DfrVerdict:
    """Answer of a decreasing-failure-rate check."""

    dfr: bool
    numeric: bool = False


def _positive(name: str, value: float) -> float:
    value = float(value)
    if not value > 0.0 or not math.isfinite(value):
        raise ValueError(f"{name} must be strictly positive, got {value!r}")
    return value


class InterarrivalLaw:
    """Base class; concrete laws fill in the family-specific pieces."""

    #: True for the absolutely continuous families (density/hazard defined).
    continuous = True

    def sample(self, rng: np.random.Generator, n: int | None = None):
        """Draw one value (``n is None``) or an array of ``n`` values."""
        out = self._draw(rng, 1 if n is None else int(n))
        return float(out[0]) if n is None else out

    def _draw(self, rng, n):  # pragma: no cover - abstract
        raise NotImplementedError

    def cdf(self, t):
        raise NotImplementedError

    def density(self, t):
        self._require_continuous("density")
        return self._density(t)

    def hazard(self, t):
        """f(t)/(1-F(t)); reported as +inf once F(t) = 1."""
        self._require_continuous("hazard")
        t = np.asarray(t, dtype=float)
        f = np.asarray(self._density(t), dtype=float)
        s = 1.0 - np.asarray(self.cdf(t), dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            h = np.where(s > 0.0, f / np.where(s > 0.0, s, 1.0), np.inf)
        return float(h) if h.ndim == 0 else h

    def _density(self, t):  # pragma: no cover - abstract
        raise NotImplementedError

    def mean(self) -> float:
        raise NotImplementedError

    def support_upper(self) -> float:
        """Essential supremum of the interarrival distribution."""
        return math.inf

    def tail_ratio(self, w: float) -> float:
        """The odds F(w)/(1-F(w)) of an interarrival not exceeding ``w``."""
        if w < 0.0:
            raise ValueError("w must be nonnegative")
        f = float(self.cdf(w))
        if f >= 1.0:
            raise InfiniteTailRatio(f"F({w}) = 1 for {self.descriptor()}")
        return f / (1.0 - f)

    def is_dfr(self, method: str = "auto") -> DfrVerdict:
        """Whether the hazard rate is nonincreasing on the support.

        Parametric families answer analytically; ``method="numeric"``
        forces a monotonicity check of the hazard on a log-spaced grid.
        """
        self._require_continuous("is_dfr")
        if method == "auto":
            verdict = self._dfr_analytic()
            if verdict is not None:
                return verdict
        elif method != "numeric":
            raise ValueError(f"unknown method {method!r}")
        return DfrVerdict(self._dfr_numeric(), numeric=True)

    def _dfr_analytic(self) -> DfrVerdict | None:
        return None

    def _dfr_numeric(self, points: int = 400) -> bool:
        lo, hi = self._hazard_grid()
        grid = np.geomspace(lo, hi, points)
        # drop the far tail where 1-F underflows and the ratio turns noisy
        grid = grid[np.asarray(self.cdf(grid), dtype=float) < 1.0 - 1e-6]
        h = np.asarray(self.hazard(grid), dtype=float)
        h = h[np.isfinite(h)]
        return bool(np.all(np.diff(h) <= 1e-7 * np.maximum(h[:-1], 1e-300)))

    def _hazard_grid(self) -> tuple[float, float]:
        m = self.mean()
        scale = m if math.isfinite(m) and m > 0 else 1.0
        return 1e-6 * scale, 20.0 * scale

    def _require_continuous(self, op: str) -> None:
        if not self.continuous:
            raise UnsupportedLawOperation(
                f"{op} is undefined for {self.descriptor()}"
            )

    def descriptor(self) -> str:
        raise NotImplementedError

    def kernel_params(self):
        """(kind, p1, p2, aux) encoding consumed by the jitted samplers."""
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}[{self.descriptor()}]"


class Exponential(InterarrivalLaw):
    def __init__(self, rate: float):
        self.rate = _positive("rate", rate)

    def _draw(self, rng, n):
        return rng.exponential(1.0 / self.rate, n)

    def cdf(self, t):
        t = np.asarray(t, dtype=float)
        out = np.where(t < 0.0, 0.0, -np.expm1(-self.rate * np.maximum(t, 0.0)))
        return float(out) if out.ndim == 0 else out

    def _density(self, t):
        t = np.asarray(t, dtype=float)
        out = np.where(t < 0.0, 0.0, self.rate * np.exp(-self.rate * np.maximum(t, 0.0)))
        return float(out) if out.ndim == 0 else out

    def mean(self):
        return 1.0 / self.rate

    def _dfr_analytic(self):
        return DfrVerdict(True)

    def descriptor(self):
        return f"exp({self.rate:g})"

    def kernel_params(self):
        return KIND_EXP, self.rate, 0.0, _EMPTY


class Weibull(InterarrivalLaw):
    def __init__(self, shape: float, scale: float):
        self.shape = _positive("shape", shape)
        self.scale = _positive("scale", scale)

    def _draw(self, rng, n):
        # inverse CDF: exact and branch-free
        u = rng.random(n)
        return self.scale * (-np.log1p(-u)) ** (1.0 / self.shape)

    def cdf(self, t):
        t = np.asarray(t, dtype=float)
        z = (np.maximum(t, 0.0) / self.scale) ** self.shape
        out = np.where(t < 0.0, 0.0, -np.expm1(-z))
        return float(out) if out.ndim == 0 else out

    def _density(self, t):
        t = np.asarray(t, dtype=float)
        tpos = np.maximum(t, 1e-300)
        z = (tpos / self.scale) ** self.shape
        out = (self.shape / self.scale) * (tpos / self.scale) ** (self.shape - 1.0)
        out = out * np.exp(-z)
        if self.shape < 1.0:
            out = np.where(t == 0.0, np.inf, out)
        out = np.where(t < 0.0, 0.0, out)
        return float(out) if out.ndim == 0 else out

    def mean(self):
        return self.scale * math.gamma(1.0 + 1.0 / self.shape)

    def _dfr_analytic(self):
        return DfrVerdict(self.shape <= 1.0)

    def descriptor(self):
        return f"weibull({self.shape:g},{self.scale:g})"

    def kernel_params(self):
        return KIND_WEIBULL, self.shape, self.scale, _EMPTY


class UniformBounded(InterarrivalLaw):
    """Uniform on [0, b]: the canonical continuous bounded-support input."""

    def __init__(self, b: float):
        self.b = _positive("b", b)

    def _draw(self, rng, n):
        return self.b * rng.random(n)

    def cdf(self, t):
        t = np.asarray(t, dtype=float)
        out = np.clip(t / self.b, 0.0, 1.0)
        return float(out) if out.ndim == 0 else out

    def _density(self, t):
        t = np.asarray(t, dtype=float)
        out = np.where((t >= 0.0) & (t <= self.b), 1.0 / self.b, 0.0)
        return float(out) if out.ndim == 0 else out

    def mean(self):
        return 0.5 * self.b

    def support_upper(self):
        return self.b

    def _dfr_analytic(self):
        # hazard 1/(b-t) is strictly increasing
        return DfrVerdict(False)

    def _hazard_grid(self):
        return 1e-6 * self.b, (1.0 - 1e-6) * self.b

    def descriptor(self):
        return f"uniform({self.b:g})"

    def kernel_params(self):
        return KIND_UNIFORM, self.b, 0.0, _EMPTY


class Pareto(InterarrivalLaw):
    """Heavy-tail input for exploratory sweeps; support [xmin, inf)."""

    def __init__(self, alpha: float, xmin: float):
        self.alpha = _positive("alpha", alpha)
        self.xmin = _positive("xmin", xmin)

    def _draw(self, rng, n):
        u = rng.random(n)
        return self.xmin * (1.0 - u) ** (-1.0 / self.alpha)

    def cdf(self, t):
        t = np.asarray(t, dtype=float)
        out = np.where(t < self.xmin, 0.0, 1.0 - (self.xmin / np.maximum(t, self.xmin)) ** self.alpha)
        return float(out) if out.ndim == 0 else out

    def _density(self, t):
        t = np.asarray(t, dtype=float)
        out = np.where(
            t < self.xmin,
            0.0,
            self.alpha * self.xmin**self.alpha / np.maximum(t, self.xmin) ** (self.alpha + 1.0),
        )
        return float(out) if out.ndim == 0 else out

    def mean(self):
        if self.alpha <= 1.0:
            return math.inf
        return self.alpha * self.xmin / (self.alpha - 1.0)

    def _dfr_analytic(self):
        # hazard alpha/t decreases on the support [xmin, inf)
        return DfrVerdict(True)

    def _hazard_grid(self):
        return self.xmin, 1e4 * self.xmin

    def descriptor(self):
        return f"pareto({self.alpha:g},{self.xmin:g})"

    def kernel_params(self):
        return KIND_PARETO, self.alpha, self.xmin, _EMPTY


class Deterministic(InterarrivalLaw):
    """Point mass at c: the degenerate case where infection dies at time c."""

    continuous = False

    def __init__(self, c: float):
        self.c = _positive("c", c)

    def _draw(self, rng, n):
        return np.full(n, self.c)

    def cdf(self, t):
        t = np.asarray(t, dtype=float)
        out = np.where(t >= self.c, 1.0, 0.0)
        return float(out) if out.ndim == 0 else out

    def mean(self):
        return self.c

    def support_upper(self):
        return self.c

    def descriptor(self):
        return f"det({self.c:g})"

    def kernel_params(self):
        return KIND_DET, self.c, 0.0, _EMPTY


class Empirical(InterarrivalLaw):
    """Resamples uniformly (with replacement) from observed times.

    Density and hazard are intentionally unsupported rather than
    kernel-estimated, to avoid silent statistical artifacts.
    """

    continuous = False

    def __init__(self, samples, source: str | None = None):
        arr = np.sort(np.asarray(samples, dtype=float))
        if arr.size == 0:
            raise ValueError("empirical law needs at least one sample")
        if np.any(arr < 0.0) or not np.all(np.isfinite(arr)):
            raise ValueError("empirical samples must be finite and nonnegative")
        if arr[-1] <= 0.0:
            raise ValueError("empirical samples must not all be zero (P(X=0) < 1)")
        self.samples = arr
        self.source = source

    def _draw(self, rng, n):
        idx = rng.integers(0, self.samples.size, n)
        return self.samples[idx]

    def cdf(self, t):
        t = np.asarray(t, dtype=float)
        out = np.searchsorted(self.samples, t, side="right") / self.samples.size
        out = np.asarray(out, dtype=float)
        return float(out) if out.ndim == 0 else out

    def mean(self):
        return float(self.samples.mean())

    def support_upper(self):
        return float(self.samples[-1])

    def descriptor(self):
        if self.source:
            return f"empirical({self.source})"
        return f"empirical(<{self.samples.size} pts>)"

    def kernel_params(self):
        return KIND_EMPIRICAL, float(self.samples.size), 0.0, self.samples


def parse_law(spec: str) -> InterarrivalLaw:
    """Parse the law grammar used by the CLI and config files."""
    spec = spec.strip()
    if "(" not in spec or not spec.endswith(")"):
        raise ValueError(f"malformed law spec {spec!r}")
    name, _, inner = spec[:-1].partition("(")
    name = name.strip().lower()
    args = [a.strip() for a in inner.split(",")] if inner.strip() else []

    def floats(k):
        if len(args) != k:
            raise ValueError(f"law {name!r} takes {k} parameter(s), got {len(args)}")
        return [float(a) for a in args]

    if name == "exp":
        return Exponential(*floats(1))
    if name == "weibull":
        return Weibull(*floats(2))
    if name == "uniform":
        return UniformBounded(*floats(1))
    if name == "pareto":
        return Pareto(*floats(2))
    if name == "det":
        return Deterministic(*floats(1))
    if name == "empirical":
        if len(args) != 1:
            raise ValueError("empirical(path) takes exactly one argument")
        path = args[0]
        values = [
            float(line)
            for line in open(path, "r", encoding="utf-8")
            if line.strip() and not line.lstrip().startswith("#")
        ]
        return Empirical(values, source=path)
    raise ValueError(f"unknown law family {name!r}")


# ---------------------------------------------------------------------------
# stationary residual life
# ---------------------------------------------------------------------------

_RESIDUAL_POINTS = 4096
_residual_cache: dict[str, tuple[np.ndarray, np.ndarray]] = {}


def residual_table(law: InterarrivalLaw) -> tuple[np.ndarray, np.ndarray]:
    """Inversion table (x grid, CDF values) for the equilibrium residual-life
    distribution with density (1-F(x))/mean, used by the "stationary" start
    mode.  Requires a finite mean.
    """
    key = law.descriptor()
    cached = _residual_cache.get(key)
    if cached is not None:
        return cached
    m = law.mean()
    if not math.isfinite(m) or m <= 0.0:
        raise UnsupportedLawOperation(
            f"stationary start needs a finite mean; {law.descriptor()} has none"
        )
    if isinstance(law, Deterministic):
        xs = np.array([0.0, law.c])
        cdf = np.array([0.0, 1.0])
    else:
        hi = 2.0 * m
        while float(law.cdf(hi)) < 1.0 - 1e-9:
            hi *= 2.0
            if hi > 1e12 * m:
                break
        xs = np.linspace(0.0, hi, _RESIDUAL_POINTS)
        surv = 1.0 - np.asarray(law.cdf(xs), dtype=float)
        steps = 0.5 * (surv[1:] + surv[:-1]) * np.diff(xs)
        cdf = np.concatenate([[0.0], np.cumsum(steps)]) / m
        cdf = np.minimum(cdf / max(cdf[-1], 1e-300), 1.0)
    _residual_cache[key] = (xs, cdf)
    return xs, cdf


def sample_stationary_residual(law: InterarrivalLaw, rng: np.random.Generator, n: int) -> np.ndarray:
    xs, cdf = residual_table(law)
    return np.interp(rng.random(n), cdf, xs)
