"""Random generation from the nested normal models, growth-path experiments
and Kolmogorov-Smirnov utilities.

Reproducibility rests on :class:`RngStream`: every replicate draws from its
own generator derived from ``(seed, stream_id)``, so results do not depend
on execution order or on the number of worker processes.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.stats import kstwobign

from .asymptotics import GrowthRegime
from .bayes import QuadratureConfig, berger_log_bf, log_intrinsic_bf, log_schwarz
from .errors import ConfigError, EmptyInput
from .linear import DesignMatrix, TrueModelSpec, oneway_contrast_design

__all__ = [
    "DEFAULT_SEED",
    "RngStream",
    "sample_noncentral_chisq",
    "sample_dnc_beta",
    "regularized_incomplete_beta",
    "simulate_response",
    "OneWayGrowthDesign",
    "ExperimentConfig",
    "TrajectoryRecord",
    "grid_dimensions",
    "run_experiment",
    "BergerConfig",
    "run_berger_experiment",
    "ks_distance",
    "ks_two_sample_distance",
    "ks_critical_value",
    "median_trajectory",
]

DEFAULT_SEED = 20100601

# Poisson mixing counts above this mean use a normal approximation.
_POISSON_NORMAL_THRESHOLD = 1e6


@dataclass(frozen=True)
class RngStream:
    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream_id),))
        return np.random.Generator(np.random.PCG64(ss))


def _gen(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def _poisson(gen: np.random.Generator, lam: np.ndarray, shape) -> np.ndarray:
    lam = np.broadcast_to(lam, shape)
    big = lam > _POISSON_NORMAL_THRESHOLD
    if not np.any(big):
        return gen.poisson(lam, size=shape)
    out = gen.poisson(np.where(big, 0.0, lam), size=shape).astype(float)
    z = gen.standard_normal(size=shape)
    # Normal approximation, rounded with a continuity correction.
    approx = np.maximum(np.floor(lam + np.sqrt(lam) * z + 0.5), 0.0)
    return np.where(big, approx, out)


def sample_noncentral_chisq(df, lam, rng, size=None):
    """Noncentral chi-square draws as a Poisson mixture of central ones.

    ``K ~ Poisson(lam/2)`` followed by ``2 * Gamma((df + 2K)/2)``; the mean
    is ``df + lam``.
    """
    df = np.asarray(df, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if np.any(df <= 0) or np.any(lam < 0):
        raise ValueError("need df > 0 and lambda >= 0")
    gen = _gen(rng)
    shape = size if size is not None else np.broadcast(df, lam).shape
    k = _poisson(gen, lam / 2.0, shape)
    out = 2.0 * gen.standard_gamma(df / 2.0 + k, size=shape)
    return out if np.ndim(out) else float(out)


def sample_dnc_beta(a, b, l1, l2, rng, size=None):
    """Doubly noncentral beta ``Be(a, b; l1, l2)``.

    ``a`` and ``b`` are the beta shape parameters (half the chi-square
    degrees of freedom); draws ``Y1 / (Y1 + Y2)`` with
    ``Y1 ~ chi2(2a, l1)`` and ``Y2 ~ chi2(2b, l2)`` independent.
    """
    if np.any(np.asarray(a) <= 0) or np.any(np.asarray(b) <= 0):
        raise ValueError("shape parameters must be positive")
    gen = _gen(rng)
    y1 = sample_noncentral_chisq(2.0 * np.asarray(a, dtype=float), l1, gen, size)
    y2 = sample_noncentral_chisq(2.0 * np.asarray(b, dtype=float), l2, gen, size)
    return y1 / (y1 + y2)


_BETACF_EPS = 1e-16
_BETACF_TINY = 1e-300
_BETACF_MAXITER = 10_000


def _betacf(a: float, b: float, x: float) -> float:
    # Modified Lentz evaluation of the incomplete beta continued fraction.
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _BETACF_TINY:
        d = _BETACF_TINY
    d = 1.0 / d
    h = d
    for m in range(1, _BETACF_MAXITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _BETACF_TINY:
            d = _BETACF_TINY
        c = 1.0 + aa / c
        if abs(c) < _BETACF_TINY:
            c = _BETACF_TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _BETACF_TINY:
            d = _BETACF_TINY
        c = 1.0 + aa / c
        if abs(c) < _BETACF_TINY:
            c = _BETACF_TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _BETACF_EPS:
            return h
    raise RuntimeError(f"incomplete beta continued fraction failed for a={a}, b={b}, x={x}")


def _ibeta_scalar(a: float, b: float, x: float) -> float:
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(log_front) * _betacf(a, b, x) / a
    return 1.0 - math.exp(log_front) * _betacf(b, a, 1.0 - x) / b


def regularized_incomplete_beta(a: float, b: float, x):
    """``I_x(a, b)`` by continued fraction, switching to ``1 - I_{1-x}(b, a)``
    past the mean so the fraction converges quickly. Accepts array ``x``."""
    if a <= 0 or b <= 0:
        raise ValueError("shape parameters must be positive")
    xs = np.asarray(x, dtype=float)
    if np.any((xs < 0) | (xs > 1)):
        raise ValueError("x must lie in [0, 1]")
    if xs.ndim == 0:
        return _ibeta_scalar(float(a), float(b), float(xs))
    return np.array([_ibeta_scalar(float(a), float(b), float(v)) for v in xs.ravel()]).reshape(xs.shape)


def simulate_response(truth: TrueModelSpec, rng) -> np.ndarray:
    gen = _gen(rng)
    return truth.mean + truth.sigma * gen.standard_normal(truth.design.n)


@dataclass(frozen=True, eq=False)
class OneWayGrowthDesign:
    """One-way layout whose nested model pools a set of groups.

    Full model: a separate mean for each of ``p`` groups. Nested model
    (``i`` columns of :func:`oneway_contrast_design`): groups ``2..i`` keep
    their own means, group 1 and groups ``i+1..p`` share one. Group means
    alternate ``+c, -c, ...`` over the pooled groups (zero elsewhere) with
    ``c`` solved so the finite-``n`` distance equals ``delta`` exactly.
    """

    group_sizes: np.ndarray
    i: int
    delta: float
    sigma: float = 1.0
    group_means: np.ndarray = field(init=False)
    labels: np.ndarray = field(init=False)
    pooled: np.ndarray = field(init=False)

    def __post_init__(self):
        sizes = np.asarray(self.group_sizes, dtype=int)
        p = sizes.size
        if not 1 <= self.i < p:
            raise ConfigError(f"need 1 <= i < p, got i={self.i}, p={p}")
        pooled = np.zeros(p, dtype=bool)
        pooled[0] = True
        pooled[self.i:] = True
        signs = np.zeros(p)
        signs[pooled] = np.where(np.arange(pooled.sum()) % 2 == 0, 1.0, -1.0)
        n = sizes.sum()
        w = sizes[pooled]
        sp = signs[pooled]
        spread = float(np.sum(w * (sp - np.sum(w * sp) / w.sum()) ** 2)) / n
        c = self.sigma * math.sqrt(self.delta / spread) if self.delta > 0 else 0.0
        object.__setattr__(self, "group_sizes", sizes)
        object.__setattr__(self, "group_means", c * signs)
        object.__setattr__(self, "labels", np.repeat(np.arange(p), sizes))
        object.__setattr__(self, "pooled", pooled)

    @property
    def n(self) -> int:
        return int(self.group_sizes.sum())

    @property
    def p(self) -> int:
        return int(self.group_sizes.size)

    def design(self) -> DesignMatrix:
        return oneway_contrast_design(self.group_sizes.tolist())

    def coefficients(self) -> np.ndarray:
        mu = self.group_means
        return np.concatenate([[mu[0]], mu[1:] - mu[0]])

    def truth(self) -> TrueModelSpec:
        return TrueModelSpec(self.design(), self.coefficients(), self.sigma)

    def realized_distance(self) -> float:
        w = self.group_sizes[self.pooled]
        mu = self.group_means[self.pooled]
        centre = np.sum(w * mu) / w.sum()
        return float(np.sum(w * (mu - centre) ** 2)) / (self.n * self.sigma**2)

    def sample(self, gen: np.random.Generator, null: bool = False) -> np.ndarray:
        mean = 0.0 if null else self.group_means[self.labels]
        return mean + self.sigma * gen.standard_normal(self.n)

    def rss_pair(self, y: np.ndarray) -> tuple[float, float]:
        """``(RSS_i, RSS_p)`` from group summaries."""
        sizes = self.group_sizes
        means = np.bincount(self.labels, weights=y, minlength=self.p) / sizes
        resid = y - means[self.labels]
        rss_p = float(resid @ resid)
        w = sizes[self.pooled]
        gm = means[self.pooled]
        centre = np.sum(w * gm) / w.sum()
        rss_i = rss_p + float(np.sum(w * (gm - centre) ** 2))
        return rss_i, rss_p


def _balanced_sizes(n: int, p: int) -> np.ndarray:
    base, extra = divmod(n, p)
    return np.array([base + 1] * extra + [base] * (p - extra), dtype=int)


def grid_dimensions(regime: GrowthRegime, n: int) -> tuple[int, int, int]:
    """``(n, p, i)`` at a nominal sample size.

    ``b = 1``: ``p = round(n/r)`` and ``n`` is reset to ``round(r p)``;
    otherwise ``p = round(n^b)``. ``a = 1``: ``i = round(n/s)``; otherwise
    ``i = max(1, round(n^a))``.
    """
    if regime.b == 1.0:
        p = max(2, round(n / regime.r))
        n = round(regime.r * p)
    else:
        p = max(2, round(n**regime.b))
    if regime.a == 1.0:
        i = max(1, round(n / regime.s))
    else:
        i = max(1, round(n**regime.a))
    if not (n > p > i >= 1):
        raise ConfigError(f"grid point n={n} gives p={p}, i={i}; need n > p > i >= 1")
    return n, p, i


@dataclass(frozen=True)
class ExperimentConfig:
    regime: GrowthRegime
    delta_target: float
    n_grid: tuple[int, ...]
    replicates: int
    seed: int = DEFAULT_SEED
    null_sampling: bool = False
    sigma: float = 1.0
    quadrature: QuadratureConfig = QuadratureConfig()

    def __post_init__(self):
        grid = tuple(int(v) for v in self.n_grid)
        if not grid or any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigError("n_grid must be non-empty and strictly increasing")
        if self.replicates < 1:
            raise ConfigError("replicates must be >= 1")
        if self.delta_target < 0 or self.sigma <= 0:
            raise ConfigError("need delta_target >= 0 and sigma > 0")
        object.__setattr__(self, "n_grid", grid)

    def designs(self) -> list[OneWayGrowthDesign]:
        delta = 0.0 if self.null_sampling else self.delta_target
        out = []
        for n_nominal in self.n_grid:
            n, p, i = grid_dimensions(self.regime, n_nominal)
            out.append(OneWayGrowthDesign(_balanced_sizes(n, p), i, delta, self.sigma))
        return out


@dataclass(frozen=True, eq=False)
class TrajectoryRecord:
    replicate: int
    seed: int
    stream_id: int
    n: np.ndarray
    p: np.ndarray
    i: np.ndarray
    delta: np.ndarray
    log_bf: np.ndarray
    log_bic: np.ndarray
    bip: np.ndarray

    def rows(self) -> list[dict]:
        return [
            {
                "replicate": self.replicate,
                "n": int(self.n[k]),
                "p": int(self.p[k]),
                "i": int(self.i[k]),
                "delta": float(self.delta[k]),
                "log_bf": float(self.log_bf[k]),
                "log_bic": float(self.log_bic[k]),
                "bip": float(self.bip[k]),
            }
            for k in range(self.n.size)
        ]


def _run_replicate(cfg: ExperimentConfig, designs, replicate: int) -> TrajectoryRecord:
    gen = RngStream(cfg.seed, replicate).generator()
    cols = {k: [] for k in ("n", "p", "i", "delta", "log_bf", "log_bic", "bip")}
    for d in designs:
        y = d.sample(gen, null=cfg.null_sampling)
        rss_i, rss_p = d.rss_pair(y)
        log_bip = min(math.log(rss_p) - math.log(rss_i), 0.0)
        res = log_intrinsic_bf(d.n, d.p, d.i, log_bip, cfg.quadrature)
        cols["n"].append(d.n)
        cols["p"].append(d.p)
        cols["i"].append(d.i)
        cols["delta"].append(d.realized_distance() if d.delta > 0 else 0.0)
        cols["log_bf"].append(res.log_bf_intrinsic)
        cols["log_bic"].append(log_schwarz(d.n, d.p, d.i, log_bip))
        cols["bip"].append(math.exp(log_bip))
    arrays = {
        k: np.asarray(v, dtype=int if k in ("n", "p", "i") else float) for k, v in cols.items()
    }
    return TrajectoryRecord(replicate, cfg.seed, replicate, **arrays)


def _run_chunk(cfg: ExperimentConfig, replicates: Sequence[int]) -> list[TrajectoryRecord]:
    designs = cfg.designs()
    return [_run_replicate(cfg, designs, r) for r in replicates]


def run_experiment(cfg: ExperimentConfig, workers: int = 1) -> list[TrajectoryRecord]:
    """Simulate ``cfg.replicates`` growth paths, one record per replicate.

    Replicate ``k`` always uses ``RngStream(cfg.seed, k)``; with
    ``workers > 1`` replicates are spread over processes and gathered back
    in replicate order.
    """
    cfg.designs()  # validates every grid point before any work starts
    reps = list(range(cfg.replicates))
    if workers <= 1:
        return _run_chunk(cfg, reps)
    chunks = [reps[k::workers] for k in range(workers)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_run_chunk, [cfg] * len(chunks), chunks))
    records = [rec for part in parts for rec in part]
    return sorted(records, key=lambda rec: rec.replicate)


def median_trajectory(records: Sequence[TrajectoryRecord], attr: str) -> np.ndarray:
    return np.median(np.vstack([getattr(rec, attr) for rec in records]), axis=0)


@dataclass(frozen=True)
class BergerConfig:
    """``p`` normal means, ``replicates`` observations each, unit variance;
    true means ``+-sqrt(tau_sq)`` so ``(1/p) sum mu^2 = tau_sq`` exactly."""

    tau_sq: float
    p_grid: tuple[int, ...]
    replicates: int
    m: int = 1
    t: float = 2.0
    seed: int = DEFAULT_SEED


def run_berger_experiment(cfg: BergerConfig) -> np.ndarray:
    """Log Bayes factors, shape ``(replicates, len(p_grid))``."""
    out = np.empty((cfg.replicates, len(cfg.p_grid)))
    tau = math.sqrt(cfg.tau_sq)
    for rep in range(cfg.replicates):
        gen = RngStream(cfg.seed, rep).generator()
        for k, p in enumerate(cfg.p_grid):
            mu = np.where(np.arange(p) % 2 == 0, tau, -tau)
            y = mu[:, None] + gen.standard_normal((p, cfg.m))
            out[rep, k] = berger_log_bf(y.mean(axis=1), cfg.m, cfg.t)
    return out


def ks_distance(samples, cdf: Callable[[np.ndarray], np.ndarray]) -> float:
    """Sup distance between the empirical CDF of ``samples`` and ``cdf``."""
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = x.size
    if n == 0:
        raise EmptyInput("ks_distance needs at least one sample")
    f = np.asarray(cdf(x), dtype=float)
    ranks = np.arange(1, n + 1)
    return float(max(np.max(ranks / n - f), np.max(f - (ranks - 1) / n)))


def ks_two_sample_distance(x, y) -> float:
    x = np.sort(np.asarray(x, dtype=float).ravel())
    y = np.sort(np.asarray(y, dtype=float).ravel())
    if x.size == 0 or y.size == 0:
        raise EmptyInput("both samples must be non-empty")
    pts = np.concatenate([x, y])
    fx = np.searchsorted(x, pts, side="right") / x.size
    fy = np.searchsorted(y, pts, side="right") / y.size
    return float(np.max(np.abs(fx - fy)))


def ks_critical_value(n: int, alpha: float, m: int | None = None) -> float:
    """Asymptotic Kolmogorov critical value for one sample of size ``n`` or
    two samples of sizes ``n`` and ``m``."""
    n_eff = n if m is None else n * m / (n + m)
    return float(kstwobign.isf(alpha)) / math.sqrt(n_eff)
