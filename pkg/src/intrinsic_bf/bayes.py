"""Intrinsic-prior Bayes factor for nested linear models, its Schwarz (BIC)
approximation, large-p closed forms, and the normal-prior Bayes factor for
the p-means problem.

Everything is returned on the natural-log scale.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import logsumexp

from .errors import DimensionError, DomainError, NotConverged
from .linear import DesignMatrix

__all__ = [
    "QuadratureConfig",
    "BayesFactorResult",
    "log_intrinsic_bf",
    "log_schwarz",
    "intrinsic_prior_log_density",
    "log_bf_large_p_approx",
    "berger_log_bf",
]

_HALF_PI = 0.5 * math.pi
_U_MAX = math.sqrt(_HALF_PI)


@dataclass(frozen=True)
class QuadratureConfig:
    initial_nodes: int = 64
    max_refinements: int = 6
    rel_tol: float = 1e-8

    def __post_init__(self):
        if self.initial_nodes < 8:
            raise ValueError("initial_nodes must be at least 8")
        if self.max_refinements < 0:
            raise ValueError("max_refinements must be non-negative")
        if not 0.0 < self.rel_tol <= 1e-2:
            raise ValueError("rel_tol must lie in (0, 1e-2]")


@dataclass(frozen=True)
class BayesFactorResult:
    log_bf_intrinsic: float
    log_bic: float
    nodes_used: int
    converged: bool
    est_error: float


@lru_cache(maxsize=32)
def _gauss_legendre(nodes: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(nodes)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def _log_integrand_u(u, n: int, p: int, i: int, log_nb: float):
    """Log integrand after ``phi = pi/2 - u^2``, Jacobian ``2u`` included."""
    u = np.asarray(u, dtype=float)
    phi = _HALF_PI - u * u
    sin_phi = np.sin(phi)
    s2 = sin_phi * sin_phi
    with np.errstate(divide="ignore"):
        out = (
            np.log(2.0 * u)
            + (n - p) / 2.0 * np.log(n + (p + 1) * s2)
            - (n - i) / 2.0 * np.logaddexp(log_nb, math.log(p + 1) + 2.0 * np.log(sin_phi))
        )
        if p > i:
            out = out + (p - i) * np.log(sin_phi)
    return out


def _panel_logsum(a: float, b: float, nodes: int, args) -> float:
    x, w = _gauss_legendre(nodes)
    half = 0.5 * (b - a)
    u = a + half * (x + 1.0)
    return float(logsumexp(_log_integrand_u(u, *args), b=w * half))


def _locate_peak(args) -> float:
    grid = np.linspace(0.0, _U_MAX, 257)[1:]
    vals = _log_integrand_u(grid, *args)
    k = int(np.argmax(vals))
    lo = grid[k - 1] if k > 0 else 0.0
    hi = grid[k + 1] if k + 1 < grid.size else _U_MAX
    res = minimize_scalar(
        lambda u: -float(_log_integrand_u(u, *args)),
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": 1e-12},
    )
    return float(res.x)


def _check_dims(n: int, p: int, i: int) -> None:
    if not (isinstance(n, (int, np.integer)) and isinstance(p, (int, np.integer))
            and isinstance(i, (int, np.integer))):
        raise DimensionError("n, p and i must be integers")
    if not n > p >= i >= 0:
        raise DimensionError(f"need n > p >= i >= 0, got n={n}, p={p}, i={i}")


def log_schwarz(n: int, p: int, i: int, log_bip: float) -> float:
    """``((i - p)/2) log n - (n/2) log B_ip``."""
    _check_dims(n, p, i)
    return 0.5 * (i - p) * math.log(n) - 0.5 * n * log_bip


def log_intrinsic_bf(
    n: int, p: int, i: int, log_bip: float, cfg: QuadratureConfig | None = None
) -> BayesFactorResult:
    """Log Bayes factor of the full model against the nested one under the
    intrinsic prior, by Gauss-Legendre quadrature in log space.

    The angular integral is mapped by ``phi = pi/2 - u^2`` and split at the
    integrand's mode; the node count per panel doubles until successive log
    values agree to ``cfg.rel_tol * max(1, |log B|)``. If the budget runs
    out a :class:`NotConverged` warning is issued and the last estimate is
    returned with ``converged=False``.
    """
    cfg = cfg or QuadratureConfig()
    _check_dims(n, p, i)
    if math.isnan(log_bip) or log_bip > 0.0:
        raise DomainError(f"log_bip must be <= 0, got {log_bip}")
    log_bic = log_schwarz(n, p, i, log_bip)
    if p == i and log_bip == 0.0:
        # Integrand is identically 2/pi: B = 1 exactly.
        return BayesFactorResult(0.0, log_bic, 0, True, 0.0)

    args = (n, p, i, math.log(n) + log_bip)
    const = math.log(2.0 / math.pi) + 0.5 * (p - i) * math.log(p + 1)
    peak = _locate_peak(args)
    panels = [(a, b) for a, b in ((0.0, peak), (peak, _U_MAX)) if b - a > 1e-14 * _U_MAX]

    nodes = cfg.initial_nodes
    prev = None
    est = math.inf
    value = math.nan
    for _ in range(cfg.max_refinements + 1):
        value = const + float(logsumexp([_panel_logsum(a, b, nodes, args) for a, b in panels]))
        if prev is not None:
            est = abs(value - prev)
            if est <= cfg.rel_tol * max(1.0, abs(value)):
                return BayesFactorResult(value, log_bic, nodes * len(panels), True, est)
        prev = value
        nodes *= 2
    nodes //= 2
    warnings.warn(
        NotConverged(
            f"quadrature did not converge for n={n}, p={p}, i={i}: "
            f"last change {est:.3e} with {nodes * len(panels)} nodes"
        ),
        stacklevel=2,
    )
    return BayesFactorResult(value, log_bic, nodes * len(panels), False, est)


def intrinsic_prior_log_density(
    beta, sigma_p: float, alpha, sigma_i: float, full: DesignMatrix
) -> float:
    """Log density of the intrinsic prior on ``(beta_p, sigma_p)`` given the
    nested-model parameters ``(alpha_i, sigma_i)``.

    The prior is a half-Cauchy-type factor in ``sigma_p`` times a normal on
    ``beta_p`` centred at ``alpha`` padded with zeros, with covariance
    ``(sigma_i^2 + sigma_p^2) * n/(p+1) * (X'X)^{-1}``.
    """
    if not isinstance(full, DesignMatrix):
        full = DesignMatrix(full)
    full.check_rank()
    n, p = full.n, full.k
    beta = np.asarray(beta, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    if beta.shape != (p,) or alpha.ndim != 1 or alpha.shape[0] > p:
        raise DimensionError("beta must have length p and alpha length <= p")
    if sigma_p <= 0 or sigma_i <= 0:
        raise DomainError("standard deviations must be positive")
    v = sigma_i**2 + sigma_p**2
    log_scale = math.log(2.0 * sigma_i / (math.pi * v))

    c = v * n / (p + 1)
    _, r = full._qr
    diff = beta.copy()
    diff[: alpha.shape[0]] -= alpha
    rd = r @ diff
    log_det_xtx = 2.0 * float(np.sum(np.log(np.abs(np.diag(r)))))
    log_normal = (
        -0.5 * p * math.log(2.0 * math.pi)
        - 0.5 * (p * math.log(c) - log_det_xtx)
        - 0.5 * float(rd @ rd) / c
    )
    return log_scale + log_normal


def log_bf_large_p_approx(p: int, r: float, delta: float, s: float = math.inf) -> float:
    """Closed-form large-``p`` log Bayes factor for ``n = r p``.

    With ``i/n -> 1/s`` the second bracket factor carries exponent
    ``-r(s-1)/s``; ``s = inf`` (nested dimension of smaller order) gives
    exponent ``-r``.
    """
    if not r > 1:
        raise DomainError(f"need r > 1, got {r}")
    if not s > r:
        raise DomainError(f"need s > r or s infinite, got s={s}, r={r}")
    if delta < 0:
        raise DomainError("delta must be non-negative")
    inv_s = 0.0 if math.isinf(s) else 1.0 / s
    expo = r * (1.0 - inv_s)
    bracket = (r - 1.0) * math.log1p(r) - expo * math.log1p((r - 1.0) / (1.0 + delta - inv_s))
    return 0.5 * p * bracket


def berger_log_bf(group_means, replicates: int, t: float) -> float:
    """Log Bayes factor for ``p`` normal means with ``N(0, 2/t)`` priors
    against all means zero, unit error variance, ``replicates`` per group.
    """
    ybar = np.asarray(group_means, dtype=float)
    if ybar.ndim != 1:
        raise DimensionError("group_means must be a vector")
    m = replicates
    if m < 1:
        raise DomainError("replicates must be >= 1")
    if t < 1:
        raise DomainError("t must be >= 1")
    p = ybar.shape[0]
    return 0.5 * p * math.log(t / (2.0 * m + t)) + m * m / (2.0 * m + t) * float(ybar @ ybar)
