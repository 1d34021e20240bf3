"""Nested normal linear models: designs, residual sums of squares, B_ip and
the model distance, plus balanced ANOVA design builders.

Nesting is always a column prefix: the reduced model uses the first ``i``
columns of the full design. Projections are computed from Householder QR
factors; the hat matrix is never formed.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
import scipy.linalg

from .errors import DegenerateFit, DimensionError, RankDeficient

__all__ = [
    "DesignMatrix",
    "NestedModelPair",
    "ModelFit",
    "TrueModelSpec",
    "build_nested_pair",
    "residual_sum_squares",
    "bip_statistic",
    "model_distance",
    "oneway_anova_design",
    "oneway_contrast_design",
    "oneway_distance",
    "effect_coded_design",
    "factorial_design",
    "reduced_factorial_param_count",
    "reduced_factorial_rate",
]


def _as_readonly(a, ndim: int) -> np.ndarray:
    arr = np.array(a, dtype=float, copy=True)
    if arr.ndim != ndim:
        raise DimensionError(f"expected a {ndim}-d array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("array contains non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    """An immutable ``n x k`` design matrix.

    Full column rank is not checked at construction (CSV input may be
    rank deficient); it is enforced by :meth:`check_rank`, which every
    operation needing projections calls.
    """

    entries: np.ndarray

    def __post_init__(self):
        arr = _as_readonly(self.entries, 2)
        if arr.shape[0] < 1:
            raise DimensionError("design needs at least one row")
        object.__setattr__(self, "entries", arr)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def k(self) -> int:
        return self.entries.shape[1]

    @cached_property
    def _qr(self) -> tuple[np.ndarray, np.ndarray]:
        q, r = scipy.linalg.qr(self.entries, mode="economic")
        return q, r

    @cached_property
    def rank_diagonal(self) -> np.ndarray:
        """|diag R| of a column-pivoted QR, in decreasing order."""
        if self.k == 0:
            return np.zeros(0)
        _, r, _ = scipy.linalg.qr(self.entries, mode="economic", pivoting=True)
        return np.abs(np.diag(r))

    def rank_tolerance(self) -> float:
        d = self.rank_diagonal
        if d.size == 0:
            return 0.0
        return max(self.n, self.k) * np.finfo(float).eps * d[0]

    def check_rank(self) -> None:
        if self.k == 0:
            return
        if self.n < self.k:
            raise RankDeficient(f"{self.k} columns cannot be independent in {self.n} rows")
        d = self.rank_diagonal
        if d[0] == 0.0 or d[-1] < self.rank_tolerance():
            rank = int(np.sum(d >= self.rank_tolerance())) if d[0] > 0 else 0
            raise RankDeficient(
                f"design has numerical rank {rank} < {self.k} columns "
                f"(smallest scaled pivot {d[-1] / d[0] if d[0] else 0.0:.3e})"
            )

    def orthonormal_basis(self, cols: int | None = None) -> np.ndarray:
        """Orthonormal basis of the span of the first ``cols`` columns."""
        q, _ = self._qr
        return q[:, : self.k if cols is None else cols]

    def prefix(self, cols: int) -> "DesignMatrix":
        return DesignMatrix(self.entries[:, :cols])


def _residual(basis: np.ndarray, v: np.ndarray) -> np.ndarray:
    if basis.shape[1] == 0:
        return v.copy()
    # Second projection pass recovers orthogonality lost to cancellation.
    res = v - basis @ (basis.T @ v)
    return res - basis @ (basis.T @ res)


@dataclass(frozen=True, eq=False)
class NestedModelPair:
    full: DesignMatrix
    nested_cols: int

    @property
    def n(self) -> int:
        return self.full.n

    @property
    def p(self) -> int:
        return self.full.k

    @property
    def i(self) -> int:
        return self.nested_cols

    @property
    def reduced(self) -> DesignMatrix:
        return self.full.prefix(self.nested_cols)


@dataclass(frozen=True)
class ModelFit:
    rss_reduced: float
    rss_full: float
    log_bip: float
    bip: float
    raw_bip: float = field(default=float("nan"), compare=False)
    """Unclamped RSS ratio, kept for diagnostics."""


@dataclass(frozen=True, eq=False)
class TrueModelSpec:
    """Sampling model ``N(X beta, sigma^2 I)``.

    ``sigma == 0`` is accepted so that noiseless responses can be drawn in
    tests; :func:`model_distance` requires ``sigma > 0``.
    """

    design: DesignMatrix
    coefficients: np.ndarray
    sigma: float

    def __post_init__(self):
        beta = _as_readonly(self.coefficients, 1)
        if beta.shape[0] != self.design.k:
            raise DimensionError(
                f"{beta.shape[0]} coefficients for a design with {self.design.k} columns"
            )
        if not (self.sigma >= 0 and math.isfinite(self.sigma)):
            raise ValueError(f"sigma must be finite and non-negative, got {self.sigma}")
        object.__setattr__(self, "coefficients", beta)
        object.__setattr__(self, "sigma", float(self.sigma))

    @property
    def mean(self) -> np.ndarray:
        return self.design.entries @ self.coefficients


def build_nested_pair(full: DesignMatrix, i: int) -> NestedModelPair:
    """Validate ``(full, i)`` as a nested pair.

    Raises
    ------
    DimensionError
        If ``i`` is outside ``[0, p]`` or ``n <= p``.
    RankDeficient
        If the full design is numerically rank deficient.
    """
    if not isinstance(full, DesignMatrix):
        full = DesignMatrix(full)
    if isinstance(i, bool) or int(i) != i:
        raise DimensionError(f"nested column count must be an integer, got {i!r}")
    i = int(i)
    if not 0 <= i <= full.k:
        raise DimensionError(f"nested column count {i} outside [0, {full.k}]")
    if full.n <= full.k:
        raise DimensionError(f"need n > p, got n={full.n}, p={full.k}")
    full.check_rank()
    return NestedModelPair(full, i)


def _check_response(y, n: int) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or y.shape[0] != n:
        raise DimensionError(f"response has shape {y.shape}, expected ({n},)")
    if not np.all(np.isfinite(y)):
        raise ValueError("response contains non-finite entries")
    return y


def residual_sum_squares(design: DesignMatrix, y) -> float:
    """``y'(I - H)y`` via projection onto the orthogonal complement."""
    if not isinstance(design, DesignMatrix):
        design = DesignMatrix(design)
    y = _check_response(y, design.n)
    design.check_rank()
    res = _residual(design.orthonormal_basis(), y)
    return float(res @ res)


def bip_statistic(pair: NestedModelPair, y) -> ModelFit:
    """Residual ratio ``RSS_p / RSS_i`` of the full over the nested model."""
    y = _check_response(y, pair.n)
    basis = pair.full.orthonormal_basis()
    res_i = _residual(basis[:, : pair.i], y)
    rss_i = float(res_i @ res_i)
    if pair.i == pair.p:
        rss_p = rss_i
    else:
        res_p = _residual(basis, y)
        rss_p = float(res_p @ res_p)
    # Residuals at rounding level count as an exact fit.
    if rss_i <= pair.n * np.finfo(float).eps * float(y @ y):
        raise DegenerateFit("response lies in the reduced column space; B_ip undefined")
    raw = rss_p / rss_i
    if rss_p <= 0.0:
        # The full model interpolates y: B_ip is 0 and its log is -inf.
        return ModelFit(rss_i, rss_p, -math.inf, 0.0, raw)
    log_bip = min(math.log(rss_p) - math.log(rss_i), 0.0)
    return ModelFit(rss_i, min(rss_p, rss_i), log_bip, min(raw, 1.0), raw)


def model_distance(pair: NestedModelPair, truth: TrueModelSpec) -> float:
    """``beta' X'(I - H_i) X beta / (n sigma^2)`` with divisor ``n``."""
    if truth.design.entries.shape != pair.full.entries.shape or not np.array_equal(
        truth.design.entries, pair.full.entries
    ):
        raise DimensionError("truth must be specified on the pair's full design")
    if truth.sigma <= 0:
        raise ValueError("distance needs sigma > 0")
    res = _residual(pair.full.orthonormal_basis(pair.i), truth.mean)
    return float(res @ res) / (pair.n * truth.sigma**2)


def oneway_anova_design(groups: int, replicates: int) -> DesignMatrix:
    """Block indicator design: ``replicates`` rows per group, one column per group."""
    groups, replicates = _positive_int(groups, "groups"), _positive_int(replicates, "replicates")
    return DesignMatrix(np.kron(np.eye(groups), np.ones((replicates, 1))))


def oneway_contrast_design(group_sizes: Sequence[int]) -> DesignMatrix:
    """One-way design reparametrised as ``[1, e_2, ..., e_p]``.

    It spans the same space as the indicator design, but its first column
    is the intercept, so the column prefix of length ``i`` is the model in
    which groups ``2..i`` have free means and the remaining groups share
    one mean. ``i = 1`` is the equal-means null.
    """
    sizes = [_positive_int(m, "group size") for m in group_sizes]
    x = np.zeros((sum(sizes), len(sizes)))
    x[:, 0] = 1.0
    start = sizes[0]
    for j, m in enumerate(sizes[1:], start=1):
        x[start : start + m, j] = 1.0
        start += m
    return DesignMatrix(x)


def oneway_distance(mu, sigma: float) -> float:
    mu = np.asarray(mu, dtype=float)
    if mu.ndim != 1 or mu.size < 1:
        raise DimensionError("mu must be a non-empty vector")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    return float(np.mean((mu - mu.mean()) ** 2) / sigma**2)


def _positive_int(v, name: str) -> int:
    if isinstance(v, bool) or int(v) != v or v < 1:
        raise ValueError(f"{name} must be a positive integer, got {v!r}")
    return int(v)


def _sum_to_zero_contrasts(levels: int) -> np.ndarray:
    # levels x (levels - 1): identity on top, -1 row for the last level.
    return np.vstack([np.eye(levels - 1), -np.ones((1, levels - 1))])


def effect_coded_design(
    codes: Sequence[np.ndarray],
    levels: Sequence[int],
    max_order: int | None = None,
) -> tuple[DesignMatrix, list[tuple[int, ...]]]:
    """Sum-to-zero coded factorial design from integer level codes.

    Columns are ordered by interaction order (intercept, main effects,
    two-way terms, ...), so every prefix ending on a term boundary is a
    hierarchical submodel. Returns the design and the list of terms, one
    tuple of factor indices per column.
    """
    codes = [np.asarray(c, dtype=int) for c in codes]
    if len({c.shape for c in codes}) != 1:
        raise DimensionError("factor code vectors differ in length")
    nfac = len(codes)
    max_order = nfac if max_order is None else max_order
    contrasts = [_sum_to_zero_contrasts(lv)[c] for c, lv in zip(codes, levels)]
    n = codes[0].shape[0] if codes else 0
    cols = [np.ones(n)]
    terms: list[tuple[int, ...]] = [()]
    for order in range(1, max_order + 1):
        for term in itertools.combinations(range(nfac), order):
            for combo in itertools.product(*(range(levels[f] - 1) for f in term)):
                col = np.ones(n)
                for f, c in zip(term, combo):
                    col = col * contrasts[f][:, c]
                cols.append(col)
                terms.append(term)
    return DesignMatrix(np.column_stack(cols)), terms


def factorial_design(
    levels: tuple[int, int, int], replicates: int, include_three_way: bool = True
) -> tuple[DesignMatrix, int]:
    """Balanced three-way design ``I x J x K`` with ``replicates`` per cell.

    Returns the design and its realised full-rank column count ``p``:
    ``I*J*K`` with the three-way interaction, otherwise
    ``1 + (I-1) + (J-1) + (K-1) + (I-1)(J-1) + (I-1)(K-1) + (J-1)(K-1)``.
    """
    if len(levels) != 3 or any(int(lv) != lv or lv < 2 for lv in levels):
        raise ValueError(f"need three factors with at least 2 levels each, got {levels!r}")
    replicates = _positive_int(replicates, "replicates")
    levels = tuple(int(lv) for lv in levels)
    cells = np.array(list(itertools.product(*(range(lv) for lv in levels))))
    cells = np.repeat(cells, replicates, axis=0)
    design, _ = effect_coded_design(
        [cells[:, 0], cells[:, 1], cells[:, 2]], levels, 3 if include_three_way else 2
    )
    try:
        design.check_rank()
    except RankDeficient as exc:  # pragma: no cover - guarded by construction
        raise RuntimeError(f"internal error: factorial design not full rank: {exc}") from exc
    return design, design.k


def reduced_factorial_param_count(levels: tuple[int, int, int]) -> int:
    """Upper bound ``I+J+K+IJ+IK+JK`` on the no-three-way parameter count."""
    i, j, k = levels
    return i + j + k + i * j + i * k + j * k


def reduced_factorial_rate(growing: tuple[bool, bool, bool]) -> str:
    """Growth rate of the no-three-way model dimension relative to ``n``.

    ``growing`` flags which of ``I, J, K`` tend to infinity (replicates per
    cell fixed). Returns ``"o(n)"`` when all three grow, ``"O(n)"`` when at
    least one but not all grow, and ``"O(1)"`` when none do.
    """
    count = sum(bool(g) for g in growing)
    if count == 3:
        return "o(n)"
    return "O(n)" if count else "O(1)"
