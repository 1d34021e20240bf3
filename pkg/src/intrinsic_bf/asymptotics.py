"""Closed-form consistency thresholds and limits for growing nested models.

Growth is described by exponents ``a <= b`` with ``i = O(n^a)`` and
``p = O(n^b)``, plus the ratio limits ``r = lim n/p`` (when ``b = 1``) and
``s = lim n/i`` (when ``a = 1``).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .errors import DomainError

__all__ = [
    "GrowthRegime",
    "Verdict",
    "ConsistencyVerdict",
    "DELTA_R_AT_ONE",
    "DELTA_R_AT_ZERO",
    "delta_r",
    "delta_rs",
    "berger_bound_R",
    "in_region_C",
    "bip_limit",
    "classify",
    "threshold_for",
]

LOG2 = math.log(2.0)
DELTA_R_AT_ONE = 1.0 / LOG2 - 1.0
DELTA_R_AT_ZERO = 1.0 / math.expm1(1.0)

# Second-order expansion of delta(r) about r = 1, in powers of (r - 1).
_D1 = 1.0 / LOG2 - 0.5 - 0.5 / LOG2**2
_D2 = 0.25 / LOG2**3 + LOG2 / 12.0 - 0.375 / LOG2**2
_SERIES_RADIUS = 1e-4


@dataclass(frozen=True)
class GrowthRegime:
    a: float
    b: float
    r: float | None = None
    s: float | None = None

    def __post_init__(self):
        a, b = float(self.a), float(self.b)
        if not (0.0 <= a <= b <= 1.0):
            raise DomainError(f"need 0 <= a <= b <= 1, got a={a}, b={b}")
        if b == 1.0:
            if self.r is None or not self.r > 1.0:
                raise DomainError("b = 1 requires r = lim n/p > 1")
        elif self.r is not None:
            raise DomainError("r is defined only when b = 1")
        if a == 1.0:
            if self.s is None or not (self.s > self.r):
                raise DomainError("a = 1 requires s = lim n/i > r")
        elif self.s is not None and not math.isinf(self.s):
            raise DomainError("finite s is defined only when a = 1")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "s", None if a < 1.0 else float(self.s))

    @property
    def case(self) -> str:
        """``"equal"`` (a = b = 1), ``"linear"`` (a < b = 1) or ``"sublinear"`` (b < 1)."""
        if self.b < 1.0:
            return "sublinear"
        return "equal" if self.a == 1.0 else "linear"


class Verdict(str, enum.Enum):
    CONSISTENT_UNDER_BOTH = "ConsistentUnderBoth"
    INCONSISTENT_UNDER_ALTERNATIVE = "InconsistentUnderAlternative"
    BOUNDARY_INDETERMINATE = "BoundaryIndeterminate"


@dataclass(frozen=True)
class ConsistencyVerdict:
    verdict: Verdict
    threshold_used: float
    margin: float


def delta_r(r: float, *, extended: bool = False) -> float:
    """Threshold distance for ``a < b = 1`` as a function of ``r = lim n/p``.

    The formula is valid for ``r > 1``. With ``extended=True`` it is also
    evaluated on ``0 <= r <= 1`` through its continuation, with the
    removable points ``r = 0`` and ``r = 1`` filled by their limits.
    """
    r = float(r)
    if extended:
        if not r >= 0.0:
            raise DomainError(f"extended evaluation needs r >= 0, got {r}")
        if r == 0.0:
            return DELTA_R_AT_ZERO
    elif not r > 1.0:
        raise DomainError(f"need r > 1, got {r}")
    if math.isinf(r):
        return 0.0
    eps = r - 1.0
    if abs(eps) < _SERIES_RADIUS:
        return DELTA_R_AT_ONE + eps * (_D1 + eps * _D2)
    # (r+1)^((r-1)/r) - 1 written with expm1/log1p to avoid cancellation.
    return eps / math.expm1(eps / r * math.log1p(r)) - 1.0


def delta_rs(r: float, s: float) -> float:
    """Threshold distance for ``a = b = 1``; ``s = inf`` gives :func:`delta_r`."""
    r, s = float(r), float(s)
    if not r > 1.0:
        raise DomainError(f"need r > 1, got {r}")
    if math.isinf(s):
        return delta_r(r)
    if not s > r:
        raise DomainError(f"need s > r, got s={s}, r={r}")
    expo = s * (r - 1.0) / (r * (s - 1.0))
    return (r - 1.0) / math.expm1(expo * math.log1p(r)) - 1.0 + 1.0 / s


def berger_bound_R(t: float, m: float) -> float:
    """Critical ``lim (1/p) sum mu_j^2`` for the ``N(0, 2/t)``-prior Bayes
    factor with ``m`` replicates per mean."""
    if t < 1 or m < 1:
        raise DomainError(f"need t >= 1 and m >= 1, got t={t}, m={m}")
    return (2.0 * m + t) / (2.0 * m * m) * math.log((2.0 * m + t) / t) - 1.0 / m


def in_region_C(t: float, m: float, tau_sq: float) -> bool:
    """True when ``tau_sq`` falls in the inconsistency region ``(0, R(t, m))``."""
    if tau_sq < 0:
        raise DomainError("tau_sq must be non-negative")
    return 0.0 < tau_sq < berger_bound_R(t, m)


def bip_limit(regime: GrowthRegime, delta: float, under_null: bool = False) -> float:
    """Probability limit of ``B_ip = RSS_p / RSS_i``.

    Under the nested model ``delta`` is ignored.
    """
    if delta < 0:
        raise DomainError("delta must be non-negative")
    case = regime.case
    if under_null:
        if case == "sublinear":
            return 1.0
        if case == "linear":
            return (regime.r - 1.0) / regime.r
        return regime.s * (regime.r - 1.0) / (regime.r * (regime.s - 1.0))
    if case == "sublinear":
        return 1.0 / (1.0 + delta)
    if case == "linear":
        return (1.0 - 1.0 / regime.r) / (1.0 + delta)
    return (1.0 - 1.0 / regime.r) / (1.0 + delta - 1.0 / regime.s)


def threshold_for(regime: GrowthRegime) -> float:
    case = regime.case
    if case == "sublinear":
        return 0.0
    if case == "linear":
        return delta_r(regime.r)
    return delta_rs(regime.r, regime.s)


def classify(regime: GrowthRegime, delta_lim: float, tol: float = 1e-9) -> ConsistencyVerdict:
    """Consistency of the intrinsic Bayes factor for a limiting distance.

    Every regime is consistent under the nested model; under the full model
    consistency needs ``delta_lim`` above the regime's threshold. Within
    ``tol`` of the threshold no verdict is given.
    """
    if delta_lim < 0:
        raise DomainError("delta_lim must be non-negative")
    if tol <= 0:
        raise DomainError("tol must be positive")
    threshold = threshold_for(regime)
    margin = delta_lim - threshold
    if abs(margin) <= tol:
        verdict = Verdict.BOUNDARY_INDETERMINATE
    elif margin > 0:
        verdict = Verdict.CONSISTENT_UNDER_BOTH
    else:
        verdict = Verdict.INCONSISTENT_UNDER_ALTERNATIVE
    return ConsistencyVerdict(verdict, threshold, margin)
