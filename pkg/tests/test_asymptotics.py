import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from intrinsic_bf.asymptotics import (
    DELTA_R_AT_ONE,
    DELTA_R_AT_ZERO,
    GrowthRegime,
    Verdict,
    berger_bound_R,
    bip_limit,
    classify,
    delta_r,
    delta_rs,
    in_region_C,
)
from intrinsic_bf.errors import DomainError


def delta_r_direct(r):
    return (r - 1) / ((r + 1) ** ((r - 1) / r) - 1) - 1


class TestDeltaR:
    def test_limit_at_one(self):
        assert DELTA_R_AT_ONE == pytest.approx(0.442695, abs=1e-6)
        assert abs(delta_r(1 + 1e-12) - (1 / math.log(2) - 1)) < 1e-9
        assert delta_r(1.0, extended=True) == DELTA_R_AT_ONE

    def test_limit_at_zero(self):
        assert DELTA_R_AT_ZERO == pytest.approx(0.581977, abs=1e-6)
        assert abs(delta_r(1e-9, extended=True) - 1 / (math.e - 1)) < 1e-8
        assert delta_r(0.0, extended=True) == pytest.approx(1 / (math.e - 1), abs=1e-15)

    def test_value_at_two(self):
        assert delta_r(2.0) == pytest.approx(1 / (math.sqrt(3) - 1) - 1, rel=1e-14)
        assert delta_r(2.0) == pytest.approx(0.366025, abs=1e-6)

    @pytest.mark.parametrize("r", [1.0, 0.5, -1.0])
    def test_domain(self, r):
        with pytest.raises(DomainError):
            delta_r(r)

    def test_series_joins_formula(self):
        for eps in (9.9e-5, -9.9e-5, 1.01e-4, -1.01e-4):
            r = 1 + eps
            assert delta_r(r, extended=True) == pytest.approx(delta_r_direct(r), abs=1e-11)

    def test_decreasing_convex(self):
        r = np.arange(1.01, 50.0, 0.01)
        d = np.array([delta_r(v) for v in r])
        assert np.all(np.diff(d) < 0)
        assert np.all(np.diff(d, 2) >= -1e-15)
        assert delta_r(1e6) < 1e-4
        assert np.all((d > 0) & (d < DELTA_R_AT_ONE))


class TestDeltaRS:
    def test_tends_to_delta_r(self):
        for r in (1.5, 2.0, 7.0):
            assert abs(delta_rs(r, 1e9) - delta_r(r)) < 1e-6
        assert delta_rs(3.0, math.inf) == delta_r(3.0)

    def test_zero_at_s_equal_r(self):
        for r in (1.5, 2.0, 10.0):
            assert abs(delta_rs(r, r * (1 + 1e-12))) < 1e-9

    def test_hand_value(self):
        want = 1 / (3 ** (2 / 3) - 1) - 1 + 0.25
        assert delta_rs(2.0, 4.0) == pytest.approx(want, rel=1e-14)
        assert delta_rs(2.0, 4.0) == pytest.approx(0.175854, abs=1e-6)

    @settings(max_examples=300)
    @given(r=st.floats(1.0001, 200), gap=st.floats(1e-6, 1e4))
    def test_bounded(self, r, gap):
        assert delta_rs(r, r + gap) <= DELTA_R_AT_ONE + 1e-12

    def test_domain(self):
        with pytest.raises(DomainError):
            delta_rs(2.0, 2.0)
        with pytest.raises(DomainError):
            delta_rs(1.0, 3.0)


class TestBerger:
    def test_values(self):
        assert berger_bound_R(2, 1) == pytest.approx(2 * math.log(2) - 1, rel=1e-15)
        assert berger_bound_R(2, 1) == pytest.approx(0.386294, abs=1e-6)
        assert berger_bound_R(1, 1) == pytest.approx(1.5 * math.log(3) - 1, rel=1e-15)

    def test_decreasing(self):
        ts = np.linspace(1, 40, 80)
        ms = range(1, 60)
        for m in (1, 3, 10):
            vals = [berger_bound_R(t, m) for t in ts]
            assert all(b < a for a, b in zip(vals, vals[1:]))
        for t in (1, 2, 5):
            vals = [berger_bound_R(t, m) for m in ms]
            assert all(b < a for a, b in zip(vals, vals[1:]))
        assert berger_bound_R(2, 10**7) < 1e-5

    def test_region(self):
        assert not in_region_C(2, 1, 0.0)
        assert in_region_C(2, 1, 0.3)
        assert not in_region_C(2, 1, 0.5)

    def test_ordering_real_grid(self):
        for r in np.arange(1.05, 50, 0.05):
            assert berger_bound_R(2, r) < delta_r(r) < berger_bound_R(1, r)


class TestGrowthRegime:
    @pytest.mark.parametrize(
        "kw",
        [
            dict(a=0.5, b=0.4),
            dict(a=0, b=1),
            dict(a=0, b=1, r=1.0),
            dict(a=1, b=1, r=2),
            dict(a=1, b=1, r=2, s=2),
            dict(a=0, b=0.5, r=2),
        ],
    )
    def test_invalid(self, kw):
        with pytest.raises(DomainError):
            GrowthRegime(**kw)

    def test_cases(self):
        assert GrowthRegime(0.2, 0.9).case == "sublinear"
        assert GrowthRegime(0, 1, 2).case == "linear"
        assert GrowthRegime(1, 1, 2, 4).case == "equal"


class TestBipLimit:
    def test_linear_alternative(self):
        assert bip_limit(GrowthRegime(0.3, 1, 2.0), 1.0) == pytest.approx(0.25)

    def test_sublinear(self):
        assert bip_limit(GrowthRegime(0.3, 0.8), 0.0) == 1.0
        assert bip_limit(GrowthRegime(0.3, 0.8), 0.0, under_null=True) == 1.0
        assert bip_limit(GrowthRegime(0.3, 0.8), 0.5) == pytest.approx(1 / 1.5)

    def test_equal_rates_continuity_at_zero(self):
        reg = GrowthRegime(1, 1, 2.0, 4.0)
        assert bip_limit(reg, 0.0) == pytest.approx(2 / 3, rel=1e-15)
        assert bip_limit(reg, 0.0, under_null=True) == pytest.approx(2 / 3, rel=1e-15)

    def test_linear_null(self):
        assert bip_limit(GrowthRegime(0, 1, 4.0), 0.7, under_null=True) == pytest.approx(0.75)


class TestClassify:
    def test_sublinear(self):
        v = classify(GrowthRegime(0.5, 0.9), 0.01)
        assert v.verdict is Verdict.CONSISTENT_UNDER_BOTH and v.threshold_used == 0.0

    def test_linear_inside_region(self):
        v = classify(GrowthRegime(0, 1, 2.0), 0.2)
        assert v.verdict is Verdict.INCONSISTENT_UNDER_ALTERNATIVE
        assert v.threshold_used == pytest.approx(0.366025, abs=1e-6)

    def test_boundary(self):
        v = classify(GrowthRegime(1, 1, 2.0, 4.0), 0.175854, tol=1e-6)
        assert v.verdict is Verdict.BOUNDARY_INDETERMINATE
        v = classify(GrowthRegime(1, 1, 2.0, 4.0), delta_rs(2.0, 4.0))
        assert v.verdict is Verdict.BOUNDARY_INDETERMINATE

    @settings(max_examples=300)
    @given(r=st.floats(1.01, 100), d=st.floats(0, 2))
    def test_sign_agreement(self, r, d):
        reg = GrowthRegime(0, 1, r)
        v = classify(reg, d, tol=1e-9)
        margin = d - delta_r(r)
        if margin > 1e-9:
            assert v.verdict is Verdict.CONSISTENT_UNDER_BOTH
        elif margin < -1e-9:
            assert v.verdict is Verdict.INCONSISTENT_UNDER_ALTERNATIVE
        else:
            assert v.verdict is Verdict.BOUNDARY_INDETERMINATE
