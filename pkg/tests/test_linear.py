import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from intrinsic_bf.errors import DegenerateFit, DimensionError, RankDeficient
from intrinsic_bf.linear import (
    DesignMatrix,
    TrueModelSpec,
    bip_statistic,
    build_nested_pair,
    effect_coded_design,
    factorial_design,
    model_distance,
    oneway_anova_design,
    oneway_contrast_design,
    oneway_distance,
    reduced_factorial_param_count,
    reduced_factorial_rate,
    residual_sum_squares,
)
from oracles import dense_rss


def _padded_identity(n, k):
    x = np.zeros((n, k))
    x[:k, :k] = np.eye(k)
    return x


class TestBuildNestedPair:
    def test_valid(self):
        pair = build_nested_pair(DesignMatrix(_padded_identity(10, 3)), 1)
        assert (pair.n, pair.p, pair.i) == (10, 3, 1)

    def test_square_rejected(self):
        x = np.random.default_rng(0).normal(size=(5, 5))
        with pytest.raises(DimensionError):
            build_nested_pair(DesignMatrix(x), 2)

    def test_collinear_rejected(self):
        x = np.random.default_rng(1).normal(size=(10, 3))
        x[:, 2] = x[:, 0] + x[:, 1]
        with pytest.raises(RankDeficient):
            build_nested_pair(DesignMatrix(x), 1)

    @pytest.mark.parametrize("i", [-1, 4])
    def test_i_out_of_range(self, i):
        with pytest.raises(DimensionError):
            build_nested_pair(DesignMatrix(_padded_identity(10, 3)), i)

    def test_design_is_immutable(self):
        d = DesignMatrix(np.ones((3, 1)))
        with pytest.raises(ValueError):
            d.entries[0, 0] = 2.0


class TestResidualSumSquares:
    def test_exact_fit(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(12, 3))
        y = x @ np.array([1.0, -2.0, 0.5])
        rss = residual_sum_squares(DesignMatrix(x), y)
        assert abs(rss) <= 12 * np.finfo(float).eps * (y @ y)

    def test_centered_sum_of_squares(self):
        assert residual_sum_squares(DesignMatrix(np.ones((4, 1))), [1, 2, 3, 4]) == pytest.approx(5.0, abs=1e-13)

    def test_matches_dense_oracle(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(20, 4))
        y = rng.normal(size=20)
        assert residual_sum_squares(DesignMatrix(x), y) == pytest.approx(dense_rss(x, y), rel=1e-10)

    def test_200_random_instances(self):
        rng = np.random.default_rng(4)
        for _ in range(200):
            n = int(rng.integers(2, 51))
            k = int(rng.integers(1, n))
            x = rng.normal(size=(n, k))
            y = rng.normal(size=n)
            got = residual_sum_squares(DesignMatrix(x), y)
            want = dense_rss(x, y)
            assert abs(got - want) <= 1e-10 * max(want, 1e-300) + 1e-12 * (y @ y)

    def test_zero_columns(self):
        y = np.array([1.0, 2.0])
        assert residual_sum_squares(DesignMatrix(np.zeros((2, 0))), y) == 5.0

    def test_length_mismatch(self):
        with pytest.raises(DimensionError):
            residual_sum_squares(DesignMatrix(np.ones((4, 1))), [1, 2, 3])


class TestBipStatistic:
    def test_identical_models(self):
        rng = np.random.default_rng(5)
        pair = build_nested_pair(DesignMatrix(rng.normal(size=(15, 4))), 4)
        fit = bip_statistic(pair, rng.normal(size=15))
        assert fit.bip == 1.0 and fit.log_bip == 0.0

    def test_orthogonal_response(self):
        x = _padded_identity(10, 3)
        y = np.zeros(10)
        y[5:] = [1.0, -2.0, 0.5, 3.0, 1.0]
        fit = bip_statistic(build_nested_pair(DesignMatrix(x), 1), y)
        assert fit.bip == pytest.approx(1.0, abs=1e-15)
        assert fit.rss_full == pytest.approx(y @ y)

    def test_matches_dense_ratio(self):
        rng = np.random.default_rng(6)
        x = rng.normal(size=(20, 5))
        y = rng.normal(size=20)
        fit = bip_statistic(build_nested_pair(DesignMatrix(x), 2), y)
        want = dense_rss(x, y) / dense_rss(x[:, :2], y)
        assert fit.bip == pytest.approx(want, rel=1e-10)
        assert fit.log_bip == pytest.approx(math.log(want), abs=1e-10)

    def test_degenerate(self):
        x = _padded_identity(10, 3)
        y = np.zeros(10)
        y[0] = 1.0
        with pytest.raises(DegenerateFit):
            bip_statistic(build_nested_pair(DesignMatrix(x), 1), y)

    @settings(max_examples=60, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), n=st.integers(6, 40))
    def test_nesting_monotone(self, seed, n):
        rng = np.random.default_rng(seed)
        p = int(rng.integers(1, n - 1))
        x = rng.normal(size=(n, p))
        y = rng.normal(size=n) * rng.uniform(0.1, 10)
        rss = [residual_sum_squares(DesignMatrix(x[:, :j]), y) for j in range(p + 1)]
        tol = 1e-10 * rss[0]
        assert all(b <= a + tol for a, b in zip(rss, rss[1:]))
        for i in range(p + 1):
            fit = bip_statistic(build_nested_pair(DesignMatrix(x), i), y)
            assert 0.0 < fit.bip <= 1.0
            assert (fit.bip == 1.0) if i == p else True


class TestModelDistance:
    def test_zero_when_inside_reduced_span(self):
        rng = np.random.default_rng(7)
        x = rng.normal(size=(30, 5))
        pair = build_nested_pair(DesignMatrix(x), 2)
        truth = TrueModelSpec(pair.full, [1.0, -3.0, 0, 0, 0], 1.3)
        assert model_distance(pair, truth) == pytest.approx(0.0, abs=1e-14)

    def test_sigma_scaling(self):
        rng = np.random.default_rng(8)
        pair = build_nested_pair(DesignMatrix(rng.normal(size=(30, 5))), 2)
        beta = rng.normal(size=5)
        d1 = model_distance(pair, TrueModelSpec(pair.full, beta, 1.0))
        d2 = model_distance(pair, TrueModelSpec(pair.full, beta, 2.0))
        assert d2 == pytest.approx(d1 / 4, rel=1e-13)

    def test_matches_oneway_closed_form(self):
        rng = np.random.default_rng(9)
        for p, m in [(3, 2), (5, 4), (8, 2)]:
            mu = rng.normal(size=p)
            x = oneway_contrast_design([m] * p)
            pair = build_nested_pair(x, 1)
            beta = np.concatenate([[mu[0]], mu[1:] - mu[0]])
            got = model_distance(pair, TrueModelSpec(x, beta, 0.7))
            assert got == pytest.approx(oneway_distance(mu, 0.7), rel=1e-12, abs=1e-14)

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_invariant_under_reduced_span_shift(self, seed):
        rng = np.random.default_rng(seed)
        n, p = 25, 6
        i = int(rng.integers(1, p))
        x = rng.normal(size=(n, p))
        pair = build_nested_pair(DesignMatrix(x), i)
        beta = rng.normal(size=p)
        v = np.zeros(p)
        v[:i] = rng.normal(size=i) * 5
        d1 = model_distance(pair, TrueModelSpec(pair.full, beta, 1.0))
        d2 = model_distance(pair, TrueModelSpec(pair.full, beta + v, 1.0))
        assert d1 >= 0
        assert d2 == pytest.approx(d1, rel=1e-9, abs=1e-12)

    def test_requires_matching_design(self):
        rng = np.random.default_rng(10)
        pair = build_nested_pair(DesignMatrix(rng.normal(size=(10, 2))), 1)
        other = DesignMatrix(rng.normal(size=(10, 2)))
        with pytest.raises(DimensionError):
            model_distance(pair, TrueModelSpec(other, [1.0, 1.0], 1.0))


class TestOneway:
    def test_identity(self):
        np.testing.assert_array_equal(oneway_anova_design(2, 1).entries, np.eye(2))

    def test_stacked_blocks(self):
        want = np.array([[1, 0, 0], [1, 0, 0], [0, 1, 0], [0, 1, 0], [0, 0, 1], [0, 0, 1]])
        x = oneway_anova_design(3, 2).entries
        np.testing.assert_array_equal(x, want)
        np.testing.assert_array_equal(x.sum(axis=0), [2, 2, 2])

    def test_contrast_design_spans_indicator_space(self):
        a = oneway_anova_design(4, 3).entries
        b = oneway_contrast_design([3] * 4).entries
        coef, *_ = np.linalg.lstsq(a, b, rcond=None)
        np.testing.assert_allclose(a @ coef, b, atol=1e-13)

    def test_distance_values(self):
        assert oneway_distance([3.0, 3.0, 3.0], 2.0) == 0.0
        assert oneway_distance([0.0, 2.0], 1.0) == 1.0

    def test_random_generic_agreement(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            p = int(rng.integers(2, 10))
            m = int(rng.integers(1, 6))
            mu = rng.normal(size=p) * 3
            sigma = float(rng.uniform(0.2, 3))
            x = oneway_contrast_design([m] * p)
            if x.n <= x.k:
                continue
            beta = np.concatenate([[mu[0]], mu[1:] - mu[0]])
            got = model_distance(build_nested_pair(x, 1), TrueModelSpec(x, beta, sigma))
            assert got == pytest.approx(oneway_distance(mu, sigma), rel=1e-12, abs=1e-14)


class TestFactorial:
    def test_full_222(self):
        x, p = factorial_design((2, 2, 2), 1, include_three_way=True)
        assert p == 8 and x.n == 8 and x.k == 8

    def test_reduced_222(self):
        x, p = factorial_design((2, 2, 2), 2, include_three_way=False)
        assert x.n == 16 and p == 7
        assert np.linalg.matrix_rank(x.entries) == 7

    @pytest.mark.parametrize("levels", [(3, 2, 2), (3, 4, 2), (4, 3, 5)])
    def test_counts(self, levels):
        i, j, k = levels
        x, p = factorial_design(levels, 2, include_three_way=True)
        assert p == i * j * k == np.linalg.matrix_rank(x.entries)
        x, p = factorial_design(levels, 2, include_three_way=False)
        assert p == np.linalg.matrix_rank(x.entries)
        assert p <= reduced_factorial_param_count(levels)

    def test_columns_are_effect_coded(self):
        x, _ = factorial_design((3, 2, 2), 1, include_three_way=False)
        np.testing.assert_allclose(x.entries[:, 1:].sum(axis=0), 0.0, atol=1e-12)

    def test_rate_rule(self):
        assert reduced_factorial_rate((True, False, False)) == "O(n)"
        assert reduced_factorial_rate((True, True, False)) == "O(n)"
        assert reduced_factorial_rate((True, True, True)) == "o(n)"
        assert reduced_factorial_rate((False, False, False)) == "O(1)"

    def test_rate_rule_matches_counts(self):
        # p/n stays bounded away from 0 when only I grows, vanishes when all grow.
        def ratio(levels):
            i, j, k = levels
            return reduced_factorial_param_count(levels) / (i * j * k)

        assert ratio((300, 2, 2)) > 0.5 * ratio((30, 2, 2)) > 0.3
        assert ratio((60, 60, 60)) < 0.1 * ratio((6, 6, 6))

    def test_prefix_terms_ordered(self):
        codes = [np.array([0, 1, 2, 0, 1, 2]), np.array([0, 0, 0, 1, 1, 1])]
        _, terms = effect_coded_design(codes, [3, 2])
        orders = [len(t) for t in terms]
        assert orders == sorted(orders)
