"""Flux algebra and the monotonicity inequalities with explicit constants."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from kmslab.grids import Field, Grid
from kmslab.plaplace import (
    flux,
    monotonicity_constants,
    norm_monotonicity_check,
    pointwise_monotonicity_gap,
    regularized_flux,
)

P_VALUES = (1.2, 1.5, 2.0, 3.0, 4.0)


class TestFlux:
    def test_p2_is_identity(self):
        xi = np.array([[1.5, -2.0], [0.3, 0.0]])
        assert np.array_equal(flux(xi, 2.0), xi)

    def test_p3_example(self):
        out = flux(np.array([2.0, 0.0]), 3.0)
        assert np.allclose(out, [4.0, 0.0], rtol=1e-14)

    def test_zero_maps_to_zero(self):
        for p in P_VALUES:
            assert np.all(flux(np.zeros(3), p) == 0.0)

    def test_rejects_p_le_1(self):
        with pytest.raises(ValueError):
            flux(np.ones(2), 1.0)

    @given(
        xi=arrays(np.float64, 3, elements=st.floats(min_value=-100, max_value=100)),
        lam=st.floats(min_value=1e-3, max_value=1e3),
        p=st.sampled_from(P_VALUES),
    )
    def test_odd_and_homogeneous(self, xi, lam, p):
        f = flux(xi, p)
        assert np.allclose(flux(-xi, p), -f, rtol=1e-10, atol=1e-300)
        scale = lam ** (p - 1.0)
        assert np.allclose(flux(lam * xi, p), scale * f, rtol=1e-10, atol=1e-300)


class TestRegularizedFlux:
    def test_eps_zero_matches_flux(self):
        xi = np.array([0.7, -1.1])
        for p in P_VALUES:
            assert np.array_equal(regularized_flux(xi, p, 0.0), flux(xi, p))

    def test_p2_exact_for_any_eps(self):
        xi = np.array([3.0, 4.0])
        assert np.array_equal(regularized_flux(xi, 2.0, 0.5), xi)

    def test_zero_vector(self):
        assert np.all(regularized_flux(np.zeros(2), 1.5, 0.1) == 0.0)

    def test_converges_as_eps_vanishes(self):
        xi = np.array([0.8, -0.6])  # |xi| = 1
        for p in (1.5, 3.0):
            exact = flux(xi, p)
            for eps in (1e-2, 1e-4, 1e-6):
                rel = np.max(np.abs(regularized_flux(xi, p, eps) - exact)) / np.max(np.abs(exact))
                assert rel <= eps * eps * abs(p - 2.0)  # leading-order bound


class TestConstants:
    def test_p2(self):
        c = monotonicity_constants(2.0)
        assert (c.C, c.alpha, c.beta) == (1.0, 1.0, 0.0)

    def test_p3(self):
        c = monotonicity_constants(3.0)
        assert (c.C, c.alpha, c.beta) == (2.0, 1.0, 0.0)

    def test_p15(self):
        c = monotonicity_constants(1.5)
        assert c.alpha == 0.75
        assert c.beta == 4.0
        assert c.C == pytest.approx((2.0**0.25 / 0.5) ** 0.75, rel=1e-14)

    def test_positive_for_all_p(self):
        for p in P_VALUES:
            assert monotonicity_constants(p).C > 0.0


class TestPointwiseGap:
    def test_p2_orthonormal_pair(self):
        gap = pointwise_monotonicity_gap(np.array([1.0, 0.0]), np.array([0.0, 1.0]), 2.0)
        assert gap == pytest.approx(0.0, abs=1e-14)

    def test_p3_against_zero(self):
        gap = pointwise_monotonicity_gap(np.array([1.0, 0.0]), np.zeros(2), 3.0)
        assert gap == pytest.approx(0.5, rel=1e-14)

    def test_equal_vectors(self):
        v = np.array([0.3, -0.7, 1.1])
        for p in P_VALUES:
            assert pointwise_monotonicity_gap(v, v, p) == 0.0

    def test_p2_is_an_identity(self):
        rng = np.random.default_rng(3)
        A = rng.normal(size=(200, 3))
        B = rng.normal(size=(200, 3))
        gap = pointwise_monotonicity_gap(A, B, 2.0)
        scale = np.sum((A - B) ** 2, axis=-1)
        assert np.all(np.abs(gap) <= 1e-12 * np.maximum(scale, 1.0))

    @pytest.mark.parametrize("p", P_VALUES)
    @pytest.mark.parametrize("d", (1, 2, 3))
    def test_nonnegative_on_random_pairs(self, p, d):
        rng = np.random.default_rng(round(1000 * p) + d)
        A = rng.normal(scale=3.0, size=(20_000, d))
        B = rng.normal(scale=3.0, size=(20_000, d))
        gap = pointwise_monotonicity_gap(A, B, p)
        scale = (1.0 + np.linalg.norm(A, axis=-1) + np.linalg.norm(B, axis=-1)) ** p
        assert np.all(gap >= -1e-10 * scale)


def _random_fields(seed, n=33, d=1):
    rng = np.random.default_rng(seed)
    grid = Grid(d=d, n_per_axis=n)
    def make():
        vals = rng.normal(size=grid.shape)
        vals[grid.boundary_mask()] = 0.0
        return Field(grid, vals)
    return make(), make()


class TestNormLevel:
    def test_identical_fields(self):
        u, _ = _random_fields(0)
        for p in P_VALUES:
            lhs, rhs = norm_monotonicity_check(u, u, p)
            assert lhs == 0.0
            assert rhs >= 0.0

    def test_p2_equality(self):
        u1, u2 = _random_fields(1)
        lhs, rhs = norm_monotonicity_check(u1, u2, 2.0)
        assert lhs == pytest.approx(rhs, rel=1e-12)

    @pytest.mark.parametrize("p", P_VALUES)
    @pytest.mark.parametrize("d", (1, 2))
    def test_inequality_on_random_fields(self, p, d):
        for seed in range(25):
            u1, u2 = _random_fields(seed + 100, n=17, d=d)
            lhs, rhs = norm_monotonicity_check(u1, u2, p)
            assert lhs <= rhs * (1.0 + 1e-10)

    def test_grid_mismatch(self):
        u1, _ = _random_fields(0, n=17)
        u2, _ = _random_fields(0, n=33)
        with pytest.raises(ValueError):
            norm_monotonicity_check(u1, u2, 2.0)
