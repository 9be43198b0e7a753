"""Coupling nonlinearities: evaluation, truncation, primitives and bound checks."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kmslab.nonlinearity import (
    NonlinearitySpec,
    NonVariationalError,
    g_derivative_s,
    g_eval,
    h_eval,
    primitive_in_s,
    tail_part,
    truncate,
    verify_growth_bounds,
)

X0 = np.array([0.5])

finite = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False)


class TestTruncation:
    @pytest.mark.parametrize("eta, s, expected", [(2.0, 3.0, 2.0), (2.0, -5.0, -2.0), (2.0, 1.5, 1.5)])
    def test_truncate_values(self, eta, s, expected):
        assert truncate(eta, s) == expected

    @pytest.mark.parametrize("n, s, expected", [(1.0, 3.0, 2.0), (1.0, 0.5, 0.0), (2.0, -5.0, -3.0)])
    def test_tail_values(self, n, s, expected):
        assert tail_part(n, s) == expected

    def test_level_must_be_positive(self):
        with pytest.raises(ValueError):
            truncate(0.0, 1.0)
        with pytest.raises(ValueError):
            tail_part(-1.0, 1.0)

    @given(s=finite, eta=st.floats(min_value=1e-6, max_value=1e6))
    def test_idempotent_and_exact_split(self, s, eta):
        clamped = truncate(eta, s)
        assert truncate(eta, clamped) == clamped
        assert abs(clamped) <= min(abs(s), eta) or math.isclose(abs(clamped), eta)
        # T_n + G_n = identity exactly in floating point
        assert clamped + tail_part(eta, s) == s


class TestPrototypeEvaluation:
    SPEC = NonlinearitySpec.prototype(2.0, 0.5)

    def test_g_values(self):
        assert g_eval(self.SPEC, X0, 2.0, 1.0) == pytest.approx(2.0, rel=1e-14)
        assert g_eval(self.SPEC, X0, 0.0, 5.0) == 0.0

    def test_h_values(self):
        assert h_eval(self.SPEC, X0, 2.0, 4.0) == pytest.approx(8.0, rel=1e-14)
        assert h_eval(self.SPEC, X0, 3.0, 0.0) == 0.0
        assert h_eval(self.SPEC, X0, 2.0, -4.0) == pytest.approx(-8.0, rel=1e-14)

    @given(s=finite, t=finite)
    def test_sign_structure(self, s, t):
        assert g_eval(self.SPEC, X0, s, t) * s >= 0.0
        assert h_eval(self.SPEC, X0, s, t) * t >= 0.0

    @given(s=finite, t=finite)
    def test_h_odd_in_t(self, s, t):
        assert h_eval(self.SPEC, X0, s, -t) == -h_eval(self.SPEC, X0, s, t)

    def test_primitive_values(self):
        assert primitive_in_s(self.SPEC, X0, 2.0, 1.0) == pytest.approx(2.0, rel=1e-14)
        assert primitive_in_s(self.SPEC, X0, 0.0, 7.0) == 0.0
        cubic = NonlinearitySpec.prototype(3.0, 0.5)
        assert primitive_in_s(cubic, X0, -2.0, 1.0) == pytest.approx(8.0 / 3.0, rel=1e-14)

    def test_primitive_differentiates_to_g(self):
        delta = 1e-5
        for s in (0.7, 1.3, -2.1):
            for t in (0.4, 2.5):
                fd = (
                    primitive_in_s(self.SPEC, X0, s + delta, t)
                    - primitive_in_s(self.SPEC, X0, s - delta, t)
                ) / (2.0 * delta)
                assert fd == pytest.approx(g_eval(self.SPEC, X0, s, t), rel=1e-6)

    def test_derivative_availability(self):
        assert g_derivative_s(self.SPEC, X0, 1.0, 1.0) is not None
        shallow = NonlinearitySpec.prototype(1.5, 0.5)
        assert g_derivative_s(shallow, X0, 1.0, 1.0) is None


class TestOscillatory:
    def test_g_matches_modulated_prototype(self):
        spec = NonlinearitySpec.oscillatory(2.0, 0.5)
        # s = t = 1: |s|^{r-1}|t|^{theta+1} (cos(pi) + pi) = pi - 1
        assert g_eval(spec, X0, 1.0, 1.0) == pytest.approx(np.pi - 1.0, rel=1e-14)

    def test_claimed_constants(self):
        spec = NonlinearitySpec.oscillatory(2.0, 0.5, e1=2.0, e2=0.5)
        assert spec.c1 == pytest.approx(2.0 * (np.pi - 1.0))
        assert spec.d1 == pytest.approx(0.5 * (np.pi - 1.0))

    def test_nonconstant_weight_needs_sup(self):
        with pytest.raises(ValueError):
            NonlinearitySpec.oscillatory(2.0, 0.5, V1=lambda x: 1.0 + x[0])

    def test_primitive_unavailable(self):
        spec = NonlinearitySpec.oscillatory(2.0, 0.5)
        with pytest.raises(NonVariationalError):
            primitive_in_s(spec, X0, 1.0, 1.0)


class TestGrowthBounds:
    def test_prototype_ratios_exactly_one(self):
        report = verify_growth_bounds(
            NonlinearitySpec.prototype(2.0, 0.5), np.random.default_rng(7), 5000
        )
        assert report.all_passed
        for check in report.checks:
            assert check.worst_ratio == 1.0  # shared power kernel: exact in FP

    def test_oscillatory_passes(self):
        spec = NonlinearitySpec.oscillatory(2.0, 0.5)
        report = verify_growth_bounds(spec, np.random.default_rng(7), 5000)
        assert report.all_passed
        h1 = report.checks[0]
        assert h1.worst_ratio >= np.pi - 1.0 - 1e-10

    def test_sign_violating_custom_fails_with_witness(self):
        spec = NonlinearitySpec.custom(
            2.0, 0.5,
            g_fn=lambda x, s, t: -s * np.abs(t) ** 1.5,
            h_fn=lambda x, s, t: np.sign(t) * s * s * np.abs(t) ** 0.5,
            c1=1.0, c2=1.0, d1=1.0, d2=1.0,
        )
        report = verify_growth_bounds(spec, np.random.default_rng(7), 5000)
        assert not report.all_passed
        h1 = report.checks[0]
        assert not h1.passed
        assert h1.witness is not None

    def test_same_seed_reproduces(self):
        spec = NonlinearitySpec.prototype(3.0, 0.8)
        a = verify_growth_bounds(spec, np.random.default_rng(11), 2000)
        b = verify_growth_bounds(spec, np.random.default_rng(11), 2000)
        assert a == b

    def test_zero_spec_rejected(self):
        with pytest.raises(ValueError):
            verify_growth_bounds(NonlinearitySpec.zero(), np.random.default_rng(0))


class TestSpecValidation:
    def test_unknown_variant(self):
        with pytest.raises(ValueError):
            NonlinearitySpec(variant="weird", r=2.0, theta=0.5)

    def test_prototype_exponent_domains(self):
        with pytest.raises(ValueError):
            NonlinearitySpec.prototype(1.0, 0.5)
        with pytest.raises(ValueError):
            NonlinearitySpec.prototype(2.0, 0.0)

    def test_custom_requires_both_evaluators(self):
        with pytest.raises(ValueError):
            NonlinearitySpec(variant="custom", r=2.0, theta=0.5, g_fn=lambda x, s, t: s)

    def test_zero_spec_evaluates_to_zero(self):
        spec = NonlinearitySpec.zero()
        assert g_eval(spec, X0, 3.0, 4.0) == 0.0
        assert h_eval(spec, X0, 3.0, 4.0) == 0.0
