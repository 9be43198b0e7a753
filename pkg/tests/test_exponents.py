"""Exponent arithmetic against hand-derived values and threshold identities."""

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kmslab.exponents import (
    ExponentError,
    ProblemParams,
    Zone,
    admissibility_check,
    eta_threshold_exponent,
    holder_conjugate,
    regularized_exponents,
    sigma_exponent,
    sobolev_conjugate,
    zone_classify,
)

REL = 1e-12


def close(a, b):
    return math.isclose(a, b, rel_tol=REL, abs_tol=0.0)


class TestGoldenTable:
    """Hand-derived exponent values, frozen independently of the implementation."""

    @pytest.mark.parametrize(
        "p, N, expected",
        [(2.0, 3.0, 6.0), (2.0, 4.0, 4.0), (1.5, 3.0, 3.0)],
    )
    def test_sobolev_conjugate(self, p, N, expected):
        assert close(sobolev_conjugate(p, N), expected)

    @pytest.mark.parametrize(
        "q, expected",
        [(2.0, 2.0), (6.0, 1.2), (7.5, 15.0 / 13.0)],
    )
    def test_holder_conjugate(self, q, expected):
        assert close(holder_conjugate(q), expected)

    @pytest.mark.parametrize(
        "tau, p, N, expected",
        [
            (1.0, 2.0, 3.0, (1.5, 3.0)),
            (1.0, 2.0, 4.0, (4.0 / 3.0, 2.0)),
            (1.2, 2.0, 3.0, (2.0, 6.0)),
        ],
    )
    def test_regularized_exponents(self, tau, p, N, expected):
        star, double_star = regularized_exponents(tau, p, N)
        assert close(star, expected[0])
        assert close(double_star, expected[1])

    @pytest.mark.parametrize(
        "N, m, expected",
        [
            # N chosen so each m sits inside the admissible window
            (2.3, 1.1, 4.0 / 3.0),       # m' = 11 >= 7.5
            (5.0, 2.0, 2.0 / 13.0),      # m' = 2 < 7.5, so 1/(r+theta) = 1/6.5
            (2.5, 15.0 / 13.0, 4.0 / 3.0),  # boundary m' = 7.5 exactly: ">=" branch
        ],
    )
    def test_sigma_branches(self, N, m, expected):
        params = ProblemParams(N=N, p=2.0, r=6.0, theta=0.5, m=m)
        assert close(sigma_exponent(params), expected)

    def test_eta_threshold_value(self):
        # 2r/(p-1) + (theta+1)[2r(2p-1)+(theta+2p-1)(p-1)] / [(p-1)^2(2p-1)]
        # = 4 + 1.5*(12 + 3.5)/3 = 11.75
        assert close(eta_threshold_exponent(2.0, 2.0, 0.5), 11.75)

    def test_eta_threshold_monotone_in_r(self):
        assert eta_threshold_exponent(2.0, 3.0, 0.5) > eta_threshold_exponent(2.0, 2.0, 0.5)

    def test_zone_window_endpoints(self):
        # reference case: p* = 6, (p*)' = 1.2, (r+theta+1)' = 15/13
        params = ProblemParams(N=3.0, p=2.0, r=6.0, theta=0.5, m=1.18)
        report = zone_classify(params)
        assert close(report.p_star, 6.0)
        assert close(report.coupling_conj, 15.0 / 13.0)


class TestDomainErrors:
    def test_sobolev_conjugate_rejects_p_out_of_range(self):
        with pytest.raises(ExponentError):
            sobolev_conjugate(3.0, 3.0)
        with pytest.raises(ExponentError):
            sobolev_conjugate(1.0, 3.0)

    def test_holder_conjugate_rejects_q_le_1(self):
        with pytest.raises(ExponentError):
            holder_conjugate(1.0)

    def test_regularized_exponents_rejects_tau_at_critical(self):
        with pytest.raises(ExponentError):
            regularized_exponents(1.5, 2.0, 3.0)  # tau = N/p

    def test_params_constructor_validation(self):
        with pytest.raises(ValueError):
            ProblemParams(N=2.0, p=1.5, r=2.0, theta=0.5, m=1.2)
        with pytest.raises(ValueError):
            ProblemParams(N=3.0, p=3.5, r=2.0, theta=0.5, m=1.2)
        with pytest.raises(ValueError):
            ProblemParams(N=3.0, p=2.0, r=2.0, theta=0.5, m=1.2, c1=2.0, c2=1.0)


class TestAdmissibility:
    def test_reference_case_admissible(self):
        params = ProblemParams(N=3.0, p=2.0, r=6.0, theta=0.5, m=1.18)
        verdict = admissibility_check(params)
        assert verdict.admissible
        assert not verdict.failures()

    def test_theta_too_large(self):
        params = ProblemParams(N=3.0, p=2.0, r=6.0, theta=1.5, m=1.18)
        verdict = admissibility_check(params)
        assert not verdict.admissible
        failed = {c.name for c in verdict.failures()}
        assert "theta < p-1" in failed

    def test_m_above_critical(self):
        params = ProblemParams(N=3.0, p=2.0, r=6.0, theta=0.5, m=1.6)
        verdict = admissibility_check(params)
        assert not verdict.admissible
        failed = {c.name for c in verdict.failures()}
        assert "m < N/p" in failed


class TestZones:
    def test_sobolev_regularized_case(self):
        params = ProblemParams(N=3.0, p=2.0, r=6.0, theta=0.5, m=1.18)
        report = zone_classify(params)
        assert report.zone is Zone.U_SOBOLEV_REGULARIZED
        assert report.v_sobolev

    def test_lebesgue_regularized_case(self):
        params = ProblemParams(N=3.0, p=2.0, r=6.0, theta=0.5, m=1.22)
        report = zone_classify(params)
        assert report.zone is Zone.U_LEBESGUE_REGULARIZED
        # upper endpoint of the Lebesgue window: 22.5/18 = 1.25
        assert 1.2 <= 1.22 < 1.25

    def test_outside_zone_for_subcritical_coupling(self):
        params = ProblemParams(N=3.0, p=2.0, r=3.0, theta=0.5, m=1.3)
        report = zone_classify(params)
        assert report.zone is Zone.OUTSIDE_REGULARIZING_ZONE

    def test_zone_rejects_inadmissible(self):
        params = ProblemParams(N=3.0, p=2.0, r=6.0, theta=1.5, m=1.18)
        with pytest.raises(ExponentError):
            zone_classify(params)


@st.composite
def admissible_params(draw):
    N = draw(st.floats(min_value=2.5, max_value=6.0))
    p = draw(st.floats(min_value=1.2, max_value=min(3.0, N - 0.5)))
    theta_cap = min(p - 1.0, p * p / (N - p))
    theta = draw(st.floats(min_value=1e-3, max_value=0.95 * theta_cap))
    r = draw(st.floats(min_value=1.05, max_value=8.0))
    s = r + theta + 1.0
    p_star = N * p / (N - p)
    lo = min(s / (s - 1.0), p_star / (p_star - 1.0))
    hi = N / p
    m = draw(st.floats(min_value=lo * 1.0001 + 1e-9, max_value=hi * 0.9999))
    return ProblemParams(N=N, p=p, r=r, theta=theta, m=m)


@given(q=st.floats(min_value=1.0001, max_value=100.0))
def test_conjugate_involution(q):
    assert math.isclose(holder_conjugate(holder_conjugate(q)), q, rel_tol=1e-12)


@settings(max_examples=300)
@given(params=admissible_params())
def test_threshold_identities(params):
    """m < (p*)' <=> m*_p < p <=> m**_p < p*; Lebesgue window <=> m**_p < r+theta+1."""
    report = zone_classify(params)
    p_star_conj = holder_conjugate(params.p_star)
    s = params.coupling_sum
    lebesgue_upper = params.N * s / (params.N * (params.p - 1.0) + params.p * s)
    if abs(params.m - p_star_conj) > 1e-9 * p_star_conj:
        assert (params.m < p_star_conj) == (report.m_star_p < params.p)
        assert (params.m < p_star_conj) == (report.m_double_star_p < params.p_star)
    if abs(params.m - lebesgue_upper) > 1e-9 * lebesgue_upper:
        assert (params.m < lebesgue_upper) == (report.m_double_star_p < s)


@settings(max_examples=300)
@given(params=admissible_params())
def test_zone_report_consistency(params):
    report = zone_classify(params)
    assert report.m_star_p < report.m_double_star_p
    assert report.p_star > params.p
    if report.zone is Zone.U_SOBOLEV_REGULARIZED:
        assert report.v_sobolev
    # r+theta > p*-1 <=> t_v < (p*)'
    supercritical = params.r + params.theta > report.p_star - 1.0
    gap = abs(params.r + params.theta - (report.p_star - 1.0))
    if gap > 1e-9:
        assert supercritical == (report.t_v < holder_conjugate(report.p_star))
