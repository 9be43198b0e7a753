"""Exponent and threshold arithmetic for the coupled nonlocal p-Laplacian system.

Every admissibility window, regularity zone and scaling exponent used by the
solver and the experiment harness is computed here, in plain double precision.
The parameter tuple is (N, p, r, theta, m): N is the analytic dimension of the
underlying domain (N > 2, independent of the computational grid dimension),
p the diffusion growth exponent, r and theta the coupling exponents, and m
the Lebesgue integrability exponent of the datum.

Comparisons against thresholds use a fixed tolerance ``THRESHOLD_TOL``:
classifications that land within the tolerance of a threshold are still made
(by the printed inequality symbols, strict or not), but the affected
threshold names are reported so callers can see the tie.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

THRESHOLD_TOL = 1e-12


class ExponentError(ValueError):
    """Raised when an exponent lies outside the domain of a formula."""


def sobolev_conjugate(p: float, N: float) -> float:
    """Critical Sobolev embedding exponent N*p/(N-p) for 1 < p < N."""
    if not 1.0 < p < N:
        raise ExponentError(f"sobolev_conjugate requires 1 < p < N, got p={p}, N={N}")
    return N * p / (N - p)


def holder_conjugate(q: float) -> float:
    """Dual Lebesgue exponent q/(q-1); an involution on (1, inf)."""
    if q <= 1.0:
        raise ExponentError(f"holder_conjugate requires q > 1, got q={q}")
    return q / (q - 1.0)


def regularized_exponents(tau: float, p: float, N: float) -> tuple[float, float]:
    """Regularity-gain thresholds for -lap_p w = F with F in L^tau.

    Returns (tau_star_p, tau_double_star_p) where

        tau_star_p        = N*tau*(p-1)/(N - tau)
        tau_double_star_p = N*tau*(p-1)/(N - tau*p)

    defined for 1 <= tau < N/p.  A solution with better Sobolev (resp.
    Lebesgue) exponent than tau_star_p (resp. tau_double_star_p) counts as
    regularized.
    """
    if not 1.0 < p < N:
        raise ExponentError(f"regularized_exponents requires 1 < p < N, got p={p}, N={N}")
    if not 1.0 <= tau < N / p:
        raise ExponentError(
            f"regularized_exponents requires 1 <= tau < N/p = {N / p}, got tau={tau}"
        )
    tau_star = N * tau * (p - 1.0) / (N - tau)
    tau_double_star = N * tau * (p - 1.0) / (N - tau * p)
    return tau_star, tau_double_star


@dataclass(frozen=True)
class ProblemParams:
    """Analytic parameters of the coupled system plus growth constants.

    c1/c2 bound the first coupling term g, d1/d2 bound the second coupling
    term h; the prototype nonlinearities attain all four with unit constants.
    """

    N: float
    p: float
    r: float
    theta: float
    m: float
    c1: float = 1.0
    c2: float = 1.0
    d1: float = 1.0
    d2: float = 1.0

    def __post_init__(self) -> None:
        if not self.N > 2.0:
            raise ValueError(f"N must exceed 2, got {self.N}")
        if not 1.0 < self.p < self.N:
            raise ValueError(f"p must satisfy 1 < p < N, got p={self.p}, N={self.N}")
        if not self.r > 1.0:
            raise ValueError(f"r must exceed 1, got {self.r}")
        if not self.theta > 0.0:
            raise ValueError(f"theta must be positive, got {self.theta}")
        if not self.m > 1.0:
            raise ValueError(f"m must exceed 1, got {self.m}")
        for name in ("c1", "c2", "d1", "d2"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")
        if self.c1 > self.c2:
            raise ValueError("c1 <= c2 is required for the growth bounds to be satisfiable")
        if self.d1 > self.d2:
            raise ValueError("d1 <= d2 is required for the growth bounds to be satisfiable")

    @property
    def p_star(self) -> float:
        return sobolev_conjugate(self.p, self.N)

    @property
    def coupling_sum(self) -> float:
        """The combined coupling exponent r + theta + 1."""
        return self.r + self.theta + 1.0


@dataclass(frozen=True)
class Condition:
    """One admissibility inequality with its numeric threshold."""

    name: str
    passed: bool
    value: float
    threshold: float
    near_threshold: bool


@dataclass(frozen=True)
class AdmissibilityVerdict:
    admissible: bool
    conditions: tuple[Condition, ...]
    near_thresholds: tuple[str, ...]

    def failures(self) -> list[Condition]:
        return [c for c in self.conditions if not c.passed]


class Zone(Enum):
    U_SOBOLEV_REGULARIZED = "u_sobolev_regularized"
    U_LEBESGUE_REGULARIZED = "u_lebesgue_regularized"
    OUTSIDE_REGULARIZING_ZONE = "outside_regularizing_zone"


@dataclass(frozen=True)
class ZoneReport:
    p_star: float
    m_conj: float
    coupling_conj: float
    m_star_p: float
    m_double_star_p: float
    zone: Zone
    v_sobolev: bool
    t_v: float
    near_thresholds: tuple[str, ...] = field(default=())


def _cond(name: str, value: float, threshold: float, strict_less: bool) -> Condition:
    near = abs(value - threshold) <= THRESHOLD_TOL * max(1.0, abs(threshold))
    passed = value < threshold if strict_less else value > threshold
    return Condition(name, passed, value, threshold, near)


def admissibility_check(params: ProblemParams) -> AdmissibilityVerdict:
    """Check the hypothesis window of the existence theorem.

    Requires min{(r+theta+1)', (p*)'} < m < N/p together with
    0 < theta < min{p-1, p^2/(N-p)} and r > 1.  Failures are reported as
    data, never raised.
    """
    N, p, r, theta, m = params.N, params.p, params.r, params.theta, params.m
    p_star = params.p_star
    m_lower = min(holder_conjugate(params.coupling_sum), holder_conjugate(p_star))
    conditions = (
        _cond("m > min{(r+theta+1)', (p*)'}", m, m_lower, strict_less=False),
        _cond("m < N/p", m, N / p, strict_less=True),
        _cond("theta < p-1", theta, p - 1.0, strict_less=True),
        _cond("theta < p^2/(N-p)", theta, p * p / (N - p), strict_less=True),
        _cond("r > 1", r, 1.0, strict_less=False),
    )
    near = tuple(c.name for c in conditions if c.near_threshold)
    return AdmissibilityVerdict(all(c.passed for c in conditions), conditions, near)


def sigma_exponent(params: ProblemParams) -> float:
    """A priori scaling exponent of ||u_k|| in terms of ||f||.

    Equals 2p/(2p-1) when m' >= r+theta+1 and 1/(r+theta) otherwise; the
    boundary case belongs to the first branch.
    """
    verdict = admissibility_check(params)
    if not verdict.admissible:
        raise ExponentError(f"sigma_exponent requires admissible params: {verdict.failures()}")
    m_conj = holder_conjugate(params.m)
    if m_conj >= params.coupling_sum:
        return 2.0 * params.p / (2.0 * params.p - 1.0)
    return 1.0 / (params.r + params.theta)


def eta_threshold_exponent(p: float, r: float, theta: float) -> float:
    """Growth exponent q of the truncation threshold eta > C(k^q + 1).

    Above this threshold the truncated couplings coincide with the raw ones
    on the approximate solutions, so the truncation is inactive.
    """
    if p <= 1.0:
        raise ExponentError(f"eta_threshold_exponent requires p > 1, got {p}")
    if r <= 1.0:
        raise ExponentError(f"eta_threshold_exponent requires r > 1, got {r}")
    if theta <= 0.0:
        raise ExponentError(f"eta_threshold_exponent requires theta > 0, got {theta}")
    pm1 = p - 1.0
    num = 2.0 * r * (2.0 * p - 1.0) + (theta + 2.0 * p - 1.0) * pm1
    return 2.0 * r / pm1 + (theta + 1.0) * num / (pm1 * pm1 * (2.0 * p - 1.0))


def zone_classify(params: ProblemParams) -> ZoneReport:
    """Classify (N, p, r, theta, m) into the regularizing zones.

    Zone I  (u Sobolev regularized):  r+theta > p*-1 and (r+theta+1)' < m < (p*)'.
    Zone II (u Lebesgue regularized): r+theta > p*-1 and
                                      (p*)' <= m < N(r+theta+1)/(N(p-1)+p(r+theta+1)).
    v is Sobolev regularized whenever r+theta > p*-1, equivalently whenever
    the dual exponent t_v of the second equation's source drops below (p*)'.
    """
    verdict = admissibility_check(params)
    if not verdict.admissible:
        raise ExponentError(f"zone_classify requires admissible params: {verdict.failures()}")
    N, p, r, theta, m = params.N, params.p, params.r, params.theta, params.m
    p_star = params.p_star
    s = params.coupling_sum
    p_star_conj = holder_conjugate(p_star)
    coupling_conj = holder_conjugate(s)
    m_star_p, m_double_star_p = regularized_exponents(m, p, N)
    t_v = p_star * s / (p_star * r + theta * s)

    supercritical = r + theta > p_star - 1.0
    zone = Zone.OUTSIDE_REGULARIZING_ZONE
    lebesgue_upper = N * s / (N * (p - 1.0) + p * s)
    if supercritical and coupling_conj < m < p_star_conj:
        zone = Zone.U_SOBOLEV_REGULARIZED
    elif supercritical and p_star_conj <= m < lebesgue_upper:
        zone = Zone.U_LEBESGUE_REGULARIZED

    thresholds = {
        "m = (p*)'": p_star_conj,
        "m = (r+theta+1)'": coupling_conj,
        "m = N(r+theta+1)/(N(p-1)+p(r+theta+1))": lebesgue_upper,
        "r+theta = p*-1": None,  # handled below, different variable
    }
    near = [
        name
        for name, value in thresholds.items()
        if value is not None and abs(m - value) <= THRESHOLD_TOL * max(1.0, value)
    ]
    if abs((r + theta) - (p_star - 1.0)) <= THRESHOLD_TOL * max(1.0, p_star - 1.0):
        near.append("r+theta = p*-1")

    return ZoneReport(
        p_star=p_star,
        m_conj=holder_conjugate(m),
        coupling_conj=coupling_conj,
        m_star_p=m_star_p,
        m_double_star_p=m_double_star_p,
        zone=zone,
        v_sobolev=supercritical,
        t_v=t_v,
        near_thresholds=tuple(near),
    )
