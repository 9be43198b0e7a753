"""Coupling nonlinearities g(x, s, t) and h(x, s, t) of the system.

Three families are supported:

* ``Prototype``: g = s|s|^{r-2}|t|^{theta+1}, h = t|s|^r|t|^{theta-1}, which
  attain the two-sided growth bounds with unit constants.
* ``WeightedOscillatory``: the prototype modulated by spatial weights and the
  bounded oscillation factors (cos(pi*s) + pi), (sin(pi*t) + pi).
* ``Custom``: user-supplied evaluators with user-claimed growth constants.

Evaluation is vectorized over numpy arrays and pure.  Powers of possibly
negative arguments always go through |.|**a with an explicit 0**a = 0 for
a > 0, never through platform pow sign conventions.

All growth-bound checks share the factored power kernel ``_power_parts`` with
the prototype evaluators, so for the prototype the observed ratio against the
bound envelope is exactly 1.0 in floating point.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np


class NonVariationalError(TypeError):
    """Raised when an energy primitive is requested for a non-prototype spec."""


def truncate(eta: float, value):
    """Clamp to [-eta, eta]: T_eta(s) = min(eta, max(-eta, s))."""
    if eta <= 0.0:
        raise ValueError(f"truncation level must be positive, got {eta}")
    return np.minimum(eta, np.maximum(-eta, value))


def tail_part(n: float, value):
    """Tail beyond the clamp band: G_n(s) = s - T_n(s), zero on [-n, n]."""
    if n <= 0.0:
        raise ValueError(f"tail level must be positive, got {n}")
    return value - truncate(n, value)


def _power_parts(s, t, r: float, theta: float):
    """Shared factored powers: (|s|^{r-1}, |s|, |t|^theta, |t|).

    Both the prototype evaluators and the growth-bound envelopes multiply
    these same factors, so prototype bound ratios are exact in floating point.
    """
    abs_s = np.abs(np.asarray(s, dtype=float))
    abs_t = np.abs(np.asarray(t, dtype=float))
    return abs_s ** (r - 1.0), abs_s, abs_t ** theta, abs_t


def _oscillation_g(s):
    return np.cos(np.pi * np.asarray(s, dtype=float)) + np.pi


def _oscillation_h(t):
    return np.sin(np.pi * np.asarray(t, dtype=float)) + np.pi


@dataclass(frozen=True)
class NonlinearitySpec:
    """Immutable description of the coupling pair (g, h).

    ``variant`` is one of "prototype", "oscillatory", "custom", "zero".
    Custom evaluators must be stateless; they receive (x, s, t) broadcastable
    arrays and are trusted to be Caratheodory.  The claimed constants c1, c2,
    d1, d2 are verified by sampling, never inferred.
    """

    variant: str
    r: float
    theta: float
    c1: float = 1.0
    c2: float = 1.0
    d1: float = 1.0
    d2: float = 1.0
    V1: Optional[Callable] = None
    V2: Optional[Callable] = None
    e1: float = 1.0
    e2: float = 1.0
    g_fn: Optional[Callable] = None
    h_fn: Optional[Callable] = None

    def __post_init__(self) -> None:
        if self.variant not in ("prototype", "oscillatory", "custom", "zero"):
            raise ValueError(f"unknown nonlinearity variant {self.variant!r}")
        if self.variant != "zero":
            if self.r <= 1.0:
                raise ValueError(f"r must exceed 1, got {self.r}")
            if self.theta <= 0.0:
                raise ValueError(f"theta must be positive, got {self.theta}")
        if self.variant == "oscillatory":
            if self.e1 <= 0.0 or self.e2 <= 0.0:
                raise ValueError("oscillatory weights need positive lower bounds e1, e2")
        if self.variant == "custom" and (self.g_fn is None or self.h_fn is None):
            raise ValueError("custom spec requires both g and h evaluators")

    @classmethod
    def prototype(cls, r: float, theta: float) -> "NonlinearitySpec":
        return cls(variant="prototype", r=r, theta=theta)

    @classmethod
    def oscillatory(
        cls,
        r: float,
        theta: float,
        V1: Optional[Callable] = None,
        V2: Optional[Callable] = None,
        e1: float = 1.0,
        e2: float = 1.0,
        V1_sup: Optional[float] = None,
        V2_sup: Optional[float] = None,
    ) -> "NonlinearitySpec":
        """Weighted oscillatory pair; default weights are the constants 1.

        Claimed constants follow from bounding the oscillation factor in
        [pi-1, pi+1]: c1 = e1*(pi-1), c2 = sup(V1)*(pi+1), likewise for h.
        """
        sup1 = V1_sup if V1_sup is not None else (e1 if V1 is None else None)
        sup2 = V2_sup if V2_sup is not None else (e2 if V2 is None else None)
        if sup1 is None or sup2 is None:
            raise ValueError("non-constant weights require explicit V1_sup / V2_sup")
        return cls(
            variant="oscillatory",
            r=r,
            theta=theta,
            V1=V1,
            V2=V2,
            e1=e1,
            e2=e2,
            c1=e1 * (np.pi - 1.0),
            c2=sup1 * (np.pi + 1.0),
            d1=e2 * (np.pi - 1.0),
            d2=sup2 * (np.pi + 1.0),
        )

    @classmethod
    def custom(
        cls,
        r: float,
        theta: float,
        g_fn: Callable,
        h_fn: Callable,
        c1: float,
        c2: float,
        d1: float,
        d2: float,
    ) -> "NonlinearitySpec":
        return cls(
            variant="custom", r=r, theta=theta, g_fn=g_fn, h_fn=h_fn,
            c1=c1, c2=c2, d1=d1, d2=d2,
        )

    @classmethod
    def zero(cls) -> "NonlinearitySpec":
        """Null coupling g = h = 0, used by decoupled control experiments."""
        return cls(variant="zero", r=2.0, theta=1.0, c1=0.0, c2=0.0, d1=0.0, d2=0.0)

    def _weight1(self, x):
        if self.V1 is None:
            return self.e1 if self.variant == "oscillatory" else 1.0
        return self.V1(x)

    def _weight2(self, x):
        if self.V2 is None:
            return self.e2 if self.variant == "oscillatory" else 1.0
        return self.V2(x)


def g_eval(spec: NonlinearitySpec, x, s, t):
    """First coupling term g(x, s, t); odd-in-s power growth."""
    if spec.variant == "zero":
        return np.zeros(np.broadcast(s, t).shape)
    sr1, _, tth, abs_t = _power_parts(s, t, spec.r, spec.theta)
    base = np.sign(s) * (sr1 * tth * abs_t)
    if spec.variant == "prototype":
        return base
    if spec.variant == "oscillatory":
        return spec._weight1(x) * base * _oscillation_g(s)
    return np.asarray(spec.g_fn(x, s, t), dtype=float)


def h_eval(spec: NonlinearitySpec, x, s, t):
    """Second coupling term h(x, s, t); continuous extension h(x, s, 0) = 0."""
    if spec.variant == "zero":
        return np.zeros(np.broadcast(s, t).shape)
    sr1, abs_s, tth, _ = _power_parts(s, t, spec.r, spec.theta)
    base = np.sign(t) * (sr1 * abs_s * tth)
    if spec.variant == "prototype":
        return base
    if spec.variant == "oscillatory":
        return spec._weight2(x) * base * _oscillation_h(t)
    return np.asarray(spec.h_fn(x, s, t), dtype=float)


def g_derivative_s(spec: NonlinearitySpec, x, s, t):
    """d g / d s for the prototype when r >= 2; None when not C^1 or not closed form.

    The prototype derivative (r-1)|s|^{r-2}|t|^{theta+1} is continuous only
    for r >= 2; callers lag the reaction otherwise.
    """
    if spec.variant != "prototype" or spec.r < 2.0:
        return None
    abs_s = np.abs(np.asarray(s, dtype=float))
    abs_t = np.abs(np.asarray(t, dtype=float))
    return (spec.r - 1.0) * abs_s ** (spec.r - 2.0) * abs_t ** (spec.theta + 1.0)


def primitive_in_s(spec: NonlinearitySpec, x, s, t):
    """Antiderivative int_0^s g(x, q, t) dq = |s|^r / r * |t|^{theta+1}.

    Exists in closed form only for the prototype; the inner solver falls back
    to residual-based line search for other variants.
    """
    if spec.variant != "prototype":
        raise NonVariationalError(
            f"energy primitive is only available for the prototype, not {spec.variant!r}"
        )
    abs_s = np.abs(np.asarray(s, dtype=float))
    abs_t = np.abs(np.asarray(t, dtype=float))
    return abs_s ** spec.r / spec.r * abs_t ** (spec.theta + 1.0)


@dataclass(frozen=True)
class BoundCheck:
    name: str
    worst_ratio: float
    bound: float
    passed: bool
    witness: Optional[tuple] = None  # (x, s, t) of the worst sample on failure


@dataclass(frozen=True)
class HypothesisReport:
    checks: tuple[BoundCheck, ...]
    n_samples: int

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)


def sample_points(rng: np.random.Generator, n: int, dim: int = 1, decades: float = 4.0):
    """Signed log-uniform (s, t) samples plus uniform points x in the unit box."""
    x = rng.uniform(0.0, 1.0, size=(n, dim))
    mag_s = 10.0 ** rng.uniform(-decades / 2.0, decades / 2.0, size=n)
    mag_t = 10.0 ** rng.uniform(-decades / 2.0, decades / 2.0, size=n)
    s = mag_s * rng.choice([-1.0, 1.0], size=n)
    t = mag_t * rng.choice([-1.0, 1.0], size=n)
    return x, s, t


REL_TOL = 1e-10


def verify_growth_bounds(
    spec: NonlinearitySpec,
    rng: np.random.Generator,
    n_samples: int = 10_000,
    dim: int = 1,
) -> HypothesisReport:
    """Sample-test the four two-sided growth bounds against the claimed constants.

    Lower bounds compare the worst (smallest) observed ratio against c1 or d1,
    upper bounds the largest against c2 or d2, with relative tolerance 1e-10.
    The witness sample of a failing bound is recorded.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    if spec.variant == "zero":
        raise ValueError("growth bounds are vacuous for the null coupling")
    x, s, t = sample_points(rng, n_samples, dim=dim)
    sr1, abs_s, tth, abs_t = _power_parts(s, t, spec.r, spec.theta)
    env_g = sr1 * tth * abs_t            # |s|^{r-1} |t|^{theta+1}
    env_gs = env_g * abs_s               # |s|^r |t|^{theta+1}
    env_h = sr1 * abs_s * tth            # |s|^r |t|^theta
    env_ht = env_h * abs_t               # |s|^r |t|^{theta+1}

    g = g_eval(spec, x, s, t)
    h = h_eval(spec, x, s, t)

    def ratios(num, env):
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(env > 0.0, num / np.where(env > 0.0, env, 1.0), np.nan)
        return out

    def check(name, values, bound, lower: bool) -> BoundCheck:
        valid = ~np.isnan(values)
        vals = values[valid]
        if vals.size == 0:
            return BoundCheck(name, np.nan, bound, passed=True)
        idx = int(np.argmin(vals) if lower else np.argmax(vals))
        worst = float(vals[idx])
        tol = REL_TOL * max(1.0, abs(bound))
        passed = worst >= bound - tol if lower else worst <= bound + tol
        witness = None
        if not passed:
            orig = np.flatnonzero(valid)[idx]
            witness = (x[orig].tolist(), float(s[orig]), float(t[orig]))
        return BoundCheck(name, worst, bound, passed, witness)

    checks = (
        check("H1: g(x,s,t)s >= c1|s|^r|t|^{theta+1}", ratios(g * s, env_gs), spec.c1, lower=True),
        check("H2: |g(x,s,t)| <= c2|s|^{r-1}|t|^{theta+1}", ratios(np.abs(g), env_g), spec.c2, lower=False),
        check("H3: h(x,s,t)t >= d1|s|^r|t|^{theta+1}", ratios(h * t, env_ht), spec.d1, lower=True),
        check("H4: |h(x,s,t)| <= d2|s|^r|t|^theta", ratios(np.abs(h), env_h), spec.d2, lower=False),
    )
    return HypothesisReport(checks=checks, n_samples=n_samples)
