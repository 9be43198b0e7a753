"""Discrete solves of the coupled nonlocal system and its frozen scalar pieces.

The coupled solve is an outer fixed-point (Picard) alternation: freeze the
gradient-energy coefficient and the partner field, solve each scalar equation
by damped Newton with an epsilon-regularized flux, then update the
coefficient with relaxation.  The second equation's reaction is always
lagged because its t-derivative is unbounded at t = 0 for theta < 1; the
first equation's reaction enters the Jacobian only for the prototype with
r >= 2, where it is C^1.

Everything is deterministic: assembly and reductions run in fixed order, and
identical configurations reproduce results bitwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .exponents import ProblemParams, admissibility_check
from .grids import (
    Field,
    Grid,
    dual_residual_norm,
    flux_scalar,
    flux_scalar_derivative,
    hat_test_norm,
    lq_norm,
    neg_divergence_flux,
    nonlocal_coefficient,
    w1p_seminorm,
)
from .nonlinearity import (
    NonlinearitySpec,
    g_derivative_s,
    g_eval,
    h_eval,
    primitive_in_s,
    truncate,
)


class NonfiniteValueError(FloatingPointError):
    """A NaN or Inf appeared during a solve."""


class OscillationDetectedError(RuntimeError):
    """The coefficient update cycles instead of contracting; reduce relax."""


class InsufficientSweepError(ValueError):
    """A sweep or schedule has fewer points than required."""


def default_eps_schedule(p: float) -> tuple[float, ...]:
    """Flux regularization continuation: none needed for p = 2."""
    if p == 2.0:
        return (0.0,)
    return (1e-2, 1e-4, 1e-6, 1e-8)


@dataclass(frozen=True)
class SolveConfig:
    k: float = 10.0
    eps_schedule: Optional[tuple[float, ...]] = None  # None: derived from p
    outer_tol: float = 1e-9
    # two orders tighter than outer_tol so inner-solve wobble cannot stall
    # the A-stationarity test
    inner_tol: float = 1e-12
    max_outer: int = 200
    max_inner: int = 80
    relax: float = 0.5

    def __post_init__(self) -> None:
        if self.k <= 0.0:
            raise ValueError(f"regularization level k must be positive, got {self.k}")
        if self.outer_tol <= 0.0 or self.inner_tol <= 0.0:
            raise ValueError("tolerances must be positive")
        if not 0.0 < self.relax <= 1.0:
            raise ValueError(f"relax must lie in (0, 1], got {self.relax}")
        if self.eps_schedule is not None:
            eps = self.eps_schedule
            if any(b >= a for a, b in zip(eps, eps[1:])):
                raise ValueError("eps schedule must be strictly decreasing")

    def schedule_for(self, p: float) -> tuple[float, ...]:
        return self.eps_schedule if self.eps_schedule is not None else default_eps_schedule(p)


@dataclass(frozen=True)
class OuterRecord:
    iteration: int
    A: float
    residual_first: float
    residual_second: float
    min_u: float
    min_v: float


@dataclass(frozen=True)
class SolveResult:
    u: Field
    v: Field
    A_k: float
    outer_history: tuple[OuterRecord, ...]
    converged: bool
    outer_iterations: int
    inner_iterations: int
    possibly_degenerate: bool


@dataclass(frozen=True)
class InnerResult:
    field: Field
    converged: bool
    iterations: int
    residual: float


def _interior_index(grid: Grid) -> np.ndarray:
    idx = -np.ones(grid.shape, dtype=np.int64)
    interior = grid.interior_mask()
    idx[interior] = np.arange(int(interior.sum()))
    return idx


def _assemble_jacobian(
    grid: Grid,
    u_vals: np.ndarray,
    A: float,
    p: float,
    eps: float,
    reaction_deriv: Optional[np.ndarray],
    idx: np.ndarray,
) -> sp.csr_matrix:
    """Jacobian of the strong residual at interior nodes (Dirichlet eliminated)."""
    h = grid.h
    n_int = int((idx >= 0).sum())
    rows: list[np.ndarray] = []
    cols: list[np.ndarray] = []
    vals: list[np.ndarray] = []
    for axis in range(grid.d):
        g = np.diff(u_vals, axis=axis) / h
        dphi = A * flux_scalar_derivative(g, p, eps) / (h * h)
        lo = [slice(None)] * grid.d
        lo[axis] = slice(0, -1)
        hi = [slice(None)] * grid.d
        hi[axis] = slice(1, None)
        left = idx[tuple(lo)]
        right = idx[tuple(hi)]
        for r, c, sign in ((left, left, 1.0), (left, right, -1.0),
                           (right, right, 1.0), (right, left, -1.0)):
            mask = (r >= 0) & (c >= 0)
            rows.append(r[mask])
            cols.append(c[mask])
            vals.append(sign * dphi[mask])
    if reaction_deriv is not None:
        interior = idx >= 0
        diag = np.maximum(reaction_deriv[interior], 0.0)
        rows.append(idx[interior])
        cols.append(idx[interior])
        vals.append(diag)
    J = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n_int, n_int),
    )
    return J.tocsr()


def _uniform_energy(
    grid: Grid,
    u_vals: np.ndarray,
    A: float,
    p: float,
    eps: float,
    primitive: Callable[[np.ndarray], np.ndarray],
    source_vals: np.ndarray,
) -> float:
    """Discrete energy whose gradient is h^d times the strong residual.

    Uses uniform h^d weights (not trapezoid) so the identity is exact; fields
    vanish on the boundary so the difference is immaterial for the minimum.
    """
    h = grid.h
    cell = h**grid.d
    total = 0.0
    for axis in range(grid.d):
        g = np.diff(u_vals, axis=axis) / h
        total += A / p * float(np.sum((g * g + eps * eps) ** (p / 2.0))) * cell
    total += float(np.sum(primitive(u_vals))) * cell
    total -= float(np.sum(source_vals * u_vals)) * cell
    return total


def _newton_scalar(
    grid: Grid,
    A: float,
    p: float,
    eps: float,
    source_fn: Callable[[np.ndarray], np.ndarray],
    reaction_fn: Optional[Callable[[np.ndarray], np.ndarray]],
    reaction_deriv_fn: Optional[Callable[[np.ndarray], np.ndarray]],
    u0: np.ndarray,
    tol: float,
    max_iter: int,
    energy_primitive: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> tuple[np.ndarray, bool, int, float]:
    """Damped Newton on the frozen scalar equation; returns best iterate.

    ``source_fn`` and ``reaction_fn`` receive the current nodal values, which
    implements reaction lagging: lagged terms are recomputed every iteration
    but never enter the Jacobian.
    """
    idx = _interior_index(grid)
    interior = idx >= 0
    w_int = grid.h**grid.d
    hat = hat_test_norm(grid, p)
    u = u0.copy()
    u[grid.boundary_mask()] = 0.0

    def residual(vals: np.ndarray) -> np.ndarray:
        res = A * neg_divergence_flux(Field(grid, vals), p, eps) - source_fn(vals)
        if reaction_fn is not None:
            res += reaction_fn(vals)
        return res[interior]

    def dual(res_vec: np.ndarray) -> float:
        return float(np.max(np.abs(res_vec))) * w_int / hat

    use_energy = energy_primitive is not None

    def merit(vals: np.ndarray, res_vec: Optional[np.ndarray]) -> float:
        if use_energy:
            return _uniform_energy(grid, vals, A, p, eps, energy_primitive, source_fn(vals))
        assert res_vec is not None
        return float(np.linalg.norm(res_vec))

    res = residual(u)
    if not np.all(np.isfinite(res)):
        raise NonfiniteValueError("nonfinite residual at the initial iterate")
    best = (u.copy(), dual(res))
    iterations = 0
    for _ in range(max_iter):
        d = dual(res)
        if d < best[1]:
            best = (u.copy(), d)
        if d <= tol:
            return u, True, iterations, d
        iterations += 1
        rd = reaction_deriv_fn(u) if reaction_deriv_fn is not None else None
        J = _assemble_jacobian(grid, u, A, p, eps, rd, idx)
        delta = spla.spsolve(J, -res)
        if not np.all(np.isfinite(delta)):
            raise NonfiniteValueError("nonfinite Newton step")
        m0 = merit(u, res)
        lam = 1.0
        accepted = False
        while lam >= 1e-12:
            u_try = u.copy()
            u_try[interior] += lam * delta
            res_try = residual(u_try)
            if np.all(np.isfinite(res_try)):
                m_try = merit(u_try, res_try)
                if m_try <= m0:
                    u, res = u_try, res_try
                    accepted = True
                    break
            lam *= 0.5
        if not accepted:
            # no productive step left; report the best iterate seen
            break
    res = residual(u)
    d = dual(res)
    if d < best[1]:
        best = (u.copy(), d)
    return best[0], best[1] <= tol, iterations, best[1]


def solve_scalar_plaplacian(
    grid: Grid,
    A: float,
    p: float,
    source: Field,
    config: SolveConfig,
    u0: Optional[Field] = None,
) -> InnerResult:
    """Decoupled solve of A * (-lap_p u) = source with zero reaction."""
    if A <= 0.0:
        raise ValueError(f"coefficient must be positive, got {A}")
    vals = u0.values if u0 is not None else np.zeros(grid.shape)
    schedule = config.schedule_for(p)
    total_iter = 0
    src = source.values

    def source_fn(_vals: np.ndarray) -> np.ndarray:
        return src

    for eps in schedule:
        vals, converged, iters, res = _newton_scalar(
            grid, A, p, eps, source_fn, None, None, vals,
            config.inner_tol, config.max_inner,
        )
        total_iter += iters
    return InnerResult(Field(grid, vals), converged, total_iter, res)


def inner_scalar_solve(
    A: float,
    partner: Field,
    which: str,
    f_or_source: Field,
    spec: NonlinearitySpec,
    params: ProblemParams,
    config: SolveConfig,
    u0: Optional[Field] = None,
) -> InnerResult:
    """Solve one scalar equation of the approximate system with the coupling frozen.

    ``which`` = "first": A*(-lap_p u) + g(x, u, v_frozen) = T_k(f).
    ``which`` = "second": A*(-lap_p v) = h(x, u_frozen, v) + 1/k, with the
    reaction lagged.
    """
    if which not in ("first", "second"):
        raise ValueError(f"which must be 'first' or 'second', got {which!r}")
    grid = partner.grid
    x = tuple(grid.coords())
    p = params.p
    vals0 = u0.values if u0 is not None else np.zeros(grid.shape)
    schedule = config.schedule_for(p)
    total_iter = 0

    if which == "first":
        fk = truncate(config.k, f_or_source.values)
        partner_vals = partner.values

        def source_fn(_vals: np.ndarray) -> np.ndarray:
            return fk

        def reaction_fn(vals: np.ndarray) -> np.ndarray:
            return g_eval(spec, x, vals, partner_vals)

        def reaction_deriv_fn(vals: np.ndarray):
            return g_derivative_s(spec, x, vals, partner_vals)

        deriv = reaction_deriv_fn if g_derivative_s(spec, x, 1.0, 1.0) is not None else None
        energy = None
        if spec.variant == "prototype":
            def energy(vals: np.ndarray) -> np.ndarray:
                return primitive_in_s(spec, x, vals, partner_vals)
    else:
        partner_vals = partner.values
        one_over_k = 1.0 / config.k

        def source_fn(vals: np.ndarray) -> np.ndarray:
            return h_eval(spec, x, partner_vals, vals) + one_over_k

        reaction_fn = None
        deriv = None
        energy = None

    vals = vals0
    for eps in schedule:
        vals, converged, iters, res = _newton_scalar(
            grid, A, p, eps, source_fn, reaction_fn if which == "first" else None,
            deriv, vals, config.inner_tol, config.max_inner,
            energy_primitive=energy,
        )
        total_iter += iters
    return InnerResult(Field(grid, vals), converged, total_iter, res)


def weak_residual_dual_norm(
    u: Field,
    v: Field,
    f: Field,
    spec: NonlinearitySpec,
    params: ProblemParams,
    which: str,
    k: Optional[float] = None,
) -> float:
    """Self-consistent weak residual of one equation in the hat-function dual norm.

    The coefficient is recomputed from (u, v) and k, so this is an
    independent certificate, re-checkable without the solver.
    """
    if which not in ("first", "second"):
        raise ValueError(f"which must be 'first' or 'second', got {which!r}")
    grid = u.grid
    if v.grid != grid or f.grid != grid:
        raise ValueError("fields live on different grids")
    x = tuple(grid.coords())
    p = params.p
    A = nonlocal_coefficient(u, v, p, k)
    if which == "first":
        reaction = g_eval(spec, x, u.values, v.values)
        source = truncate(k, f.values) if k is not None and np.isfinite(k) else f.values
        return dual_residual_norm(u, A, p, reaction, source)
    source = h_eval(spec, x, u.values, v.values)
    if k is not None and np.isfinite(k):
        source = source + 1.0 / k
    return dual_residual_norm(v, A, p, np.zeros(grid.shape), source)


_OSCILLATION_WINDOW = 8


def picard_system_solve(
    f: Field,
    spec: NonlinearitySpec,
    params: ProblemParams,
    config: SolveConfig,
    u0: Optional[Field] = None,
    v0: Optional[Field] = None,
) -> SolveResult:
    """Alternating fixed-point solve of the regularized coupled system.

    Starts from u = v = 0 (hence coefficient 1/k) unless warm-started, damps
    the coefficient update by ``relax``, and stops when the coefficient is
    stationary and both self-consistent weak residuals are below outer_tol.
    Positivity of u and v is diagnosed in the history, never enforced.
    """
    verdict = admissibility_check(params)
    if not verdict.admissible:
        raise ValueError(f"inadmissible parameters: {verdict.failures()}")
    grid = f.grid
    k = config.k
    p = params.p
    u = u0 if u0 is not None else Field.zeros(grid)
    v = v0 if v0 is not None else Field.zeros(grid)
    A = nonlocal_coefficient(u, v, p, k)
    history: list[OuterRecord] = []
    a_values: list[float] = [A]
    inner_total = 0
    converged = False
    res1 = res2 = np.inf
    for j in range(config.max_outer):
        inner_u = inner_scalar_solve(A, v, "first", f, spec, params, config, u0=u)
        u = inner_u.field
        inner_v = inner_scalar_solve(A, u, "second", f, spec, params, config, u0=v)
        v = inner_v.field
        inner_total += inner_u.iterations + inner_v.iterations
        A_raw = nonlocal_coefficient(u, v, p, k)
        A_next = (1.0 - config.relax) * A + config.relax * A_raw
        res1 = weak_residual_dual_norm(u, v, f, spec, params, "first", k)
        res2 = weak_residual_dual_norm(u, v, f, spec, params, "second", k)
        history.append(
            OuterRecord(j, A_next, res1, res2, u.min_value(), v.min_value())
        )
        rel_change = abs(A_next - A) / max(A_next, 1.0 / k)
        A = A_next
        a_values.append(A)
        if rel_change <= config.outer_tol and res1 <= config.outer_tol and res2 <= config.outer_tol:
            converged = True
            break
        _check_oscillation(a_values)
    A_final = nonlocal_coefficient(u, v, p, k)
    return SolveResult(
        u=u,
        v=v,
        A_k=A_final,
        outer_history=tuple(history),
        converged=converged,
        outer_iterations=len(history),
        inner_iterations=inner_total,
        possibly_degenerate=A_final < 10.0 / k,
    )


def _check_oscillation(a_values: list[float]) -> None:
    """Raise when the coefficient updates alternate without contracting."""
    if len(a_values) < _OSCILLATION_WINDOW + 2:
        return
    recent = np.diff(np.asarray(a_values[-(_OSCILLATION_WINDOW + 1):]))
    if np.any(recent == 0.0):
        return
    signs = np.sign(recent)
    alternating = np.all(signs[1:] * signs[:-1] < 0.0)
    contracting = np.abs(recent[-1]) < np.abs(recent[0])
    if alternating and not contracting:
        raise OscillationDetectedError(
            "coefficient update is cycling; reduce relax below "
            f"{np.abs(recent[-1]):.3e} step scale"
        )


@dataclass(frozen=True)
class CauchyRecord:
    k_from: float
    k_to: float
    grad_diff_u: float
    grad_diff_v: float
    A_from: float
    A_to: float


def k_continuation(
    f: Field,
    spec: NonlinearitySpec,
    params: ProblemParams,
    k_schedule: Sequence[float],
    config: SolveConfig,
) -> tuple[list[SolveResult], list[CauchyRecord]]:
    """Solve along an increasing schedule of regularization levels.

    Each stage warm-starts from the previous solution; consecutive gradient
    differences in L^p act as a Cauchy diagnostic for the convergence of the
    approximation scheme.  Partial results are kept if a stage fails.
    """
    ks = list(k_schedule)
    if any(b <= a for a, b in zip(ks, ks[1:])):
        raise ValueError("k schedule must be strictly increasing")
    p = params.p
    results: list[SolveResult] = []
    cauchy: list[CauchyRecord] = []
    u_prev: Optional[Field] = None
    v_prev: Optional[Field] = None
    for k in ks:
        cfg = SolveConfig(
            k=k,
            eps_schedule=config.eps_schedule,
            outer_tol=config.outer_tol,
            inner_tol=config.inner_tol,
            max_outer=config.max_outer,
            max_inner=config.max_inner,
            relax=config.relax,
        )
        result = picard_system_solve(f, spec, params, cfg, u0=u_prev, v0=v_prev)
        if results:
            prev = results[-1]
            du = Field(f.grid, result.u.values - prev.u.values)
            dv = Field(f.grid, result.v.values - prev.v.values)
            cauchy.append(
                CauchyRecord(
                    k_from=ks[len(results) - 1],
                    k_to=k,
                    grad_diff_u=w1p_seminorm(du, p),
                    grad_diff_v=w1p_seminorm(dv, p),
                    A_from=prev.A_k,
                    A_to=result.A_k,
                )
            )
        results.append(result)
        u_prev, v_prev = result.u, result.v
    return results, cauchy


@dataclass(frozen=True)
class LinfVerdict:
    applicable: bool
    max_u: float
    max_v: float
    bound_shape_u: float
    bound_shape_v: float
    ratio_u: float
    ratio_v: float
    t: float
    k: float
    reason: str = ""


def linf_report(
    result: SolveResult,
    f: Field,
    params: ProblemParams,
    t: float,
    k: float,
) -> LinfVerdict:
    """Sup-norm diagnostics against the datum-scaling shape of the L^inf bounds.

    The unknown constant makes single-run pass/fail meaningless, so the
    verdict carries ratios intended to be tracked across sweeps.  Requires
    t > N/p; otherwise the bound does not apply.
    """
    N, p, r, theta = params.N, params.p, params.r, params.theta
    max_u = result.u.max_abs()
    max_v = result.v.max_abs()
    if t <= N / p:
        return LinfVerdict(
            applicable=False, max_u=max_u, max_v=max_v,
            bound_shape_u=np.nan, bound_shape_v=np.nan,
            ratio_u=np.nan, ratio_v=np.nan, t=t, k=k,
            reason=f"bound requires t > N/p = {N / p}",
        )
    norm_f = lq_norm(f, t)
    pm1 = p - 1.0
    shape_u = norm_f ** (1.0 / pm1) * max(1.0, k ** (1.0 / pm1))
    e1 = (r * (2.0 * p - 1.0) + theta * pm1) / (pm1 * pm1 * (2.0 * p - 1.0))
    e2 = (r + p - 1.0) / (pm1 * pm1)
    shape_v = norm_f**e1 * max(1.0, k**e2) + 1.0
    return LinfVerdict(
        applicable=True,
        max_u=max_u,
        max_v=max_v,
        bound_shape_u=shape_u,
        bound_shape_v=shape_v,
        ratio_u=max_u / shape_u if shape_u > 0.0 else (0.0 if max_u == 0.0 else np.inf),
        ratio_v=max_v / shape_v,
        t=t,
        k=k,
    )
