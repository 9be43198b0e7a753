"""Structured grids, nodal fields, quadrature, norms and discrete residuals.

The domain is an axis-aligned box (default the unit box) discretized by a
uniform node grid in dimension d in {1, 2, 3}, with homogeneous Dirichlet
values on the boundary nodes.  Gradients live on cell faces (staggered, one
component per face along its axis), volume quadrature is trapezoidal in each
axis (order 2, exact for affine data), and the discrete p-Laplacian energy is
the axis-separable sum over faces.  For p = 2 this coincides with the usual
isotropic discretization; for p != 2 in d >= 2 the flux at a face uses only
the normal difference, which keeps assembly local and the weak form exactly
summable by parts.

All reductions run in numpy's fixed sequential order, so repeated evaluation
is bitwise identical.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np


class GridMismatchError(ValueError):
    """Raised when an operation mixes fields living on different grids."""


@dataclass(frozen=True)
class Grid:
    """Uniform node grid on a box with Dirichlet boundary flags."""

    d: int
    n_per_axis: int
    extent: float = 1.0

    def __post_init__(self) -> None:
        if self.d not in (1, 2, 3):
            raise ValueError(f"grid dimension must be 1, 2 or 3, got {self.d}")
        if self.n_per_axis < 3:
            raise ValueError(f"need at least 3 nodes per axis, got {self.n_per_axis}")
        if self.extent <= 0.0:
            raise ValueError(f"extent must be positive, got {self.extent}")

    @property
    def h(self) -> float:
        return self.extent / (self.n_per_axis - 1)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n_per_axis,) * self.d

    @property
    def n_nodes(self) -> int:
        return self.n_per_axis**self.d

    def axis_coords(self) -> np.ndarray:
        return np.linspace(0.0, self.extent, self.n_per_axis)

    def coords(self) -> list[np.ndarray]:
        """Node coordinate arrays, one per axis, each of full grid shape."""
        axes = [self.axis_coords() for _ in range(self.d)]
        return list(np.meshgrid(*axes, indexing="ij"))

    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        for axis in range(self.d):
            idx_lo = [slice(None)] * self.d
            idx_lo[axis] = 0
            idx_hi = [slice(None)] * self.d
            idx_hi[axis] = -1
            mask[tuple(idx_lo)] = True
            mask[tuple(idx_hi)] = True
        return mask

    def interior_mask(self) -> np.ndarray:
        return ~self.boundary_mask()

    def node_weights(self) -> np.ndarray:
        """Trapezoidal quadrature weights per node; they sum to extent^d."""
        w1 = np.full(self.n_per_axis, self.h)
        w1[0] = w1[-1] = self.h / 2.0
        w = w1
        for _ in range(self.d - 1):
            w = np.multiply.outer(w, w1)
        return w

    def face_weights(self, axis: int) -> np.ndarray:
        """Quadrature weights for faces along one axis (h times transverse trapezoid)."""
        w1 = np.full(self.n_per_axis, self.h)
        w1[0] = w1[-1] = self.h / 2.0
        parts = []
        for a in range(self.d):
            parts.append(np.full(self.n_per_axis - 1, self.h) if a == axis else w1)
        w = parts[0]
        for part in parts[1:]:
            w = np.multiply.outer(w, part)
        return w


@dataclass(frozen=True)
class Field:
    """Nodal scalar field on a grid.

    Solver-produced fields vanish on the boundary; analytic test fixtures may
    violate that, which is why the invariant is checked on demand via
    ``assert_dirichlet`` rather than at construction.
    """

    grid: Grid
    values: np.ndarray

    def __post_init__(self) -> None:
        if self.values.shape != self.grid.shape:
            raise ValueError(
                f"field shape {self.values.shape} does not match grid shape {self.grid.shape}"
            )

    @classmethod
    def zeros(cls, grid: Grid) -> "Field":
        return cls(grid, np.zeros(grid.shape))

    @classmethod
    def from_callable(cls, grid: Grid, fn: Callable, zero_boundary: bool = True) -> "Field":
        values = np.asarray(fn(*grid.coords()), dtype=float)
        values = np.broadcast_to(values, grid.shape).copy()
        if zero_boundary:
            values[grid.boundary_mask()] = 0.0
        return cls(grid, values)

    @classmethod
    def full(cls, grid: Grid, value: float) -> "Field":
        return cls(grid, np.full(grid.shape, float(value)))

    def with_values(self, values: np.ndarray) -> "Field":
        return Field(self.grid, values)

    def assert_dirichlet(self, tol: float = 0.0) -> None:
        worst = float(np.max(np.abs(self.values[self.grid.boundary_mask()])))
        if worst > tol:
            raise ValueError(f"boundary values reach {worst}, expected 0")

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))

    def min_value(self) -> float:
        return float(np.min(self.values))

    def to_csv(self) -> str:
        """RFC-4180 style snapshot: coordinate columns then the nodal value."""
        headers = ["x", "y", "z"][: self.grid.d] + ["value"]
        coords = self.grid.coords()
        cols = [c.ravel() for c in coords] + [self.values.ravel()]
        buf = io.StringIO()
        buf.write(",".join(headers) + "\r\n")
        for row in zip(*cols):
            buf.write(",".join(repr(float(v)) for v in row) + "\r\n")
        return buf.getvalue()


def _require_same_grid(*fields: Field) -> Grid:
    grid = fields[0].grid
    for f in fields[1:]:
        if f.grid != grid:
            raise GridMismatchError("fields live on different grids")
    return grid


def gradient_at_faces(u: Field) -> list[np.ndarray]:
    """Directional difference per face, one array per axis; exact on affine fields."""
    h = u.grid.h
    return [np.diff(u.values, axis=axis) / h for axis in range(u.grid.d)]


def lq_norm(u: Field, q: float) -> float:
    """Trapezoidal L^q norm; absolutely homogeneous exactly."""
    if q < 1.0:
        raise ValueError(f"L^q norm requires q >= 1, got {q}")
    w = u.grid.node_weights()
    return float(np.sum(w * np.abs(u.values) ** q) ** (1.0 / q))


def integrate_nodal(u: Field, values: np.ndarray | None = None) -> float:
    """Trapezoidal integral of a nodal sampling (defaults to the field itself)."""
    vals = u.values if values is None else values
    return float(np.sum(u.grid.node_weights() * vals))


def w1p_seminorm(u: Field, p: float) -> float:
    """Discrete W^{1,p} seminorm from face gradients."""
    if p < 1.0:
        raise ValueError(f"W^{{1,p}} seminorm requires p >= 1, got {p}")
    total = 0.0
    for axis, g in enumerate(gradient_at_faces(u)):
        w = u.grid.face_weights(axis)
        total += float(np.sum(w * np.abs(g) ** p))
    return total ** (1.0 / p)


def nonlocal_coefficient(u: Field, v: Field, p: float, k: float | None = None) -> float:
    """Gradient-energy coefficient 1/k + ||grad u||_p^p + ||grad v||_p^p.

    Pass k = None (or inf) for the limit problem without the 1/k floor.
    """
    _require_same_grid(u, v)
    base = w1p_seminorm(u, p) ** p + w1p_seminorm(v, p) ** p
    if k is None or np.isinf(k):
        return base
    if k <= 0.0:
        raise ValueError(f"regularization level k must be positive, got {k}")
    return 1.0 / k + base


def flux_scalar(g: np.ndarray, p: float, eps: float = 0.0) -> np.ndarray:
    """Regularized scalar flux (g^2 + eps^2)^{(p-2)/2} g with 0 mapped to 0."""
    if eps == 0.0:
        with np.errstate(divide="ignore", invalid="ignore"):
            mag = np.abs(g) ** (p - 2.0)
        return np.where(g == 0.0, 0.0, mag * g)
    return (g * g + eps * eps) ** ((p - 2.0) / 2.0) * g


def flux_scalar_derivative(g: np.ndarray, p: float, eps: float) -> np.ndarray:
    """d/dg of the regularized scalar flux: (g^2+eps^2)^{(p-4)/2}((p-1)g^2 + eps^2)."""
    m2 = g * g + eps * eps
    if eps == 0.0:
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.abs(g) ** (p - 2.0) * (p - 1.0)
        at_zero = 1.0 if p == 2.0 else (0.0 if p > 2.0 else np.inf)
        return np.where(g == 0.0, at_zero, out)
    return m2 ** ((p - 4.0) / 2.0) * ((p - 1.0) * g * g + eps * eps)


def neg_divergence_flux(u: Field, p: float, eps: float = 0.0) -> np.ndarray:
    """-div of the face flux at interior nodes (boundary entries are 0)."""
    grid = u.grid
    h = grid.h
    out = np.zeros(grid.shape)
    for axis, g in enumerate(gradient_at_faces(u)):
        F = flux_scalar(g, p, eps)
        div = np.diff(F, axis=axis) / h  # defined at nodes 1..n-2 along this axis
        idx = [slice(None)] * grid.d
        idx[axis] = slice(1, -1)
        out[tuple(idx)] -= div
    out[grid.boundary_mask()] = 0.0
    return out


def weighted_plap_residual(
    u: Field,
    A: float,
    p: float,
    eps_reg: float,
    reaction: Field,
    source: Field,
) -> Field:
    """Strong-form residual A*(-div flux(grad u)) + reaction - source, zero on the boundary."""
    if A <= 0.0:
        raise ValueError(f"coefficient A must be positive, got {A}")
    grid = _require_same_grid(u, reaction, source)
    res = A * neg_divergence_flux(u, p, eps_reg) + reaction.values - source.values
    res[grid.boundary_mask()] = 0.0
    return Field(grid, res)


def hat_test_norm(grid: Grid, p: float) -> float:
    """W^{1,p} norm of the discrete hat at an interior node.

    Each hat has 2 adjacent faces per axis with |grad| = 1/h, every adjacent
    quadrature factor at an interior node is h, so the norm is the same
    constant for all interior nodes.
    """
    h = grid.h
    semi_p = 2.0 * grid.d * (1.0 / h) ** p * h**grid.d
    return float((semi_p + h**grid.d) ** (1.0 / p))


def dual_residual_norm(
    u: Field,
    A: float,
    p: float,
    reaction_values: np.ndarray,
    source_values: np.ndarray,
    eps_reg: float = 0.0,
) -> float:
    """Dual norm of the weak residual over discrete hat test functions.

    For the hat at node i the weak-form mismatch equals the nodal quadrature
    weight times the strong residual there, so the maximum of
    |mismatch| / ||hat||_{W^{1,p}} is directly computable.
    """
    grid = u.grid
    res = A * neg_divergence_flux(u, p, eps_reg) + reaction_values - source_values
    interior = grid.interior_mask()
    w_int = grid.h**grid.d
    return float(np.max(np.abs(res[interior])) * w_int / hat_test_norm(grid, p))
